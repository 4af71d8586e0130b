"""FastAPI application speaking the oracle wire protocol."""

from typing import Optional

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from model_server.backends import MaskIndexError, build_backend
from model_server.config import ServerConfig


class ClassifyRequest(BaseModel):
    texts: list[str]


class FillMaskRequest(BaseModel):
    text_with_mask: str
    mask_token_index: int = Field(ge=0)
    top_k: int = Field(ge=1)
    original_token: Optional[str] = None


def _envelope(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def build_app(backend) -> FastAPI:
    """Wrap one backend (classifier or masked-lm) in the wire protocol."""
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return _envelope(400, "bad_request", str(exc.errors()[:1]))

    @app.exception_handler(MaskIndexError)
    async def bad_index(request: Request, exc: MaskIndexError):
        return _envelope(422, "index_out_of_range", str(exc))

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        return _envelope(exc.status_code, "not_found" if exc.status_code == 404 else "http_error", str(exc.detail))

    @app.exception_handler(Exception)
    async def model_failure(request: Request, exc: Exception):
        return _envelope(500, "internal", f"{type(exc).__name__}: {exc}")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/info")
    def info():
        return backend.info()

    if backend.role == "classifier":

        @app.post("/v1/classify")
        def classify(body: ClassifyRequest):
            if len(body.texts) > backend.config.max_batch:
                return _envelope(
                    400,
                    "batch_too_large",
                    f"{len(body.texts)} texts exceed max_batch {backend.config.max_batch}",
                )
            return {"results": backend.classify(body.texts)}

    else:

        @app.post("/v1/fill-mask")
        def fill_mask(body: FillMaskRequest):
            candidates = backend.fill_mask(
                body.text_with_mask,
                body.mask_token_index,
                body.top_k,
                body.original_token,
            )
            return {"candidates": candidates}

    return app


def serve(config: ServerConfig) -> None:
    """Load the model and block serving it."""
    app = build_app(build_backend(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
