"""Stdlib HTTP server that exposes one in-process oracle over the wire protocol.

Serves ``/v1/classify`` or ``/v1/fill-mask`` (depending on which oracle it
wraps), plus ``/v1/info`` and ``/healthz``.  Used by the wire-protocol tests
and by ``scripts/serve_mocks.py`` for manual CLI runs; real model servers
implement the same contract.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from tibattack.oracle import Classifier, MaskedLM
from tibattack.segmenters import SyllableFallbackSegmenter, WordSegmenter
from tibattack.tibetan import (
    Granularity,
    SegmentedText,
    segment_syllables,
    segment_words,
    substitute,
)


def _replace_token(seg: SegmentedText, index: int, token: str) -> SegmentedText:
    """New SegmentedText with one token swapped and byte spans recomputed."""
    old = seg.units[index]
    delta = len(token.encode("utf-8")) - len(old.token.encode("utf-8"))
    units = list(seg.units)
    units[index] = replace(old, token=token, span=(old.span[0], old.span[1] + delta))
    for i in range(index + 1, len(units)):
        lo, hi = units[i].span
        units[i] = replace(units[i], span=(lo + delta, hi + delta))
    return SegmentedText(
        original=substitute(seg, index, token, validate=False),
        units=tuple(units),
        trailing_delims=seg.trailing_delims,
        granularity=seg.granularity,
    )


class OracleHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        *,
        classifier: Classifier | None = None,
        masked_lm: MaskedLM | None = None,
        segmenter: WordSegmenter | None = None,
    ):
        if (classifier is None) == (masked_lm is None):
            raise ValueError("serve exactly one of classifier or masked_lm")
        self.classifier = classifier
        self.masked_lm = masked_lm
        self.segmenter = segmenter
        self.request_log: list[str] = []
        super().__init__(address, _Handler)

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def start_server(
    *,
    classifier: Classifier | None = None,
    masked_lm: MaskedLM | None = None,
    segmenter: WordSegmenter | None = None,
    host: str = "127.0.0.1",
    port: int = 0,
) -> OracleHTTPServer:
    """Start a daemon-thread server; caller owns ``server.shutdown()``."""
    server = OracleHTTPServer(
        (host, port), classifier=classifier, masked_lm=masked_lm, segmenter=segmenter
    )
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


class _Handler(BaseHTTPRequestHandler):
    server: OracleHTTPServer

    def log_message(self, *args):  # keep test output quiet
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_envelope(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def _oracle(self):
        return self.server.classifier or self.server.masked_lm

    def do_GET(self):
        self.server.request_log.append(f"GET {self.path}")
        if self.path == "/healthz":
            self._send_json(200, {"status": "ok"})
        elif self.path == "/v1/info":
            info = {k: v for k, v in asdict(self._oracle().info()).items() if v is not None}
            if "labels" in info:
                info["labels"] = list(info["labels"])
            self._send_json(200, info)
        else:
            self._send_error_envelope(404, "not_found", f"no such endpoint: {self.path}")

    def do_POST(self):
        self.server.request_log.append(f"POST {self.path}")
        try:
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send_error_envelope(400, "bad_request", "body must be a JSON object")
            return
        if not isinstance(payload, dict):
            self._send_error_envelope(400, "bad_request", "body must be a JSON object")
            return
        try:
            if self.path == "/v1/classify" and self.server.classifier is not None:
                self._classify(payload)
            elif self.path == "/v1/fill-mask" and self.server.masked_lm is not None:
                self._fill_mask(payload)
            else:
                self._send_error_envelope(404, "not_found", f"no such endpoint: {self.path}")
        except _BadRequest as exc:
            self._send_error_envelope(400, "bad_request", str(exc))
        except Exception as exc:  # model bug, not a client error
            self._send_error_envelope(500, "model_error", f"{type(exc).__name__}: {exc}")

    def _classify(self, payload: dict) -> None:
        texts = payload.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise _BadRequest("texts must be a list of strings")
        info = self.server.classifier.info()
        if len(texts) > info.max_batch:
            raise _BadRequest(f"batch of {len(texts)} exceeds max_batch={info.max_batch}")
        results = [
            {"probs": list(dist.probs), "labels": list(dist.labels)}
            for dist in self.server.classifier.classify(texts)
        ]
        self._send_json(200, {"results": results})

    def _fill_mask(self, payload: dict) -> None:
        text = payload.get("text_with_mask")
        ordinal = payload.get("mask_token_index")
        top_k = payload.get("top_k")
        original = payload.get("original_token")
        if not isinstance(text, str) or not text:
            raise _BadRequest("text_with_mask must be a non-empty string")
        if not isinstance(ordinal, int) or isinstance(ordinal, bool) or ordinal < 0:
            raise _BadRequest("mask_token_index must be a non-negative integer")
        if not isinstance(top_k, int) or isinstance(top_k, bool) or top_k < 1:
            raise _BadRequest("top_k must be a positive integer")
        if original is not None and not isinstance(original, str):
            raise _BadRequest("original_token must be a string")

        lm = self.server.masked_lm
        info = lm.info()
        if not info.mask_literal:
            raise _BadRequest("this model declares no mask_literal")
        seg, index = _locate_mask(
            text, info.mask_literal, ordinal, info.granularity, self.server.segmenter
        )
        if original:
            # Re-insert the caller's token so the model can exclude it.
            seg = _replace_token(seg, index, original)
        predictions = lm.fill_mask(seg, index, top_k)
        self._send_json(
            200,
            {"candidates": [{"token": p.token, "score": p.score} for p in predictions]},
        )


class _BadRequest(ValueError):
    pass


def _locate_mask(
    text: str,
    mask_literal: str,
    ordinal: int,
    granularity: str | None,
    segmenter: WordSegmenter | None,
) -> tuple[SegmentedText, int]:
    """Resolve the ordinal-th occurrence of the mask literal to a unit index."""
    pos = -1
    for _ in range(ordinal + 1):
        pos = text.find(mask_literal, pos + 1)
        if pos == -1:
            raise _BadRequest(
                f"mask_token_index {ordinal} out of range: "
                f"text has {text.count(mask_literal)} mask occurrence(s)"
            )
    if granularity == Granularity.WORD.value:
        seg = segment_words(text, segmenter or SyllableFallbackSegmenter())
    else:
        seg = segment_syllables(text)
    byte_offset = len(text[:pos].encode("utf-8"))
    for i, unit in enumerate(seg.units):
        if unit.span[0] <= byte_offset < unit.span[1]:
            return seg, i
    raise _BadRequest("mask literal sits outside every text unit")
