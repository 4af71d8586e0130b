"""HTTP clients for the classifier and masked-LM wire protocol.

Endpoints:

* ``POST /v1/classify``   ``{"texts": [...]}`` to per-text label distributions
* ``POST /v1/fill-mask``  one masked text to ranked candidates
* ``GET  /v1/info``       static model metadata
* ``GET  /healthz``       liveness

Error responses carry ``{"error": {"code": ..., "message": ...}}``.  Anything
off-contract (bad shapes, probabilities that do not sum to one, non-monotone
candidate scores) raises ProtocolError; connection trouble raises
TransportError; a well-formed error envelope raises ModelError.
"""

from __future__ import annotations

import threading
from typing import Sequence

import requests

from tibattack.oracle import (
    LabelDistribution,
    MaskPrediction,
    OracleInfo,
    ModelError,
    ProtocolError,
    TransportError,
    clean_predictions,
)
from tibattack.tibetan import SegmentedText, substitute

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ProtocolError(message)


class _HttpOracle:
    """Shared transport: per-thread sessions, retries, envelope decoding."""

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._local = threading.local()
        self._info: OracleInfo | None = None
        self._info_lock = threading.Lock()

    def _session(self) -> requests.Session:
        # requests.Session is not thread-safe; campaigns run attacks in a
        # thread pool, so each worker gets its own.
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self.base_url + path
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = self._session().request(
                    method, url, json=payload, timeout=self.timeout
                )
                break
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
        else:
            raise TransportError(f"{method} {url}: {last_exc}") from last_exc
        return self._decode(response, url)

    @staticmethod
    def _decode(response: requests.Response, url: str) -> dict:
        try:
            body = response.json()
        except ValueError:
            raise ProtocolError(
                f"{url}: non-JSON response (HTTP {response.status_code})"
            ) from None
        if response.status_code >= 400:
            error = body.get("error") if isinstance(body, dict) else None
            if isinstance(error, dict) and "message" in error:
                code = error.get("code", "error")
                raise ModelError(f"{code}: {error['message']}")
            raise ProtocolError(
                f"{url}: HTTP {response.status_code} without error envelope"
            )
        if not isinstance(body, dict):
            raise ProtocolError(f"{url}: expected a JSON object, got {type(body).__name__}")
        return body

    def info(self) -> OracleInfo:
        with self._info_lock:
            if self._info is None:
                self._info = self._parse_info(self._request("GET", "/v1/info"))
            return self._info

    @staticmethod
    def _parse_info(body: dict) -> OracleInfo:
        model_id = body.get("model_id")
        _require(isinstance(model_id, str) and bool(model_id), "info: missing model_id")
        max_batch = body.get("max_batch", 32)
        _require(isinstance(max_batch, int) and max_batch >= 1, "info: bad max_batch")
        labels = body.get("labels")
        if labels is not None:
            _require(
                isinstance(labels, list) and all(isinstance(x, str) for x in labels),
                "info: labels must be a list of strings",
            )
            labels = tuple(labels)
        for key in ("unk_literal", "mask_literal", "granularity"):
            _require(
                body.get(key) is None or isinstance(body.get(key), str),
                f"info: {key} must be a string",
            )
        return OracleInfo(
            model_id=model_id,
            unk_literal=body.get("unk_literal") or "",
            max_batch=max_batch,
            labels=labels,
            mask_literal=body.get("mask_literal"),
            granularity=body.get("granularity"),
        )

    def healthy(self) -> bool:
        try:
            self._request("GET", "/healthz")
            return True
        except TransportError:
            return False


class HttpClassifier(_HttpOracle):
    """Victim classifier behind ``POST /v1/classify``.

    Transparently splits calls into chunks of ``info().max_batch``; callers
    see one flat result list.
    """

    def classify(self, texts: Sequence[str]) -> list[LabelDistribution]:
        texts = list(texts)
        if not texts:
            return []
        max_batch = self.info().max_batch
        out: list[LabelDistribution] = []
        for start in range(0, len(texts), max_batch):
            chunk = texts[start : start + max_batch]
            body = self._request("POST", "/v1/classify", {"texts": chunk})
            results = body.get("results")
            _require(isinstance(results, list), "classify: missing results list")
            _require(
                len(results) == len(chunk),
                f"classify: sent {len(chunk)} texts, got {len(results)} results",
            )
            for item in results:
                out.append(self._parse_distribution(item))
        return out

    @staticmethod
    def _parse_distribution(item: object) -> LabelDistribution:
        _require(isinstance(item, dict), "classify: result items must be objects")
        probs = item.get("probs")
        labels = item.get("labels")
        _require(
            isinstance(probs, list)
            and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs),
            "classify: probs must be a list of numbers",
        )
        _require(
            isinstance(labels, list) and all(isinstance(x, str) for x in labels),
            "classify: labels must be a list of strings",
        )
        # LabelDistribution re-checks lengths, range, and the sum-to-1 rule.
        return LabelDistribution(labels=tuple(labels), probs=tuple(float(p) for p in probs))


class HttpMaskedLM(_HttpOracle):
    """Masked LM behind ``POST /v1/fill-mask``.

    The request carries the fully rendered masked text plus the ordinal of
    the mask literal within it (0 for the first occurrence), so the server
    needs no segmentation agreement with the client.  ``original_token``
    lets the server drop the in-place token from its candidate list; clients
    must not rely on it, so results are re-filtered here either way.
    """

    def fill_mask(self, seg: SegmentedText, index: int, k: int) -> list[MaskPrediction]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        raw = self.fill_mask_raw(seg, index, k)
        return clean_predictions(raw, seg.units[index].token, k)

    def fill_mask_raw(
        self, seg: SegmentedText, index: int, k: int
    ) -> list[tuple[str, float]]:
        """Candidates exactly as the server sent them (probe / debugging)."""
        mask_literal = self.info().mask_literal
        if not mask_literal:
            raise ProtocolError("fill-mask: server info() declares no mask_literal")
        # The ordinal counts mask-literal occurrences strictly before ours,
        # which covers texts that already contain the literal.
        prefix = "".join(
            u.leading_delims + u.token for u in seg.units[:index]
        ) + seg.units[index].leading_delims
        payload = {
            "text_with_mask": substitute(seg, index, mask_literal, validate=False),
            "mask_token_index": prefix.count(mask_literal),
            "top_k": k,
            "original_token": seg.units[index].token,
        }
        body = self._request("POST", "/v1/fill-mask", payload)
        candidates = body.get("candidates")
        _require(isinstance(candidates, list), "fill-mask: missing candidates list")
        out: list[tuple[str, float]] = []
        for item in candidates:
            _require(isinstance(item, dict), "fill-mask: candidate items must be objects")
            token = item.get("token")
            score = item.get("score")
            _require(isinstance(token, str), "fill-mask: candidate token must be a string")
            _require(
                isinstance(score, (int, float)) and not isinstance(score, bool),
                "fill-mask: candidate score must be a number",
            )
            if out and score > out[-1][1]:
                raise ProtocolError("fill-mask: candidate scores increase with rank")
            out.append((token, float(score)))
        return out
