"""Model-oracle abstraction: victim classifier and masked LM contracts.

The attack engine is soft-label black-box: it sees full probability
distributions from the victim classifier and ranked token candidates from a
masked LM, but no gradients or internals.  Oracles may live in-process
(mocks) or behind the HTTP wire protocol (see ``http_client``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from tibattack.tibetan import SegmentedText, is_delimiter

PROB_SUM_TOL = 1e-6


class OracleError(Exception):
    """Base for oracle failures; aborts one attack sample, never a campaign."""


class TransportError(OracleError):
    """Connection or timeout failure reaching an oracle."""


class ProtocolError(OracleError):
    """Oracle response violates the wire contract (shape or normalization)."""


class ModelError(OracleError):
    """Server-reported model failure."""


@dataclass(frozen=True)
class LabelDistribution:
    """Classifier output: probabilities over an ordered label vocabulary.

    The argmax is deterministic: ties resolve to the lowest label id, i.e.
    the earliest position in the vocabulary.
    """

    labels: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probs) or not self.labels:
            raise ProtocolError("labels and probs must be equal-length and non-empty")
        if any(p < -PROB_SUM_TOL or p > 1 + PROB_SUM_TOL for p in self.probs):
            raise ProtocolError(f"probability outside [0, 1]: {self.probs}")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ProtocolError(f"probabilities sum to {total!r}, not 1")

    def top_index(self) -> int:
        best = 0
        for i in range(1, len(self.probs)):
            if self.probs[i] > self.probs[best]:
                best = i
        return best

    def top_label(self) -> str:
        return self.labels[self.top_index()]

    def prob_of(self, label: str) -> float:
        try:
            return self.probs[self.labels.index(label)]
        except ValueError:
            raise ProtocolError(f"label {label!r} missing from distribution") from None


@dataclass(frozen=True)
class MaskPrediction:
    """One masked-LM candidate: token text, model score, 0-based rank."""

    token: str
    score: float
    rank: int


@dataclass(frozen=True)
class OracleInfo:
    """Static oracle metadata, served by ``info()`` / ``GET /v1/info``."""

    model_id: str
    unk_literal: str = ""
    max_batch: int = 32
    labels: tuple[str, ...] | None = None
    mask_literal: str | None = None
    granularity: str | None = None


@runtime_checkable
class Classifier(Protocol):
    def classify(self, texts: Sequence[str]) -> list[LabelDistribution]: ...

    def info(self) -> OracleInfo: ...


@runtime_checkable
class MaskedLM(Protocol):
    def fill_mask(self, seg: SegmentedText, index: int, k: int) -> list[MaskPrediction]: ...

    def info(self) -> OracleInfo: ...


def strip_candidate(token: str) -> str:
    """Trim delimiters/whitespace from a candidate's edges.

    Masked LMs whose tokenizers keep the trailing Tsheg attached would
    otherwise never produce a valid bare token; delimiters are re-rendered
    from the original text, so edge delimiters carry no information.
    """
    start = 0
    end = len(token)
    while start < end and is_delimiter(token[start]):
        start += 1
    while end > start and is_delimiter(token[end - 1]):
        end -= 1
    return token[start:end]


def clean_predictions(
    raw: Sequence[tuple[str, float]], original_token: str, k: int
) -> list[MaskPrediction]:
    """Normalize a ranked (token, score) list into MaskPredictions.

    Applied at the oracle boundary for servers that cannot be trusted to
    filter: strips edge delimiters, drops empties, the original token, and
    duplicates (keeping the best-ranked occurrence), then re-ranks 0..n-1.
    Input order is model-rank order and is preserved.
    """
    out: list[MaskPrediction] = []
    seen: set[str] = set()
    for token, score in raw:
        token = strip_candidate(token)
        if not token or token == original_token or token in seen:
            continue
        seen.add(token)
        out.append(MaskPrediction(token=token, score=float(score), rank=len(out)))
        if len(out) == k:
            break
    return out
