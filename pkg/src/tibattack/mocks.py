"""Deterministic in-process oracles for tests, development and benchmarks.

Both mocks are pure, table-driven functions of their inputs: identical
inputs give identical outputs across processes, and their outputs have
simple closed forms that tests can recompute by hand.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from tibattack.oracle import LabelDistribution, MaskPrediction, OracleInfo
from tibattack.tibetan import Granularity, SegmentedText, segment_syllables


class UnigramClassifier:
    """Marker-counting classifier with add-one smoothing.

    P(label) = (count(label markers in text) + 1) / (total marker count + #labels).
    Empty or marker-free text therefore yields a uniform distribution.
    Counting is over syllable tokens, so substituting any syllable of a
    marker removes its vote regardless of attack granularity.
    """

    def __init__(
        self,
        labels: Sequence[str],
        markers: Mapping[str, Iterable[str]],
        *,
        model_id: str = "mock-unigram",
        unk_literal: str = "[UNK]",
        max_batch: int = 64,
    ):
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels) or not self.labels:
            raise ValueError("labels must be non-empty and unique")
        self.markers = {label: frozenset(markers.get(label, ())) for label in self.labels}
        claimed: set[str] = set()
        for tokens in self.markers.values():
            if claimed & tokens:
                raise ValueError("a marker syllable may belong to only one label")
            claimed |= tokens
        self._info = OracleInfo(
            model_id=model_id,
            unk_literal=unk_literal,
            max_batch=max_batch,
            labels=self.labels,
        )

    def classify(self, texts: Sequence[str]) -> list[LabelDistribution]:
        return [self._classify_one(t) for t in texts]

    def _classify_one(self, text: str) -> LabelDistribution:
        tokens = [u.token for u in segment_syllables(text).units]
        counts = [sum(1 for t in tokens if t in self.markers[label]) for label in self.labels]
        denom = sum(counts) + len(self.labels)
        return LabelDistribution(
            labels=self.labels,
            probs=tuple((c + 1) / denom for c in counts),
        )

    def info(self) -> OracleInfo:
        return self._info


class TableMaskedLM:
    """Context-independent masked LM backed by a fixed token-weight table.

    ``fill_mask`` returns the table's tokens in descending weight order
    (ties broken lexicographically), excluding the original token, truncated
    to k.  Scores are the weights normalized into probabilities.
    """

    def __init__(
        self,
        table: Mapping[str, float],
        granularity: Granularity = Granularity.SYLLABLE,
        *,
        model_id: str = "mock-table-lm",
        mask_literal: str = "[MASK]",
        max_batch: int = 64,
    ):
        if not table:
            raise ValueError("weight table must be non-empty")
        total = float(sum(table.values()))
        if total <= 0 or any(w <= 0 for w in table.values()):
            raise ValueError("weights must be positive")
        self._ranked = tuple(
            (token, weight / total)
            for token, weight in sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
        )
        self.granularity = Granularity(granularity)
        self._info = OracleInfo(
            model_id=model_id,
            max_batch=max_batch,
            mask_literal=mask_literal,
            granularity=self.granularity.value,
        )

    def fill_mask(self, seg: SegmentedText, index: int, k: int) -> list[MaskPrediction]:
        if not 0 <= index < len(seg.units):
            raise IndexError(f"unit index {index} out of range")
        if k < 1:
            raise ValueError("k must be >= 1")
        original = seg.units[index].token
        out: list[MaskPrediction] = []
        for token, prob in self._ranked:
            if token == original:
                continue
            out.append(MaskPrediction(token=token, score=prob, rank=len(out)))
            if len(out) == k:
                break
        return out

    def info(self) -> OracleInfo:
        return self._info
