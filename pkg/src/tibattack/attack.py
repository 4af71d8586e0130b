"""Core attack loop: saliency, best substitutions, weighted ordering, greedy flip.

One attack runs in two phases.  The scoring phase fixes the victim's label
y and P(y|x) on the original text, measures each unit's saliency (the
probability drop when the unit is replaced by the classifier's unknown
literal), and finds each unit's best substitution (the masked-LM candidate
maximizing the probability drop).  The substitution phase sorts positions
by softmax(saliency) * best-drop, then applies substitutions cumulatively
in that order, re-classifying after each, until the label flips or the
list or query budget runs out.  No label-flip check happens during
scoring.  The whole procedure is deterministic: every tie-break is pinned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from tibattack.oracle import Classifier, MaskedLM, MaskPrediction, OracleError
from tibattack.segmenters import SyllableFallbackSegmenter, WordSegmenter
from tibattack.tibetan import (
    Granularity,
    SegmentedText,
    is_valid_token,
    levenshtein,
    segment_syllables,
    segment_words,
    substitute,
    substitute_many,
)


class EmptyInputError(ValueError):
    """No position survived filtering, so there is nothing to score."""


class AttackStatus(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    SKIPPED = "skipped"
    ERROR = "error"


@dataclass(frozen=True)
class AttackConfig:
    """Knobs for one attack run.

    ``k`` bounds the candidate list requested per position.  The query
    budget counts victim-classifier calls only (one per text); masked-LM
    calls are tracked separately as telemetry.  ``skip_nonpositive_gain``
    prunes positions whose best substitution does not lower P(y|x) - an
    off-default optimization, since the faithful procedure keeps them.
    ``isolated_substitutions`` tries each substitution on the pristine text
    instead of accumulating earlier ones.
    """

    granularity: Granularity = Granularity.SYLLABLE
    k: int = 50
    query_budget: int | None = None
    skip_nonpositive_gain: bool = False
    max_substitutions: int | None = None
    isolated_substitutions: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.query_budget is not None and self.query_budget < 1:
            raise ValueError("query_budget must be >= 1 when set")
        if self.max_substitutions is not None and self.max_substitutions < 1:
            raise ValueError("max_substitutions must be >= 1 when set")


@dataclass(frozen=True)
class PositionPlan:
    """Per-position attack state after the scoring phase."""

    index: int
    best_token: str
    delta_p_star: float
    saliency: float
    score: float


@dataclass
class AttackOutcome:
    """Result of attacking one text."""

    status: AttackStatus
    original_text: str
    adversarial_text: str | None = None
    original_label: str | None = None
    adversarial_label: str | None = None
    substitutions_applied: list[tuple[int, str, str]] = field(default_factory=list)
    queries_used: int = 0
    mlm_calls: int = 0
    ld: int | None = None
    error: str | None = None


class BudgetExhausted(Exception):
    """Internal signal: the next classify call would exceed the query budget."""


class _MeteredClassifier:
    """Counts classifier queries (one per text) and enforces the budget.

    A batch is charged as if its texts were classified sequentially; a batch
    that cannot fully fit in the remaining budget is not sent at all, so
    ``used`` only ever counts calls actually made.
    """

    def __init__(self, classifier: Classifier, budget: int | None):
        self._classifier = classifier
        self._budget = budget
        self.used = 0

    def classify(self, texts: Sequence[str]):
        if self._budget is not None and self.used + len(texts) > self._budget:
            raise BudgetExhausted
        result = self._classifier.classify(texts)
        self.used += len(texts)
        return result

    def info(self):
        return self._classifier.info()


def compute_saliency(
    seg: SegmentedText, classifier: Classifier, y: str, p_orig: float
) -> list[float]:
    """Per-unit drop in P(y|x) when the unit is replaced by the unknown literal.

    Values may be negative: masking a unit can make the classifier more
    confident in y.
    """
    unk = classifier.info().unk_literal
    if not unk:
        raise ValueError("classifier declares no unknown-token literal")
    texts = [substitute(seg, i, unk, validate=False) for i in range(len(seg.units))]
    dists = classifier.classify(texts)
    return [p_orig - d.prob_of(y) for d in dists]


def best_substitution(
    seg: SegmentedText,
    index: int,
    candidates: Sequence[MaskPrediction],
    classifier: Classifier,
    y: str,
    p_orig: float,
) -> tuple[str, float] | None:
    """The candidate maximizing the drop p_orig - P(y|x') at one position.

    Candidates must already be validity-filtered and original-excluded.
    Ties go to the lower candidate rank.  Returns None for an empty set.
    """
    if not candidates:
        return None
    texts = [substitute(seg, index, c.token, validate=False) for c in candidates]
    dists = classifier.classify(texts)
    best: MaskPrediction | None = None
    best_drop = -math.inf
    for cand, dist in zip(candidates, dists):
        drop = p_orig - dist.prob_of(y)
        if best is None or drop > best_drop or (drop == best_drop and cand.rank < best.rank):
            best, best_drop = cand, drop
    return best.token, best_drop


def score_positions(saliencies: Sequence[float], gains: Sequence[float]) -> list[float]:
    """Softmax-normalized saliencies times best-substitution gains.

    Exponentials are max-shifted so arbitrarily spread saliencies stay
    finite; the softmax weights always sum to 1.
    """
    if len(saliencies) != len(gains):
        raise ValueError("saliencies and gains must have equal length")
    if not saliencies:
        raise EmptyInputError("no positions to score")
    peak = max(saliencies)
    exps = [math.exp(s - peak) for s in saliencies]
    z = math.fsum(exps)
    return [e / z * g for e, g in zip(exps, gains)]


def segment_for_attack(
    text: str, granularity: Granularity, segmenter: WordSegmenter | None = None
) -> SegmentedText:
    if granularity is Granularity.WORD:
        return segment_words(text, segmenter or SyllableFallbackSegmenter())
    return segment_syllables(text)


def attack(
    text: str,
    classifier: Classifier,
    masked_lm: MaskedLM,
    config: AttackConfig,
    *,
    segmenter: WordSegmenter | None = None,
) -> AttackOutcome:
    """Attack one text until the victim's prediction flips.

    The victim's own prediction on the original text is the label under
    attack, whether or not it matches any gold label.  A success outcome's
    adversarial label comes from classifying the full adversarial text, and
    its edit distance is measured letter-wise against the original.
    """
    seg = segment_for_attack(text, config.granularity, segmenter)
    if not seg.units:
        return AttackOutcome(status=AttackStatus.SKIPPED, original_text=seg.original)

    meter = _MeteredClassifier(classifier, config.query_budget)
    outcome = AttackOutcome(status=AttackStatus.FAILURE, original_text=seg.original)
    try:
        dist0 = meter.classify([seg.original])[0]
        y = dist0.top_label()
        p_orig = dist0.prob_of(y)
        outcome.original_label = y

        saliencies = compute_saliency(seg, meter, y, p_orig)

        picks: list[tuple[int, str, float]] = []  # (index, best token, delta P*)
        mlm_calls = 0
        for i in range(len(seg.units)):
            raw = masked_lm.fill_mask(seg, i, config.k)
            mlm_calls += 1
            candidates = _engine_filter(raw, seg, i)
            pick = best_substitution(seg, i, candidates, meter, y, p_orig)
            if pick is None:
                continue
            if config.skip_nonpositive_gain and pick[1] <= 0:
                continue
            picks.append((i, pick[0], pick[1]))
        outcome.mlm_calls = mlm_calls

        if not picks:
            outcome.queries_used = meter.used
            return outcome

        scores = score_positions([saliencies[i] for i, _, _ in picks], [g for _, _, g in picks])
        plans = [
            PositionPlan(index=i, best_token=tok, delta_p_star=gain, saliency=saliencies[i], score=h)
            for (i, tok, gain), h in zip(picks, scores)
        ]
        plans.sort(key=lambda p: (-p.score, -p.delta_p_star, p.index))

        applied: dict[int, str] = {}
        for plan in plans:
            if (
                config.max_substitutions is not None
                and len(outcome.substitutions_applied) >= config.max_substitutions
            ):
                break
            if config.isolated_substitutions:
                trial = {plan.index: plan.best_token}
                trail = [(plan.index, seg.units[plan.index].token, plan.best_token)]
            else:
                applied[plan.index] = plan.best_token
                trial = applied
                outcome.substitutions_applied.append(
                    (plan.index, seg.units[plan.index].token, plan.best_token)
                )
                trail = outcome.substitutions_applied
            adversarial = substitute_many(seg, trial, validate=False)
            dist = meter.classify([adversarial])[0]
            if dist.top_label() != y:
                outcome.status = AttackStatus.SUCCESS
                outcome.adversarial_text = adversarial
                outcome.adversarial_label = dist.top_label()
                outcome.substitutions_applied = list(trail)
                outcome.ld = levenshtein(seg.original, adversarial)
                break
        if config.isolated_substitutions and outcome.status is not AttackStatus.SUCCESS:
            outcome.substitutions_applied = []
        outcome.queries_used = meter.used
        return outcome
    except BudgetExhausted:
        outcome.status = AttackStatus.FAILURE
        outcome.queries_used = meter.used
        return outcome
    except OracleError as exc:
        # Partial progress is discarded; only the spent query count survives.
        return AttackOutcome(
            status=AttackStatus.ERROR,
            original_text=seg.original,
            queries_used=meter.used,
            error=f"{type(exc).__name__}: {exc}",
        )


def _engine_filter(
    raw: Sequence[MaskPrediction], seg: SegmentedText, index: int
) -> list[MaskPrediction]:
    """Engine-side candidate hygiene; the oracle is not trusted to filter.

    Drops the original token, invalid tokens, and duplicates (keeping the
    best rank), preserving model-rank order.
    """
    original = seg.units[index].token
    out: list[MaskPrediction] = []
    seen: set[str] = set()
    for cand in sorted(raw, key=lambda c: c.rank):
        if cand.token == original or cand.token in seen:
            continue
        if not is_valid_token(cand.token, seg.granularity):
            continue
        seen.add(cand.token)
        out.append(cand)
    return out
