"""Random-substitution baseline: same moves as the engine, no guidance.

Positions are visited in a seeded-shuffled order and each receives a
uniformly drawn candidate from the same filtered masked-LM list the engine
sees.  Substitutions accumulate and the text is re-classified after each,
with the engine's stopping rules (flip, exhaustion, substitution cap, query
budget).  Everything the engine spends on saliency and candidate scoring is
skipped, so any effectiveness gap against this baseline is attributable to
the ordering and selection logic, not to the substitution mechanics.
"""

from __future__ import annotations

import random
import zlib
from typing import Callable

from tibattack.attack import (
    AttackConfig,
    AttackOutcome,
    AttackStatus,
    BudgetExhausted,
    _engine_filter,
    _MeteredClassifier,
    segment_for_attack,
)
from tibattack.oracle import Classifier, MaskedLM, OracleError
from tibattack.segmenters import WordSegmenter
from tibattack.tibetan import levenshtein, substitute_many


def random_attack(
    text: str,
    classifier: Classifier,
    masked_lm: MaskedLM,
    config: AttackConfig,
    *,
    seed: int,
    segmenter: WordSegmenter | None = None,
) -> AttackOutcome:
    """Attack one text with random position order and candidate choice."""
    rng = random.Random(seed)
    seg = segment_for_attack(text, config.granularity, segmenter)
    if not seg.units:
        return AttackOutcome(status=AttackStatus.SKIPPED, original_text=seg.original)

    meter = _MeteredClassifier(classifier, config.query_budget)
    outcome = AttackOutcome(status=AttackStatus.FAILURE, original_text=seg.original)
    try:
        dist0 = meter.classify([seg.original])[0]
        y = dist0.top_label()
        outcome.original_label = y

        order = list(range(len(seg.units)))
        rng.shuffle(order)

        applied: dict[int, str] = {}
        for index in order:
            if (
                config.max_substitutions is not None
                and len(applied) >= config.max_substitutions
            ):
                break
            candidates = _engine_filter(
                masked_lm.fill_mask(seg, index, config.k), seg, index
            )
            outcome.mlm_calls += 1
            if not candidates:
                continue
            choice = rng.choice(candidates)
            applied[index] = choice.token
            outcome.substitutions_applied.append(
                (index, seg.units[index].token, choice.token)
            )
            adversarial = substitute_many(seg, applied, validate=False)
            dist = meter.classify([adversarial])[0]
            if dist.top_label() != y:
                outcome.status = AttackStatus.SUCCESS
                outcome.adversarial_text = adversarial
                outcome.adversarial_label = dist.top_label()
                outcome.ld = levenshtein(seg.original, adversarial)
                break
        outcome.queries_used = meter.used
        return outcome
    except BudgetExhausted:
        outcome.status = AttackStatus.FAILURE
        outcome.queries_used = meter.used
        return outcome
    except OracleError as exc:
        return AttackOutcome(
            status=AttackStatus.ERROR,
            original_text=seg.original,
            queries_used=meter.used,
            error=f"{type(exc).__name__}: {exc}",
        )


def baseline_attack_fn(base_seed: int) -> Callable[..., AttackOutcome]:
    """Per-text deterministic wrapper for campaign use.

    Each text draws its own RNG stream from the base seed and the text
    itself, so outcomes do not depend on sample order or parallelism.
    """

    def run(text, classifier, masked_lm, config, *, segmenter=None):
        seed = base_seed ^ zlib.crc32(text.encode("utf-8"))
        return random_attack(
            text, classifier, masked_lm, config, seed=seed, segmenter=segmenter
        )

    return run
