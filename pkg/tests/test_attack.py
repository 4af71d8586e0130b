import math

import pytest

from tibattack.attack import (
    AttackConfig,
    AttackStatus,
    EmptyInputError,
    attack,
    best_substitution,
    compute_saliency,
    score_positions,
)
from tibattack.mocks import TableMaskedLM, UnigramClassifier
from tibattack.oracle import MaskPrediction, ModelError
from tibattack.tibetan import TSHEG, segment_syllables

KA = "ཀ"
KHA = "ཁ"
GA = "ག"
NGA = "ང"


def tib(*syllables):
    return TSHEG.join(syllables)


@pytest.fixture
def classifier():
    # P(label) = (marker count + 1) / (total markers + 2); closed form used
    # throughout for hand-computed expectations.
    return UnigramClassifier(labels=("neg", "pos"), markers={"neg": {NGA}, "pos": {KA}})


@pytest.fixture
def lm():
    return TableMaskedLM({NGA: 6.0, KHA: 4.0})


class TestComputeSaliency:
    def test_hand_computed_drop(self, classifier):
        # Text KA KA NGA: P(pos|x) = 3/5.  Masking a KA gives 2/4, masking
        # the NGA gives 3/4, so saliencies are [0.1, 0.1, -0.15].
        seg = segment_syllables(tib(KA, KA, NGA))
        sals = compute_saliency(seg, classifier, "pos", 0.6)
        assert sals == pytest.approx([0.1, 0.1, -0.15])

    def test_position_without_influence_has_zero_saliency(self, classifier):
        # KHA is no label's marker, so masking it moves nothing.
        seg = segment_syllables(tib(KA, KHA))
        sals = compute_saliency(seg, classifier, "pos", 2 / 3)
        assert sals[1] == pytest.approx(0.0)

    def test_single_unit_text(self, classifier):
        seg = segment_syllables(KA)
        sals = compute_saliency(seg, classifier, "pos", 2 / 3)
        assert len(sals) == 1


class TestBestSubstitution:
    def test_singleton_candidate(self, classifier):
        seg = segment_syllables(tib(KA, KA, NGA))
        token, gain = best_substitution(
            seg, 0, [MaskPrediction(KHA, 1.0, 0)], classifier, "pos", 0.6
        )
        # KHA KA NGA: P(pos) = 2/4, so the drop is 0.1.
        assert token == KHA
        assert gain == pytest.approx(0.1)

    def test_argmax_over_two_candidates(self, classifier):
        # NGA drops P(pos) from 0.6 to 0.4; KHA only to 0.5.
        seg = segment_syllables(tib(KA, KA, NGA))
        cands = [MaskPrediction(NGA, 0.6, 0), MaskPrediction(KHA, 0.4, 1)]
        token, gain = best_substitution(seg, 0, cands, classifier, "pos", 0.6)
        assert token == NGA
        assert gain == pytest.approx(0.2)

    def test_tie_breaks_by_lower_rank(self, classifier):
        # Two neutral candidates produce identical drops.
        seg = segment_syllables(tib(KA, KA, NGA))
        cands = [MaskPrediction(KHA, 0.6, 0), MaskPrediction(GA, 0.4, 1)]
        token, _ = best_substitution(seg, 0, cands, classifier, "pos", 0.6)
        assert token == KHA

    def test_empty_candidate_set(self, classifier):
        seg = segment_syllables(KA)
        assert best_substitution(seg, 0, [], classifier, "pos", 2 / 3) is None


class TestScorePositions:
    def test_uniform_saliencies_split_gain_evenly(self):
        assert score_positions([2.0, 2.0, 2.0], [0.9, 0.9, 0.9]) == pytest.approx(
            [0.3, 0.3, 0.3]
        )

    def test_log_weights(self):
        # softmax([ln 1, ln 2]) = [1/3, 2/3].
        assert score_positions([math.log(1), math.log(2)], [1.0, 1.0]) == pytest.approx(
            [1 / 3, 2 / 3]
        )

    def test_weights_sum_to_one(self):
        h = score_positions([-3.0, 0.5, 11.0, 2.2], [1.0, 1.0, 1.0, 1.0])
        assert math.fsum(h) == pytest.approx(1.0, abs=1e-9)

    def test_stable_under_huge_spread(self):
        h = score_positions([0.0, 800.0], [1.0, 1.0])
        assert math.fsum(h) == pytest.approx(1.0, abs=1e-9)
        assert all(math.isfinite(x) for x in h)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            score_positions([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score_positions([1.0], [1.0, 2.0])


class TestAttack:
    def test_two_substitution_flip(self, classifier, lm):
        # KA KA KA: P(pos)=4/5.  Each position's best substitution is NGA
        # (drop 0.2); H ties everywhere so positions apply left to right.
        # One NGA leaves pos ahead (3/5); the second flips to neg (2/5).
        outcome = attack(tib(KA, KA, KA), classifier, lm, AttackConfig())
        assert outcome.status is AttackStatus.SUCCESS
        assert outcome.original_label == "pos"
        assert outcome.adversarial_label == "neg"
        assert outcome.substitutions_applied == [(0, KA, NGA), (1, KA, NGA)]
        assert outcome.adversarial_text == tib(NGA, NGA, KA)
        assert outcome.ld == 2
        # 1 original + 3 saliency + 6 candidate evaluations + 2 flip checks.
        assert outcome.queries_used == 12
        assert outcome.mlm_calls == 3

    def test_single_substitution_flip_uses_most_salient_position(self, classifier, lm):
        # KA KA NGA: positions 0/1 share the top score; position 0 applies
        # first and already flips the prediction.
        outcome = attack(tib(KA, KA, NGA), classifier, lm, AttackConfig())
        assert outcome.status is AttackStatus.SUCCESS
        assert outcome.substitutions_applied == [(0, KA, NGA)]
        assert outcome.adversarial_text == tib(NGA, KA, NGA)
        assert outcome.ld == 1
        assert outcome.queries_used == 10

    def test_budget_of_one_only_fits_the_original_classification(self, classifier, lm):
        outcome = attack(tib(KA, KA), classifier, lm, AttackConfig(query_budget=1))
        assert outcome.status is AttackStatus.FAILURE
        assert outcome.queries_used == 1

    def test_budget_exhausted_mid_scoring(self, classifier, lm):
        # 1 + 3 saliency queries fit exactly; candidate scoring does not.
        outcome = attack(tib(KA, KA, KA), classifier, lm, AttackConfig(query_budget=4))
        assert outcome.status is AttackStatus.FAILURE
        assert outcome.queries_used == 4
        assert outcome.substitutions_applied == []

    def test_empty_candidate_lists_fail_with_zero_substitutions(self, classifier):
        lm = TableMaskedLM({KA: 1.0})  # only ever predicts the original token
        outcome = attack(tib(KA, KA), classifier, lm, AttackConfig())
        assert outcome.status is AttackStatus.FAILURE
        assert outcome.substitutions_applied == []
        assert outcome.adversarial_text is None
        assert outcome.ld is None

    def test_skipped_when_no_units(self, classifier, lm):
        outcome = attack(TSHEG + " ", classifier, lm, AttackConfig())
        assert outcome.status is AttackStatus.SKIPPED
        assert outcome.queries_used == 0

    def test_isolated_substitutions_flag(self, classifier, lm):
        # Cumulative mode needs two NGAs to flip KA KA KA; isolated trials
        # of one substitution each never flip.
        config = AttackConfig(isolated_substitutions=True)
        outcome = attack(tib(KA, KA, KA), classifier, lm, config)
        assert outcome.status is AttackStatus.FAILURE
        assert outcome.substitutions_applied == []

    def test_max_substitutions_cap(self, classifier, lm):
        config = AttackConfig(max_substitutions=1)
        outcome = attack(tib(KA, KA, KA), classifier, lm, config)
        assert outcome.status is AttackStatus.FAILURE
        assert len(outcome.substitutions_applied) == 1

    def test_skip_nonpositive_gain_prunes_positions(self, classifier, lm):
        # Unit 0 (NGA) can only be replaced by KHA, which raises P(pos):
        # a nonpositive gain, pruned only when the flag is set.
        text = tib(NGA, KA, KA)
        keep = attack(text, classifier, lm, AttackConfig())
        prune = attack(text, classifier, lm, AttackConfig(skip_nonpositive_gain=True))
        assert keep.status is AttackStatus.SUCCESS
        assert prune.status is AttackStatus.SUCCESS
        kept_indices = {i for i, _, _ in keep.substitutions_applied}
        assert 0 not in {i for i, _, _ in prune.substitutions_applied}
        assert prune.queries_used < keep.queries_used or 0 not in kept_indices

    def test_oracle_error_yields_error_outcome(self, lm, classifier):
        class Flaky:
            def __init__(self, inner):
                self.inner = inner
                self.calls = 0

            def classify(self, texts):
                self.calls += 1
                if self.calls > 1:
                    raise ModelError("backend fell over")
                return self.inner.classify(texts)

            def info(self):
                return self.inner.info()

        outcome = attack(tib(KA, KA), Flaky(classifier), lm, AttackConfig())
        assert outcome.status is AttackStatus.ERROR
        assert "backend fell over" in outcome.error
        assert outcome.substitutions_applied == []
        assert outcome.adversarial_text is None

    def test_deterministic(self, classifier, lm):
        config = AttackConfig()
        first = attack(tib(KA, KA, NGA), classifier, lm, config)
        second = attack(tib(KA, KA, NGA), classifier, lm, config)
        assert first == second

    def test_success_is_verified_against_full_adversarial_text(self, classifier, lm):
        outcome = attack(tib(KA, KA, KA), classifier, lm, AttackConfig())
        [dist] = classifier.classify([outcome.adversarial_text])
        assert dist.top_label() == outcome.adversarial_label
        assert dist.top_label() != outcome.original_label
