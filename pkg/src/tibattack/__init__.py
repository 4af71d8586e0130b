"""Black-box adversarial attack engine for Tibetan text classifiers.

Generates candidate substitutions with a masked language model, orders
attack positions by probability-weighted saliency, and greedily substitutes
syllables or words until the victim classifier changes its prediction.
"""

__version__ = "0.1.0"

from tibattack.attack import AttackConfig, AttackOutcome, AttackStatus, attack
from tibattack.campaign import CampaignReport, Sample, run_campaign
from tibattack.tibetan import (
    Granularity,
    SegmentedText,
    levenshtein,
    reconstruct,
    segment_syllables,
    segment_words,
    substitute,
)

__all__ = [
    "AttackConfig",
    "AttackOutcome",
    "AttackStatus",
    "CampaignReport",
    "Granularity",
    "Sample",
    "SegmentedText",
    "attack",
    "levenshtein",
    "reconstruct",
    "run_campaign",
    "segment_syllables",
    "segment_words",
    "substitute",
]
