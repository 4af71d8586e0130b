"""Self-contained synthetic benchmark: rigged oracles plus a labeled corpus.

Every syllable is a single Tibetan consonant that survives NFC unchanged,
so letter-level edit distances equal substitution counts at syllable
granularity.  Texts mix each label's marker syllables with neutral filler;
about a tenth get their marker balance inverted so the victim classifier
mispredicts them, which keeps pre-attack accuracy below 1 and exercises the
attack-the-prediction (not the gold label) rule.  The masked-LM tables
offer neutral fillers at the top ranks and both labels' markers below, so
picking candidates by rank alone is a bad strategy and drop-maximizing
selection has something to find.

Everything is derived from one seeded RNG: same seed, same corpus, same
metrics, across processes and platforms.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from tibattack.campaign import Sample
from tibattack.mocks import TableMaskedLM, UnigramClassifier
from tibattack.tibetan import TSHEG, Granularity

SHAD = "།"

# Tibetan consonants that are single scalars in NFC (no decomposables).
_CONSONANTS = "ཀཁགངཅཆཇཉཊཋཌཎཏཐདནཔཕ"

LABELS = ("neg", "pos")
NEG_MARKERS = tuple(_CONSONANTS[0:4])
POS_MARKERS = tuple(_CONSONANTS[4:8])
NEUTRALS = tuple(_CONSONANTS[8:18])

_MARKERS = {"neg": NEG_MARKERS, "pos": POS_MARKERS}

# Two-syllable lexicon entries: marker pairs per label plus neutral pairs.
LEXICON_WORDS = (
    TSHEG.join(NEG_MARKERS[0:2]),
    TSHEG.join(NEG_MARKERS[2:4]),
    TSHEG.join(POS_MARKERS[0:2]),
    TSHEG.join(POS_MARKERS[2:4]),
    TSHEG.join(NEUTRALS[0:2]),
    TSHEG.join(NEUTRALS[2:4]),
)

DEFAULT_SEED = 31901


@dataclass(frozen=True)
class Benchmark:
    samples: tuple[Sample, ...]
    classifier: UnigramClassifier
    syllable_lm: TableMaskedLM
    word_lm: TableMaskedLM
    lexicon: tuple[str, ...]


def _syllable_table() -> dict[str, float]:
    # Neutrals outrank markers; strictly distinct weights pin the ranking.
    table: dict[str, float] = {}
    for i, syl in enumerate(NEUTRALS):
        table[syl] = 100.0 - i
    for i, syl in enumerate(NEG_MARKERS + POS_MARKERS):
        table[syl] = 50.0 - i
    return table


def _word_table() -> dict[str, float]:
    table: dict[str, float] = {}
    for i, syl in enumerate(NEUTRALS[4:8]):
        table[syl] = 100.0 - i
    for i, word in enumerate(LEXICON_WORDS):
        table[word] = 50.0 - i
    return table


def make_benchmark(n_samples: int = 200, seed: int = DEFAULT_SEED) -> Benchmark:
    rng = random.Random(seed)
    samples = []
    for i in range(n_samples):
        gold = rng.choice(LABELS)
        other = LABELS[1 - LABELS.index(gold)]
        n_own = rng.randint(3, 6)
        n_cross = rng.randint(0, 2)
        if rng.random() < 0.1:
            # Mislabeled-looking sample: the victim will predict `other`.
            n_own, n_cross = n_cross, n_own
        length = rng.randint(9, 13)
        syllables = [rng.choice(_MARKERS[gold]) for _ in range(n_own)]
        syllables += [rng.choice(_MARKERS[other]) for _ in range(n_cross)]
        syllables += [rng.choice(NEUTRALS) for _ in range(max(0, length - len(syllables)))]
        rng.shuffle(syllables)
        if rng.random() < 0.5:
            # Plant one lexicon word so word segmentation finds real units.
            word = rng.choice(LEXICON_WORDS)
            at = rng.randint(0, len(syllables))
            syllables[at:at] = word.split(TSHEG)
        text = TSHEG.join(syllables)
        if rng.random() < 0.3:
            text += SHAD
        samples.append(Sample(id=f"bench-{i:04d}", text=text, gold_label=gold))

    return Benchmark(
        samples=tuple(samples),
        classifier=UnigramClassifier(labels=LABELS, markers=_MARKERS),
        syllable_lm=TableMaskedLM(_syllable_table(), Granularity.SYLLABLE),
        word_lm=TableMaskedLM(_word_table(), Granularity.WORD),
        lexicon=LEXICON_WORDS,
    )
