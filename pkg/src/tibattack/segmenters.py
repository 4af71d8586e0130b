"""Pluggable word-boundary providers for word-granularity segmentation.

A word segmenter maps a text to byte-offset spans, one per word, leaving
delimiters in the gaps.  External tools can be adapted to the same
``word_spans`` shape; two built-ins ship here: a greedy longest-match
lexicon segmenter and a degenerate one-syllable-per-word fallback.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

from tibattack.tibetan import TSHEG, normalize, segment_syllables


@runtime_checkable
class WordSegmenter(Protocol):
    def word_spans(self, text: str) -> Sequence[tuple[int, int]]:
        """Byte (start, end) ranges into ``text.encode('utf-8')``, one per word."""
        ...


class SyllableFallbackSegmenter:
    """Degenerate segmenter: every syllable is its own word."""

    def word_spans(self, text: str) -> list[tuple[int, int]]:
        return [u.span for u in segment_syllables(text).units]


class LexiconSegmenter:
    """Greedy longest-match over a lexicon of multi-syllable words.

    Scans syllables left to right; at each position the longest lexicon entry
    matching the upcoming syllables wins, provided those syllables are joined
    by plain single Tshegs (a shad or whitespace always breaks a word).
    Syllables not starting any entry fall through as one-syllable words.
    """

    def __init__(self, words: Iterable[str]):
        self._entries: set[tuple[str, ...]] = set()
        self._max_len = 1
        for word in words:
            syllables = tuple(s for s in normalize(word).split(TSHEG) if s)
            if len(syllables) < 2:
                continue  # one-syllable entries add nothing over the fallback
            self._entries.add(syllables)
            self._max_len = max(self._max_len, len(syllables))

    @classmethod
    def from_file(cls, path: str | Path) -> "LexiconSegmenter":
        """Load a lexicon file: UTF-8, one word per line."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines if line.strip())

    def __len__(self) -> int:
        return len(self._entries)

    def word_spans(self, text: str) -> list[tuple[int, int]]:
        units = segment_syllables(text).units
        spans: list[tuple[int, int]] = []
        i = 0
        n = len(units)
        while i < n:
            matched = 1
            for length in range(min(self._max_len, n - i), 1, -1):
                group = units[i : i + length]
                if any(u.leading_delims != TSHEG for u in group[1:]):
                    continue
                if tuple(u.token for u in group) in self._entries:
                    matched = length
                    break
            spans.append((units[i].span[0], units[i + matched - 1].span[1]))
            i += matched
        return spans
