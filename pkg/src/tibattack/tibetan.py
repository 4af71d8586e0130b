"""Unicode-correct Tibetan text segmentation, substitution and edit distance.

Tibetan script stacks 30 consonant and 4 vowel letters into syllables,
and joins one or more syllables into words with the Tsheg separator
(U+0F0B).  This module decomposes a text into an ordered list of units
(syllables or words) while preserving every delimiter byte, so that the
original string can always be reconstructed exactly and a single unit can
be swapped without disturbing anything around it.

All inputs are normalized to NFC once at ingestion; spans and distances
refer to the normalized string.  Tibetan vowel signs have canonical
composition variants (e.g. U+0F73 decomposes to U+0F71 U+0F72), and
pinning one canonical form keeps spans and edit distances stable.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

TSHEG = "་"

# Delimiters for syllable segmentation: the Tsheg (U+0F0B), the Tsheg/shad
# family up to U+0F14, and any ASCII or Unicode whitespace.
_DELIM_LO = 0x0F0B
_DELIM_HI = 0x0F14
_TIB_LO = 0x0F00
_TIB_HI = 0x0FFF

# Sub-token continuation markers and special-token sentinels that masked-LM
# tokenizers commonly emit; candidates containing any of these are rejected.
DEFAULT_DENYLIST: tuple[str, ...] = (
    "##",
    "▁",  # SentencePiece word-start marker
    "[UNK]",
    "[MASK]",
    "[PAD]",
    "[CLS]",
    "[SEP]",
    "<unk>",
    "<mask>",
    "<pad>",
    "<s>",
    "</s>",
)


class Granularity(str, Enum):
    """Attack granularity: one unit is either a syllable or a word."""

    SYLLABLE = "syllable"
    WORD = "word"


class SegmenterError(ValueError):
    """A pluggable word segmenter returned an invalid partition."""


class InvalidReplacementError(ValueError):
    """Replacement token fails validity rules for the segmentation granularity."""


def is_delimiter(ch: str) -> bool:
    """True for the Tsheg/shad delimiter family and for whitespace."""
    code = ord(ch)
    return _DELIM_LO <= code <= _DELIM_HI or ch.isspace()


def normalize(text: str) -> str:
    """Canonical composed form used for all segmentation and distances."""
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class TextUnit:
    """One syllable or word, with the delimiters that preceded it.

    ``span`` is the (start, end) byte range of ``token`` in the UTF-8
    encoding of the normalized original text.  ``leading_delims`` holds the
    delimiter run between the previous unit and this one, so that
    concatenating ``leading_delims + token`` over all units (plus the
    segmentation's trailing delimiters) reproduces the original exactly.
    """

    token: str
    kind: Granularity
    span: tuple[int, int]
    leading_delims: str = ""


@dataclass(frozen=True)
class SegmentedText:
    """A text decomposed into ordered units plus preserved delimiters."""

    original: str
    units: tuple[TextUnit, ...]
    trailing_delims: str
    granularity: Granularity

    def tokens(self) -> list[str]:
        return [u.token for u in self.units]


def segment_syllables(text: str) -> SegmentedText:
    """Split a text into syllables on the Tsheg/shad/whitespace delimiters.

    Units are maximal runs of non-delimiter scalar values.  Text with no
    non-delimiter content yields an empty unit list with everything in
    ``trailing_delims``.
    """
    norm = normalize(text)
    units: list[TextUnit] = []
    pending: list[str] = []  # delimiter run before the next unit
    token: list[str] = []
    token_start = 0
    byte_pos = 0

    def close_token(end: int) -> None:
        units.append(
            TextUnit(
                token="".join(token),
                kind=Granularity.SYLLABLE,
                span=(token_start, end),
                leading_delims="".join(pending),
            )
        )
        token.clear()
        pending.clear()

    for ch in norm:
        width = len(ch.encode("utf-8"))
        if is_delimiter(ch):
            if token:
                close_token(byte_pos)
            pending.append(ch)
        else:
            if not token:
                token_start = byte_pos
            token.append(ch)
        byte_pos += width
    if token:
        close_token(byte_pos)

    return SegmentedText(
        original=norm,
        units=tuple(units),
        trailing_delims="".join(pending),
        granularity=Granularity.SYLLABLE,
    )


def segment_words(text: str, segmenter) -> SegmentedText:
    """Split a text into words using a pluggable boundary provider.

    ``segmenter`` must expose ``word_spans(text) -> sequence of (start, end)``
    byte ranges into the UTF-8 encoding of the normalized text, one range per
    word, in order.  Ranges must not overlap, must not split a Unicode scalar,
    must cover every non-delimiter scalar, and may retain internal Tshegs
    (multi-syllable words).  Violations raise :class:`SegmenterError`, which
    signals a defective plugin rather than bad input text.
    """
    norm = normalize(text)
    data = norm.encode("utf-8")
    spans = [(int(s), int(e)) for s, e in segmenter.word_spans(norm)]

    def decode(lo: int, hi: int, what: str) -> str:
        try:
            return data[lo:hi].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SegmenterError(f"{what} [{lo}:{hi}) splits a Unicode scalar") from exc

    units: list[TextUnit] = []
    prev_end = 0
    for start, end in spans:
        if start >= end:
            raise SegmenterError(f"empty or inverted word span [{start}:{end})")
        if start < prev_end:
            raise SegmenterError(f"overlapping word span [{start}:{end})")
        if end > len(data):
            raise SegmenterError(f"word span [{start}:{end}) exceeds text length")
        gap = decode(prev_end, start, "delimiter gap")
        if any(not is_delimiter(c) for c in gap):
            raise SegmenterError(f"non-delimiter content left uncovered before byte {start}")
        word = decode(start, end, "word span")
        if is_delimiter(word[0]) or is_delimiter(word[-1]):
            raise SegmenterError(f"word span [{start}:{end}) starts or ends on a delimiter")
        for ch in word:
            if is_delimiter(ch) and ch != TSHEG:
                raise SegmenterError(
                    f"word span [{start}:{end}) contains a non-Tsheg delimiter"
                )
        units.append(
            TextUnit(
                token=word,
                kind=Granularity.WORD,
                span=(start, end),
                leading_delims=gap,
            )
        )
        prev_end = end

    trailing = decode(prev_end, len(data), "trailing gap")
    if any(not is_delimiter(c) for c in trailing):
        raise SegmenterError("non-delimiter content left uncovered at end of text")

    return SegmentedText(
        original=norm,
        units=tuple(units),
        trailing_delims=trailing,
        granularity=Granularity.WORD,
    )


def reconstruct(seg: SegmentedText) -> str:
    """Inverse of segmentation: delimiters and tokens in original order."""
    parts = [u.leading_delims + u.token for u in seg.units]
    parts.append(seg.trailing_delims)
    return "".join(parts)


def substitute(seg: SegmentedText, index: int, replacement: str, *, validate: bool = True) -> str:
    """Return the text with unit ``index``'s token replaced.

    Delimiters and every other token are untouched; ``seg`` itself is never
    mutated.  ``validate=False`` bypasses token validity checks, which is
    needed when planting a classifier's unknown-token literal.
    """
    return substitute_many(seg, {index: replacement}, validate=validate)


def substitute_many(
    seg: SegmentedText, replacements: Mapping[int, str], *, validate: bool = True
) -> str:
    """Apply several token replacements at once and reconstruct the text."""
    n = len(seg.units)
    for index in replacements:
        if not 0 <= index < n:
            raise IndexError(f"unit index {index} out of range for {n} units")
    if validate:
        for index, repl in replacements.items():
            if not is_valid_token(repl, seg.granularity):
                raise InvalidReplacementError(
                    f"replacement {repl!r} is not a valid {seg.granularity.value} token"
                )
    parts = []
    for i, unit in enumerate(seg.units):
        parts.append(unit.leading_delims + replacements.get(i, unit.token))
    parts.append(seg.trailing_delims)
    return "".join(parts)


def is_valid_token(
    candidate: str,
    granularity: Granularity,
    deny: Iterable[str] = DEFAULT_DENYLIST,
) -> bool:
    """Whether a candidate string may stand in as one syllable or word.

    Valid tokens are non-empty, free of tokenizer continuation markers and
    special-token sentinels, and composed entirely of Tibetan-block letters,
    combining marks or digits.  Delimiter and punctuation codepoints are
    rejected, except that word-granularity tokens may carry internal Tshegs
    between their syllables.
    """
    if not candidate:
        return False
    for marker in deny:
        if marker in candidate:
            return False
    last = len(candidate) - 1
    for pos, ch in enumerate(candidate):
        code = ord(ch)
        if not _TIB_LO <= code <= _TIB_HI:
            return False
        if ch == TSHEG and granularity is Granularity.WORD and 0 < pos < last:
            continue
        if _DELIM_LO <= code <= _DELIM_HI:
            return False
        if unicodedata.category(ch)[0] not in ("L", "M", "N"):
            return False
    return True


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-letter edits turning ``a`` into ``b``.

    Letters are Unicode scalar values; each Tibetan letter has its own
    codepoint, so this counts letter-level insertions, deletions and
    substitutions.  Two-row dynamic programming, O(len(a)*len(b)) time and
    O(min) space.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current[j] = min(
                previous[j] + 1,  # delete from a
                current[j - 1] + 1,  # insert into a
                previous[j - 1] + cost,  # substitute or match
            )
        previous = current
    return previous[-1]
