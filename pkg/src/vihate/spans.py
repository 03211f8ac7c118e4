"""Conversions between the four hate-span representations.

* index spans: sorted, merged ``(start, end)`` pairs, both ends inclusive,
  counted in code points of the original text
* tagged text: the original with a literal ``[HATE]`` before and after each span
* binary mask: one 0/1 per character of the original text
* IOB: one ``O`` / ``B-T`` / ``I-T`` tag per whitespace-delimited syllable
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import AlignmentFailure, InvalidSpan, MalformedIob, OddTagCount

HATE_TAG = "[HATE]"

OUTSIDE = "O"
BEGIN = "B-T"
INSIDE = "I-T"
IOB_TAGS = (OUTSIDE, BEGIN, INSIDE)

Span = tuple[int, int]

_TOKEN = re.compile(r"\S+")


class Token(NamedTuple):
    text: str
    start: int
    end: int  # inclusive


@dataclass
class IobSequence:
    tokens: list[Token]
    tags: list[str]


class MalformedIobWarning(UserWarning):
    pass


def _as_pairs(spans: Iterable) -> list[Span]:
    flat = set()
    pairs = []
    for item in spans:
        if isinstance(item, int) and not isinstance(item, bool):
            flat.add(item)
        else:
            start, end = item
            pairs.append((int(start), int(end)))
    pairs.extend((i, i) for i in flat)
    pairs.sort()
    return pairs


def canonicalize(spans: Iterable) -> list[Span]:
    """Sort and merge spans; accepts ``(start, end)`` pairs or flat indices.

    Overlapping and adjacent pairs are merged. Bounds are not checked here,
    see :func:`validate_spans`.

    >>> canonicalize([0, 1, 2, 20, 21, 22, 23])
    [(0, 2), (20, 23)]
    >>> canonicalize([[5, 6], [0, 1], [2, 2]])
    [(0, 2), (5, 6)]
    """
    merged: list[Span] = []
    for start, end in _as_pairs(spans):
        if start > end:
            raise InvalidSpan(f"span start {start} > end {end}")
        if merged and start <= merged[-1][1] + 1:
            prev_start, prev_end = merged[-1]
            merged[-1] = (prev_start, max(prev_end, end))
        else:
            merged.append((start, end))
    return merged


def validate_spans(spans: Iterable, length: int) -> list[Span]:
    """Check ``spans`` against a text of ``length`` characters and canonicalize.

    Raises InvalidSpan for out-of-range indices, reversed pairs and overlapping
    pairs. Adjacent pairs are legal and get merged; repeated flat indices are
    treated as a set.
    """
    pairs = _as_pairs(spans)
    prev_end = -1
    for start, end in pairs:
        if start > end:
            raise InvalidSpan(f"span start {start} > end {end}")
        if start < 0 or end >= length:
            raise InvalidSpan(f"span ({start}, {end}) out of range for length {length}")
        if start <= prev_end:
            raise InvalidSpan(f"span ({start}, {end}) overlaps a previous span")
        prev_end = end
    return canonicalize(pairs)


def encode_tags(original: str, spans: Iterable) -> str:
    """Wrap every span of ``original`` in ``[HATE]`` markers."""
    parts = []
    cursor = 0
    for start, end in validate_spans(spans, len(original)):
        parts.append(original[cursor:start])
        parts.append(HATE_TAG + original[start:end + 1] + HATE_TAG)
        cursor = end + 1
    parts.append(original[cursor:])
    return "".join(parts)


class TagDecode(NamedTuple):
    spans: list[Span]
    repaired: bool  # odd marker count fixed, or model text differs from original
    aligned: bool  # False when some enclosed substring could not be located


def recover_spans(tagged: str, original: str) -> TagDecode:
    """Tolerant decoding of (possibly malformed) model output.

    The output is split on ``[HATE]``; odd-numbered pieces are the enclosed
    substrings. Pieces are located in ``original`` left to right, each at its
    first occurrence at or after a cursor that only moves forward. Untagged
    pieces advance the cursor too, so an exact echo of the original decodes to
    the exact spans that produced it. An untagged piece that cannot be found
    leaves the cursor in place; if the next enclosed substring is then missing,
    the search is retried from where that untagged piece started.

    An odd marker count drops the last marker. A missing enclosed substring
    yields no spans and ``aligned=False``.
    """
    pieces = tagged.split(HATE_TAG)
    repaired = False
    if len(pieces) % 2 == 0:
        # odd number of markers: glue the piece after the final marker back on
        pieces[-2:] = [pieces[-2] + pieces[-1]]
        repaired = True
    if "".join(pieces) != original:
        repaired = True

    covered: list[Span] = []
    cursor = 0
    before_untagged = 0
    for i, piece in enumerate(pieces):
        if not piece:
            continue
        if i % 2 == 0:
            found = original.find(piece, cursor)
            if found >= 0:
                before_untagged = cursor
                cursor = found + len(piece)
            continue
        found = original.find(piece, cursor)
        if found < 0 and before_untagged < cursor:
            # the untagged piece may have matched too far ahead in edited output
            found = original.find(piece, before_untagged)
        if found < 0:
            return TagDecode([], repaired, False)
        covered.append((found, found + len(piece) - 1))
        cursor = before_untagged = found + len(piece)
    return TagDecode(canonicalize(covered), repaired, True)


def decode_tags(tagged: str, original: str) -> list[Span]:
    """Strict decoding: raise instead of repairing.

    >>> decode_tags("[HATE]vcl[HATE] thật. Chịu luôn [HATE]đm m[HATE]!!!",
    ...             "vcl thật. Chịu luôn đm m!!!")
    [(0, 2), (20, 23)]
    """
    count = tagged.count(HATE_TAG)
    if count % 2:
        raise OddTagCount(f"{count} {HATE_TAG} markers in model output")
    result = recover_spans(tagged, original)
    if not result.aligned:
        raise AlignmentFailure("an enclosed substring was not found in the original text")
    return result.spans


def span_indices(spans: Iterable[Span]) -> list[int]:
    """Flatten spans into the sorted index list the datasets use."""
    return [i for start, end in spans for i in range(start, end + 1)]


def spans_to_mask(spans: Iterable, original: str) -> list[int]:
    mask = [0] * len(original)
    for start, end in validate_spans(spans, len(original)):
        mask[start:end + 1] = [1] * (end - start + 1)
    return mask


def mask_to_spans(mask: Sequence[int]) -> list[Span]:
    spans: list[Span] = []
    start = None
    for i, bit in enumerate(mask):
        if bit not in (0, 1):
            raise ValueError(f"mask value {bit!r} at {i} is not 0/1")
        if bit and start is None:
            start = i
        elif not bit and start is not None:
            spans.append((start, i - 1))
            start = None
    if start is not None:
        spans.append((start, len(mask) - 1))
    return spans


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end() - 1) for m in _TOKEN.finditer(text)]


def spans_to_iob(original: str, spans: Iterable) -> IobSequence:
    """Tag syllables touched by a span.

    A token is a target if any of its characters is covered. It continues the
    previous target (``I-T``) only when both belong to the same covered run of
    characters, so ``cl me`` covered as one span is ``B-T I-T`` while two
    separately covered neighbours are ``B-T B-T``.
    """
    canon = validate_spans(spans, len(original))
    run_of = [-1] * len(original)
    for run, (start, end) in enumerate(canon):
        for i in range(start, end + 1):
            run_of[i] = run

    tokens = tokenize(original)
    tags = []
    prev_run = -1
    for tok in tokens:
        runs = [run_of[i] for i in range(tok.start, tok.end + 1) if run_of[i] >= 0]
        if not runs:
            tags.append(OUTSIDE)
            prev_run = -1
            continue
        tags.append(INSIDE if runs[0] == prev_run else BEGIN)
        prev_run = runs[-1]
    return IobSequence(tokens, tags)


def iob_to_spans(tokens: Sequence[Token], tags: Sequence[str], strict: bool = False) -> list[Span]:
    """Map each ``B-T I-T*`` run onto one span from first token start to last token end.

    Whitespace between tokens of one run is covered. An ``I-T`` that opens a run
    is read as ``B-T`` with a warning, or raises MalformedIob when ``strict``.
    """
    if len(tokens) != len(tags):
        raise MalformedIob(f"{len(tokens)} tokens but {len(tags)} tags")
    spans: list[Span] = []
    current: list[int] | None = None
    prev = OUTSIDE
    for i, (tok, tag) in enumerate(zip(tokens, tags)):
        if tag not in IOB_TAGS:
            raise MalformedIob(f"unknown tag {tag!r} at position {i}")
        if tag == INSIDE and prev == OUTSIDE:
            if strict:
                raise MalformedIob(f"I-T without preceding B-T at position {i}")
            warnings.warn(f"I-T without preceding B-T at position {i}; read as B-T",
                          MalformedIobWarning, stacklevel=2)
            tag = BEGIN
        if tag == BEGIN:
            if current is not None:
                spans.append((current[0], current[1]))
            current = [tok.start, tok.end]
        elif tag == INSIDE:
            current[1] = tok.end
        else:
            if current is not None:
                spans.append((current[0], current[1]))
            current = None
        prev = tag
    if current is not None:
        spans.append((current[0], current[1]))
    return canonicalize(spans)
