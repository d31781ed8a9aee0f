"""Monolithic documents and their fragmentation into text segments.

Two ways to cut a document: automatic numbered-step detection, and explicit
highlight spans. All spans are half-open byte-offset intervals into the
UTF-8 encoding of the body; segment text is always the exact slice, never a
normalized copy, so the original document can be reconstructed byte for
byte from any parse result.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import Rejected, RejectReason

# A step header line: optional leading horizontal whitespace, decimal
# digits, '.' or ')', then at least one whitespace character (the line's
# own newline counts). "2.1" is not a header: '.' is followed by a digit.
_HEADER = re.compile(rb"^[ \t]*(\d+)[.)][ \t\n\r\f\v]", re.MULTILINE)


@dataclass(frozen=True)
class SourceDocument:
    """The unfragmented instructional text as loaded into a session.

    ``cohesion`` optionally names runs of step ordinals the document author
    wants kept together when steps are divided among users.
    """

    doc_id: str
    title: str
    body: str
    cohesion: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        if not self.body:
            raise ValueError("document body must be non-empty")


@dataclass(frozen=True)
class StepSegment:
    """One numbered instruction: ordinal, byte span, exact text slice."""

    ordinal: int
    span: tuple[int, int]
    text: str


@dataclass(frozen=True)
class HighlightSegment:
    """A user-swiped span, trimmed of surrounding whitespace."""

    span: tuple[int, int]
    text: str
    creator: str


def body_bytes(doc: SourceDocument) -> bytes:
    return doc.body.encode("utf-8")


def parse_steps(doc: SourceDocument) -> list[StepSegment]:
    """Split the body into one segment per numbered instruction.

    A step runs from its header's first non-whitespace byte up to the next
    header line (or end of body), with trailing newlines excluded. Text
    before the first header is preamble and yields no segment. Ordinals
    come from the header digits and must be strictly increasing.
    """
    raw = body_bytes(doc)
    headers = []  # (line_start, digit_start, ordinal)
    for m in _HEADER.finditer(raw):
        headers.append((m.start(), m.start(1), int(m.group(1))))
    if not headers:
        raise Rejected(RejectReason.NO_STEPS, "no numbered step header found")

    segments: list[StepSegment] = []
    prev_ordinal = 0
    for i, (_, digit_start, ordinal) in enumerate(headers):
        if ordinal <= prev_ordinal:
            raise Rejected(
                RejectReason.MALFORMED_NUMBERING,
                f"step {ordinal} after step {prev_ordinal}",
            )
        prev_ordinal = ordinal
        end = headers[i + 1][0] if i + 1 < len(headers) else len(raw)
        while end > digit_start and raw[end - 1 : end] in (b"\n", b"\r"):
            end -= 1
        segments.append(
            StepSegment(
                ordinal=ordinal,
                span=(digit_start, end),
                text=raw[digit_start:end].decode("utf-8"),
            )
        )
    return segments


def spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def segment_by_highlight(
    doc: SourceDocument,
    raw_span: tuple[int, int],
    existing: Sequence[tuple[int, int]],
    creator: str,
) -> HighlightSegment:
    """Turn a press-and-drag byte span into a segment.

    The span is trimmed of leading/trailing whitespace bytes, nothing else;
    it must survive trimming non-empty and share no byte with any existing
    segment span.
    """
    raw = body_bytes(doc)
    start, end = raw_span
    if not (0 <= start < end <= len(raw)):
        raise Rejected(RejectReason.BAD_SPAN, f"span {raw_span} out of bounds")

    sliced = raw[start:end]
    trimmed = sliced.strip()
    if not trimmed:
        raise Rejected(RejectReason.EMPTY_AFTER_TRIM)
    lead = len(sliced) - len(sliced.lstrip())
    span = (start + lead, start + lead + len(trimmed))

    for other in existing:
        if spans_overlap(span, other):
            raise Rejected(
                RejectReason.OVERLAPS_EXISTING, f"{span} overlaps {other}"
            )
    try:
        text = trimmed.decode("utf-8")
    except UnicodeDecodeError:
        raise Rejected(
            RejectReason.BAD_SPAN, "span does not fall on UTF-8 boundaries"
        ) from None
    return HighlightSegment(span=span, text=text, creator=creator)


def full_view(doc: SourceDocument) -> str:
    """The whole body, unchanged. Fragmentation never mutates the source."""
    return doc.body


def validate_cohesion_shape(cohesion) -> tuple[tuple[int, ...], ...]:
    """Structural checks on cohesion groups: lists of positive ints,
    consecutive ascending within each group, pairwise disjoint."""
    if not isinstance(cohesion, (list, tuple)):
        raise ValueError("cohesion must be a list of lists of step ordinals")
    seen: set[int] = set()
    groups: list[tuple[int, ...]] = []
    for group in cohesion:
        if not isinstance(group, (list, tuple)) or not group:
            raise ValueError("each cohesion group must be a non-empty list")
        ordinals = []
        for o in group:
            if not isinstance(o, int) or isinstance(o, bool) or o < 1:
                raise ValueError(f"bad step ordinal {o!r} in cohesion group")
            ordinals.append(o)
        for a, b in zip(ordinals, ordinals[1:]):
            if b != a + 1:
                raise ValueError(
                    f"cohesion group {ordinals} is not consecutive ascending"
                )
        if seen.intersection(ordinals):
            raise ValueError("cohesion groups must be pairwise disjoint")
        seen.update(ordinals)
        groups.append(tuple(ordinals))
    return tuple(groups)


def load_cohesion_sidecar(path: str | Path) -> tuple[tuple[int, ...], ...]:
    """Read a cohesion sidecar: a JSON list of lists of step ordinals."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return validate_cohesion_shape(data)
