"""Canonical field vocabulary, IOB2 token tags, and the shared instance type.

Tags are plain strings: "O", or "B-<field>" / "I-<field>" with <field> drawn
from FIELD_LABELS. The order of FIELD_LABELS is the canonical tie-break order
used everywhere (tag ids, report rows, Viterbi ties).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import StructuralError, UsageError

FIELD_LABELS: tuple[str, ...] = (
    "author",
    "title",
    "date",
    "journal",
    "booktitle",
    "pages",
    "volume",
    "issue",
    "publisher",
    "editor",
    "location",
    "institution",
    "note",
    "web",
    "tech",
)

_FIELD_SET = frozenset(FIELD_LABELS)
_FIELD_RANK = {f: i for i, f in enumerate(FIELD_LABELS)}

OUT = "O"


def is_field_label(name: str) -> bool:
    return name in _FIELD_SET


def sort_fields(fields: Iterable[str]) -> tuple[str, ...]:
    """Return the given fields in canonical order, validating membership."""
    uniq = set(fields)
    unknown = uniq - _FIELD_SET
    if unknown:
        raise UsageError(f"unknown field labels: {sorted(unknown)}")
    return tuple(f for f in FIELD_LABELS if f in uniq)


def make_tag(kind: str, field: str | None = None) -> str:
    if kind == OUT:
        return OUT
    if kind not in ("B", "I"):
        raise UsageError(f"tag kind must be B, I or O, got {kind!r}")
    if field not in _FIELD_SET:
        raise UsageError(f"unknown field label {field!r}")
    return f"{kind}-{field}"


def tag_kind(tag: str) -> str:
    """"B", "I" or "O"."""
    return tag[0]


def tag_field(tag: str) -> str | None:
    """The field of a B/I tag, None for O."""
    if tag == OUT:
        return None
    return tag[2:]


def is_valid_tag(tag: str) -> bool:
    if tag == OUT:
        return True
    return len(tag) > 2 and tag[0] in ("B", "I") and tag[1] == "-" and tag[2:] in _FIELD_SET


def check_iob2(tags: Sequence[str]) -> None:
    """Raise StructuralError if the tag sequence is not IOB2 well-formed."""
    prev = OUT
    for i, tag in enumerate(tags):
        if not is_valid_tag(tag):
            raise StructuralError(f"invalid tag {tag!r} at position {i}")
        if tag_kind(tag) == "I":
            field = tag_field(tag)
            if tag_kind(prev) == "O" or tag_field(prev) != field:
                raise StructuralError(
                    f"I-{field} at position {i} does not continue a B-{field}/I-{field} run"
                )
        prev = tag
    return None


class Token(NamedTuple):
    """A surface string plus its half-open character span in the raw text."""

    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class LabeledReference:
    """One reference string with its tokens and per-token IOB2 tags.

    Tokens must be non-overlapping, ordered by start, and each surface must
    equal raw[start:end]; tags must be IOB2 well-formed and aligned 1:1 with
    tokens. Both are checked at construction.
    """

    raw: str
    tokens: tuple[Token, ...]
    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise StructuralError(
                f"{len(self.tokens)} tokens vs {len(self.tags)} tags"
            )
        prev_end = 0
        for i, tok in enumerate(self.tokens):
            if tok.start < prev_end:
                raise StructuralError(f"token {i} overlaps its predecessor")
            if self.raw[tok.start : tok.end] != tok.surface:
                raise StructuralError(
                    f"token {i} surface {tok.surface!r} != raw[{tok.start}:{tok.end}]"
                )
            prev_end = tok.end
        check_iob2(self.tags)

    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def fields(self) -> set[str]:
        """The set of field labels carried by this instance."""
        return {tag_field(t) for t in self.tags if t != OUT}  # type: ignore[misc]


@dataclass(frozen=True)
class FieldSegment:
    """A maximal run of same-field tokens: [start, end) token indices."""

    field: str
    start: int
    end: int
    text: str


def normalize_segment_text(text: str) -> str:
    """Collapse whitespace runs to one space, trim, and strip trailing
    field-final punctuation (. , ; :)."""
    text = " ".join(text.split())
    return text.rstrip(" .,;:")


def segments_from_tags(
    tags: Sequence[str], tokens: Sequence[Token] | Sequence[str]
) -> list[FieldSegment]:
    """Derive maximal field segments from an IOB2 tag sequence.

    Segment text is the normalized space-joined surfaces of the covered
    tokens. Accepts Token tuples or bare surface strings.
    """
    if len(tags) != len(tokens):
        raise StructuralError(f"{len(tags)} tags vs {len(tokens)} tokens")
    check_iob2(tags)
    surfaces = [t.surface if isinstance(t, Token) else t for t in tokens]
    segments: list[FieldSegment] = []
    start = -1
    field = None
    for i, tag in enumerate(tags):
        kind = tag_kind(tag)
        if kind == "I":
            continue
        if field is not None:
            segments.append(_segment(field, start, i, surfaces))
        if kind == "B":
            start, field = i, tag_field(tag)
        else:
            start, field = -1, None
    if field is not None:
        segments.append(_segment(field, start, len(tags), surfaces))
    return segments


def _segment(field: str, start: int, end: int, surfaces: Sequence[str]) -> FieldSegment:
    return FieldSegment(
        field=field,
        start=start,
        end=end,
        text=normalize_segment_text(" ".join(surfaces[start:end])),
    )


def tags_from_segments(segments: Iterable[FieldSegment], length: int) -> tuple[str, ...]:
    """Paint an IOB2 tag sequence from non-overlapping segments (left inverse
    of segments_from_tags)."""
    tags = [OUT] * length
    for seg in segments:
        if not (0 <= seg.start < seg.end <= length):
            raise StructuralError(f"segment span [{seg.start},{seg.end}) out of range")
        for i in range(seg.start, seg.end):
            if tags[i] != OUT:
                raise StructuralError(f"overlapping segments at token {i}")
            tags[i] = make_tag("I", seg.field)
        tags[seg.start] = make_tag("B", seg.field)
    return tuple(tags)
