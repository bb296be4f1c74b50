import pytest
from hypothesis import given
from hypothesis import strategies as st

import refparse as rp
from refparse.errors import StructuralError
from refparse.labels import (
    FIELD_LABELS,
    FieldSegment,
    check_iob2,
    normalize_segment_text,
    segments_from_tags,
    tags_from_segments,
)


def test_canonical_label_set():
    assert len(FIELD_LABELS) == 15
    assert FIELD_LABELS[0] == "author"
    assert set(FIELD_LABELS) >= {"location", "web", "tech", "institution", "note"}


def test_segments_basic():
    segs = segments_from_tags(
        ["B-author", "I-author", "I-author", "B-date"],
        ["C", ".", "Lemke", "2015"],
    )
    assert [(s.field, s.start, s.end, s.text) for s in segs] == [
        ("author", 0, 3, "C . Lemke"),
        ("date", 3, 4, "2015"),
    ]


def test_segments_all_outside():
    assert segments_from_tags(["O", "O"], ["a", "b"]) == []


def test_adjacent_b_tags_start_new_segments():
    segs = segments_from_tags(["B-title", "B-title"], ["x", "y"])
    assert [(s.field, s.start, s.end) for s in segs] == [
        ("title", 0, 1),
        ("title", 1, 2),
    ]


def test_malformed_iob2_rejected():
    with pytest.raises(StructuralError, match="position 0"):
        segments_from_tags(["I-author"], ["x"])
    with pytest.raises(StructuralError, match="position 1"):
        check_iob2(["B-title", "I-author"])
    with pytest.raises(StructuralError):
        segments_from_tags(["B-author"], ["x", "y"])


def test_normalize_segment_text():
    assert normalize_segment_text("Metalearning:  a survey .") == "Metalearning: a survey"
    assert normalize_segment_text("") == ""
    assert normalize_segment_text("2015,") == "2015"
    assert normalize_segment_text("  vol .  44 ; ") == "vol . 44"


@given(
    st.lists(
        st.tuples(st.sampled_from(FIELD_LABELS), st.integers(1, 3)),
        min_size=0,
        max_size=6,
    ),
    st.integers(0, 3),
)
def test_paint_then_derive_is_identity(runs, trailing_gap):
    """Painting tags from non-overlapping segments and re-deriving them
    returns the original segment list."""
    segments = []
    pos = 0
    for field, width in runs:
        segments.append(FieldSegment(field=field, start=pos, end=pos + width, text=""))
        pos += width + 1  # one-gap separation keeps same-field runs distinct
    length = pos + trailing_gap
    tags = tags_from_segments(segments, length)
    check_iob2(tags)
    derived = segments_from_tags(tags, ["w"] * length)
    assert [(s.field, s.start, s.end) for s in derived] == [
        (s.field, s.start, s.end) for s in segments
    ]


def test_paint_adjacent_same_field_segments_round_trip():
    segs = [
        FieldSegment("author", 0, 2, ""),
        FieldSegment("author", 2, 4, ""),
    ]
    tags = tags_from_segments(segs, 4)
    assert tags == ("B-author", "I-author", "B-author", "I-author")
    derived = segments_from_tags(tags, ["w"] * 4)
    assert [(s.start, s.end) for s in derived] == [(0, 2), (2, 4)]


def test_labeled_reference_validates_offsets():
    with pytest.raises(StructuralError):
        rp.LabeledReference(
            raw="ab", tokens=(rp.Token("b", 0, 1),), tags=("O",)
        )
    inst = rp.LabeledReference(
        raw="a b",
        tokens=(rp.Token("a", 0, 1), rp.Token("b", 2, 3)),
        tags=("B-title", "O"),
    )
    assert inst.fields() == {"title"}
