import pytest
from hypothesis import given
from hypothesis import strategies as st

from refparse.errors import StructuralError
from refparse.labels import Token, check_iob2
from refparse.tokenizer import TokenizerConfig, tags_from_spans, tokenize


def surfaces(text, config=TokenizerConfig()):
    return [t.surface for t in tokenize(text, config)]


def test_reference_fragments():
    assert surfaces("pp. 117-130, 2015.") == ["pp", ".", "117", "-", "130", ",", "2015", "."]
    assert surfaces("vol. 44, no. 1") == ["vol", ".", "44", ",", "no", ".", "1"]
    assert surfaces("") == []


def test_digit_letter_boundary():
    assert surfaces("COVID19") == ["COVID", "19"]
    assert surfaces("COVID19", TokenizerConfig(split_digit_letter=False)) == ["COVID19"]


def test_punctuation_splitting():
    assert surfaces("117--130") == ["117", "-", "-", "130"]
    assert surfaces("117--130", TokenizerConfig(split_punctuation=False)) == [
        "117",
        "--",
        "130",
    ]


def test_unicode_kept_verbatim():
    assert surfaces("Müller–Brown") == ["Müller", "–", "Brown"]


@given(st.text(max_size=80))
def test_offsets_reconstruct_raw(text):
    tokens = tokenize(text)
    rebuilt = list(text)
    for t in tokens:
        assert text[t.start : t.end] == t.surface
    # non-whitespace is fully covered, in order
    covered = sorted(i for t in tokens for i in range(t.start, t.end))
    expected = [i for i, ch in enumerate(text) if not ch.isspace()]
    assert covered == expected


@given(st.text(max_size=80))
def test_tokenize_deterministic(text):
    assert tokenize(text) == tokenize(text)


def test_tags_from_spans_exact():
    tokens = tokenize("Lemke 2015")
    tags = tags_from_spans(tokens, [("author", 0, 5), ("date", 6, 10)])
    assert tags == ("B-author", "B-date")


def test_tags_from_spans_no_spans():
    tokens = tokenize("a b c")
    assert tags_from_spans(tokens, []) == ("O", "O", "O")


def test_separator_between_spans_is_outside():
    # 50% rule hand-applied on a 3-token fixture: the ". " separator's
    # token overlaps neither span by half its width
    raw = "Lemke. 2015"
    tokens = tokenize(raw)
    assert [t.surface for t in tokens] == ["Lemke", ".", "2015"]
    tags = tags_from_spans(tokens, [("author", 0, 5), ("date", 7, 11)])
    assert tags == ("B-author", "O", "B-date")


def test_half_overlap_counts_as_inside():
    # token "ab" with exactly one of two chars inside the span
    tokens = (Token("ab", 0, 2),)
    assert tags_from_spans(tokens, [("title", 1, 2)]) == ("B-title",)


def test_overlapping_spans_rejected():
    tokens = tokenize("a b")
    with pytest.raises(StructuralError):
        tags_from_spans(tokens, [("title", 0, 2), ("date", 1, 3)])


def test_gap_inside_span_restarts_run():
    # a heavily uncovered middle token splits the covered run; the second
    # run must re-open with B to stay IOB2 well-formed
    tokens = (Token("aa", 0, 2), Token("xxxx", 2, 6), Token("bb", 6, 8))
    tags = tags_from_spans(tokens, [("title", 0, 3)])
    assert tags == ("B-title", "O", "O")
    check_iob2(tags)
