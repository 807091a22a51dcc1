from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from whynot import Constant
from whynot.constants import labeled_null


def test_numeric_detection():
    assert Constant.of("5000000").number == Decimal(5000000)
    assert Constant.of("3,502,000").number == Decimal(3502000)
    assert Constant.of("-12.5").number == Decimal("-12.5")
    assert Constant.of("Berlin").number is None
    assert Constant.of("12,34").number is None  # not a thousands grouping


def test_canonical_text_merges_equal_numbers():
    assert Constant.of("5.0") == Constant.of(5)
    assert Constant.of("5.50").text == "5.5"
    assert Constant.of("005") == Constant.of(5)


def test_numeric_comparison_beats_lexicographic():
    nine, ten = Constant.of("9"), Constant.of("10")
    assert nine.compare(ten) < 0
    assert ten.satisfies(">", nine)


def test_text_comparison_is_lexicographic():
    assert Constant.of("Amsterdam").compare(Constant.of("Berlin")) < 0
    assert Constant.of("San Francisco").compare(Constant.of("Santa Cruz")) < 0


def test_mixed_comparison_uses_textual_form():
    assert Constant.of("5").compare(Constant.of("Berlin")) < 0  # "5" < "B"


def test_satisfies_all_operators():
    five = Constant.of(5)
    assert five.satisfies("=", Constant.of(5))
    assert five.satisfies("<=", Constant.of(5))
    assert five.satisfies(">=", Constant.of(5))
    assert not five.satisfies("<", Constant.of(5))
    assert five.satisfies("<", Constant.of(6))
    with pytest.raises(ValueError):
        five.satisfies("!=", Constant.of(5))


def test_labeled_nulls_are_distinct_from_data():
    null = labeled_null(1)
    assert null.is_null
    assert null != Constant.of("_:1")


tokens = st.one_of(
    st.integers(-1000, 1000).map(str),
    st.text(st.characters(min_codepoint=32, max_codepoint=126), min_size=0, max_size=8),
)


@given(tokens, tokens)
def test_trichotomy(a, b):
    """Exactly one of <, =, > holds for every pair."""
    x, y = Constant.of(a), Constant.of(b)
    signs = [x.compare(y) < 0, x.compare(y) == 0, x.compare(y) > 0]
    assert sum(signs) == 1
    assert (x.compare(y) == 0) == (x == y)


@given(tokens, tokens)
def test_compare_antisymmetric(a, b):
    x, y = Constant.of(a), Constant.of(b)
    assert x.compare(y) == -y.compare(x)


@given(st.lists(tokens, min_size=1, max_size=10))
def test_sort_key_is_stable_total_order(values):
    constants = [Constant.of(v) for v in values]
    ordered = sorted(constants, key=Constant.sort_key)
    assert sorted(reversed(ordered), key=Constant.sort_key) == ordered
