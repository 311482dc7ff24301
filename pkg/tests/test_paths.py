from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nctraces.paths import (
    binom,
    catalan,
    count_ballot,
    count_motzkin,
    enumerate_paths,
    motzkin_number,
)


def test_binom_edge_cases():
    assert binom(4, 2) == 6
    assert binom(4, Fraction(3, 2)) == 0
    assert binom(4, -1) == 0
    assert binom(4, 5) == 0


def test_small_ballot_counts():
    assert count_ballot((0, 0), (4, 0)) == 2
    assert count_ballot((0, 0), (4, 2)) == 3
    assert count_ballot((0, 0), (4, 4)) == 1
    assert count_ballot((0, 0), (4, 1)) == 0
    assert count_ballot((3, 1), (3, 1)) == 1
    assert count_ballot((0, 0), (2 * 7, 0)) == catalan(7)


def test_small_motzkin_counts():
    assert count_motzkin((0, 0), (3, 0)) == 4
    assert count_motzkin((0, 0), (4, 0)) == 9
    assert count_motzkin((2, 1), (2, 1)) == 1
    assert count_motzkin((0, 0), (2, 3)) == 0


def test_motzkin_numbers_start():
    # counted by hand from the step sequences for n <= 5
    assert [motzkin_number(n) for n in range(11)] == [1, 1, 2, 4, 9, 21, 51, 127, 323, 835, 2188]


def test_motzkin_numbers_match_path_counts():
    for n in range(16):
        assert motzkin_number(n) == count_motzkin((0, 0), (n, 0))


def test_enumeration_listing():
    assert enumerate_paths((0, 0), (4, 0)) == ["UDUD", "UUDD"]
    assert enumerate_paths((0, 0), (2, 0), "motzkin") == ["LL", "UD"]
    assert enumerate_paths((0, 1), (1, 0)) == ["D"]


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        count_ballot((4, 0), (0, 0))
    with pytest.raises(ValueError):
        count_motzkin((0, -1), (2, 0))
    with pytest.raises(ValueError):
        enumerate_paths((0, 0), (40, 0))


points = st.tuples(st.integers(0, 4), st.integers(0, 5))


@settings(max_examples=150, deadline=None)
@given(points, st.integers(0, 9), st.integers(0, 8))
def test_closed_forms_match_enumeration(src, span, d):
    a, b = src
    tgt = (a + span, d)
    assert count_ballot(src, tgt) == len(enumerate_paths(src, tgt, "ballot"))
    assert count_motzkin(src, tgt) == len(enumerate_paths(src, tgt, "motzkin"))


@settings(max_examples=100, deadline=None)
@given(points, st.integers(1, 20), st.integers(0, 20))
def test_last_step_recursion(src, span, d):
    a, b = src
    tgt = (a + span, d)
    prev = [(a + span - 1, e) for e in (d - 1, d + 1) if e >= 0]
    assert count_ballot(src, tgt) == sum(count_ballot(src, p) for p in prev)
    prev_m = [(a + span - 1, e) for e in (d - 1, d, d + 1) if e >= 0]
    assert count_motzkin(src, tgt) == sum(count_motzkin(src, p) for p in prev_m)
