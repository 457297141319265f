"""Exact partial-sum statistics of balanced random sign sequences.

s_i is the sum of the first i labels when n/2 labels are +1 and n/2 are -1
in uniformly random order.  Everything here is exact rational arithmetic;
the closed-form hypergeometric distribution is cross-checked against brute
enumeration, and spot values are frozen as independent oracles.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shuffle_sgd.permstats import (
    CSV_HEADER,
    check_lemma13,
    enumerate_bruteforce,
    exact_distribution,
    expected_abs,
    prob_negative,
    prob_positive,
    prob_zero,
    rows_to_csv,
)


def test_distribution_n4_by_hand():
    """i = 2, n = 4: P(s_2 = -2) = 1/6, P(0) = 2/3, P(2) = 1/6."""
    dist = exact_distribution(4, 2)
    assert dist.pmf[-2] == Fraction(1, 6)
    assert dist.pmf[0] == Fraction(2, 3)
    assert dist.pmf[2] == Fraction(1, 6)
    assert dist.expected_abs() == Fraction(2, 3)
    assert dist.second_moment() == Fraction(4, 3)
    assert dist.mean() == 0


def test_golden_prob_zero_half_way():
    """P(s_4 = 0) for n = 8, frozen as an exact rational."""
    assert prob_zero(8, 4) == Fraction(18, 35)


def test_small_n_tail_counterexample():
    """P(s_2 > 0) = 3/14 < 1/4 at n = 8: the quarter tail bound genuinely
    fails below the asserted size, which is why small n stays informational."""
    assert prob_positive(8, 2) == Fraction(3, 14)
    assert prob_negative(8, 2) == Fraction(3, 14)


def test_pmf_sums_to_one_and_is_symmetric():
    for n in (4, 8, 10):
        for i in range(1, n + 1):
            dist = exact_distribution(n, i)
            assert sum(dist.pmf.values()) == 1
            for k, p in dist.pmf.items():
                assert dist.pmf[-k] == p  # +1/-1 labels are exchangeable
            assert dist.mean() == 0


def test_prefix_suffix_duality():
    """s_i and -s_{n-i} are the same walk read from the other end, so
    |s_i| and |s_{n-i}| are identically distributed."""
    n = 10
    for i in range(1, n):
        assert expected_abs(n, i) == expected_abs(n, n - i)


def test_full_prefix_is_exactly_zero():
    dist = exact_distribution(6, 6)
    assert dist.pmf == {0: Fraction(1)}
    assert expected_abs(6, 6) == 0


def test_formula_matches_bruteforce_all_even_n_to_12():
    """Closed form vs. explicit enumeration over all arrangements."""
    for n in (2, 4, 6, 8, 10, 12):
        for i in range(1, n + 1):
            assert exact_distribution(n, i).pmf == enumerate_bruteforce(n, i).pmf


def test_argument_validation():
    with pytest.raises(ValueError):
        exact_distribution(5, 1)  # odd n has no balanced labelling
    with pytest.raises(ValueError):
        exact_distribution(4, 5)  # prefix longer than the sequence
    # The empty prefix is a valid degenerate case: s_0 = 0 surely.
    assert exact_distribution(4, 0).pmf == {0: Fraction(1)}


@settings(max_examples=40)
@given(
    n=st.integers(min_value=1, max_value=10).map(lambda h: 2 * h),
    data=st.data(),
)
def test_second_moment_identity(n, data):
    """E[s_i^2] = i (n - i) / (n - 1): the hypergeometric walk variance."""
    i = data.draw(st.integers(min_value=1, max_value=n))
    dist = exact_distribution(n, i)
    assert dist.second_moment() == Fraction(i * (n - i), n - 1)


@settings(max_examples=40)
@given(
    n=st.integers(min_value=1, max_value=10).map(lambda h: 2 * h),
    data=st.data(),
)
def test_expected_abs_between_moment_bounds(n, data):
    """Cauchy-Schwarz gives E|s_i| <= sqrt(E s_i^2); both are exact here."""
    i = data.draw(st.integers(min_value=1, max_value=n))
    dist = exact_distribution(n, i)
    e_abs, m2 = dist.expected_abs(), dist.second_moment()
    assert e_abs * e_abs <= m2
    assert e_abs >= 0


def test_check_lemma13_at_full_size():
    """No violations at n = 256; moment bounds hold on every row."""
    report = check_lemma13(256)
    assert report.passed
    assert list(report.violations) == []
    assert report.moment_bounds_hold()
    asserted = [r for r in report.rows if r.asserted]
    assert asserted and all(r.n == 256 for r in asserted)
    informational = [r for r in report.rows if not r.asserted]
    assert informational and all(r.n < 256 for r in informational)


def test_check_lemma13_rejects_tiny_n_max():
    with pytest.raises(ValueError):
        check_lemma13(4)


def test_lemma13_rows_cover_first_half_only():
    report = check_lemma13(8)
    assert {(r.n, r.i) for r in report.rows} == {(8, i) for i in range(1, 5)}
    # Tail bound is only evaluated on the window [n/4, n/2].
    for row in report.rows:
        if row.i < 2:
            assert row.tail_ok is None
        else:
            assert row.tail_ok is not None


def test_lemma13_table_lines_one_per_n():
    report = check_lemma13(16)
    lines = report.table_lines()
    assert len(lines) == 3  # n = 8, 12, 16
    assert lines[0].startswith("n=8 ")


def test_rows_to_csv_shape():
    report = check_lemma13(8)
    text = rows_to_csv(report.rows)
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(report.rows)
    first = lines[1].split(",")
    assert first[0] == "8" and first[1] == "1"
    # Exact rationals are serialized as fractions, not floats.
    assert "/" in lines[2] or lines[2].split(",")[2].isdigit()
