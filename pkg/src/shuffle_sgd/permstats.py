"""Exact statistics of partial sums of a balanced random sign permutation.

A uniformly random permutation of the multiset {+1 x n/2, -1 x n/2} induces
partial sums s_i = sigma_1 + ... + sigma_i.  Because the draws are without
replacement the walk is hypergeometric, not binomial:

    P(s_i = k) = C(n/2, (i+k)/2) * C(n/2, (i-k)/2) / C(n, i)

for |k| <= i, k = i (mod 2), with both binomial arguments at most n/2.
Everything here is exact big-integer rational arithmetic; floats appear
only in reports.  Bounds against sqrt(i) are compared by squaring, which
keeps the comparison exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

BRUTEFORCE_MAX_N = 16


@dataclass(frozen=True)
class PartialSumDistribution:
    """Exact pmf of the partial sum s_i for a balanced n-permutation."""

    n: int
    i: int
    pmf: dict[int, Fraction]

    def expected_abs(self) -> Fraction:
        return sum((abs(k) * p for k, p in self.pmf.items()), Fraction(0))

    def second_moment(self) -> Fraction:
        return sum((k * k * p for k, p in self.pmf.items()), Fraction(0))

    def mean(self) -> Fraction:
        return sum((k * p for k, p in self.pmf.items()), Fraction(0))

    def prob_negative(self) -> Fraction:
        return sum((p for k, p in self.pmf.items() if k < 0), Fraction(0))

    def prob_positive(self) -> Fraction:
        return sum((p for k, p in self.pmf.items() if k > 0), Fraction(0))

    def prob_zero(self) -> Fraction:
        return self.pmf.get(0, Fraction(0))


def _check_args(n: int, i: int) -> None:
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    if not (0 <= i <= n):
        raise ValueError(f"i must be in 0..{n}, got {i}")


def _support(n: int, i: int):
    half = n // 2
    for k in range(-i, i + 1, 2):
        plus = (i + k) // 2
        minus = (i - k) // 2
        if plus <= half and minus <= half:
            yield k, plus, minus


def exact_distribution(n: int, i: int) -> PartialSumDistribution:
    """Closed-form hypergeometric pmf of s_i."""
    _check_args(n, i)
    half = n // 2
    total = comb(n, i)
    pmf = {
        k: Fraction(comb(half, plus) * comb(half, minus), total)
        for k, plus, minus in _support(n, i)
    }
    return PartialSumDistribution(n=n, i=i, pmf=pmf)


def enumerate_bruteforce(n: int, i: int) -> PartialSumDistribution:
    """Independent oracle: pmf by enumerating all balanced sign sequences."""
    _check_args(n, i)
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(f"enumeration supports n <= {BRUTEFORCE_MAX_N}, got {n}")
    half = n // 2
    counts: dict[int, int] = {}
    total = 0
    for plus_positions in itertools.combinations(range(n), half):
        plus_in_prefix = sum(1 for p in plus_positions if p < i)
        s = 2 * plus_in_prefix - i
        counts[s] = counts.get(s, 0) + 1
        total += 1
    pmf = {k: Fraction(c, total) for k, c in sorted(counts.items())}
    return PartialSumDistribution(n=n, i=i, pmf=pmf)


def expected_abs(n: int, i: int) -> Fraction:
    """E|s_i| as an exact rational."""
    return exact_distribution(n, i).expected_abs()


def prob_negative(n: int, i: int) -> Fraction:
    return exact_distribution(n, i).prob_negative()


def prob_positive(n: int, i: int) -> Fraction:
    return exact_distribution(n, i).prob_positive()


def prob_zero(n: int, i: int) -> Fraction:
    return exact_distribution(n, i).prob_zero()


@dataclass(frozen=True)
class Lemma13Row:
    """Exact check of one (n, i) pair.

    lower_ok:  sqrt(i)/32 <= E|s_i|, compared exactly as (32 E)^2 >= i.
    upper_ok:  E|s_i| <= sqrt(i), compared exactly as E^2 <= i.
    sq_ok:     E[s_i^2] <= i (the relation the upper bound follows from).
    tail_ok:   P(s_i < 0) >= 1/4 and P(s_i > 0) >= 1/4; only meaningful on
               i in [n/4, n/2] (None elsewhere).
    asserted:  row is inside the guaranteed regime (n >= 256, multiple
               of 4, i <= n/2) and so counts toward violations.
    """

    n: int
    i: int
    e_abs: Fraction
    p_zero: Fraction
    p_neg: Fraction
    lower_ok: bool
    upper_ok: bool
    sq_ok: bool
    tail_ok: bool | None
    asserted: bool

    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok and self.sq_ok and self.tail_ok is not False


@dataclass
class Lemma13Report:
    """All rows for n multiples of 4 in [8, n_max]; violations are asserted rows that fail."""

    n_max: int
    rows: list[Lemma13Row] = field(default_factory=list)
    violations: list[Lemma13Row] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def moment_bounds_hold(self) -> bool:
        """True when every row (informational ones included) satisfies the
        moment inequalities; only the tail bound may fail at small n."""
        return all(r.lower_ok and r.upper_ok and r.sq_ok for r in self.rows)

    def table_lines(self) -> list[str]:
        lines = []
        for n in sorted({r.n for r in self.rows}):
            rows_n = [r for r in self.rows if r.n == n]
            moment_fails = sum(not (r.lower_ok and r.upper_ok and r.sq_ok) for r in rows_n)
            tail_fails = sum(r.tail_ok is False for r in rows_n)
            asserted = sum(r.asserted for r in rows_n)
            lines.append(
                f"n={n} rows={len(rows_n)} asserted={asserted} "
                f"moment_failures={moment_fails} tail_failures={tail_fails}"
            )
        return lines


def check_lemma13(n_max: int) -> Lemma13Report:
    """Exact verification of the partial-sum moment and tail bounds.

    For every n multiple of 4 with 8 <= n <= n_max and every 1 <= i <= n/2:
    sqrt(i)/32 <= E|s_i| <= sqrt(i), E[s_i^2] <= i, and for i in
    [n/4, n/2] both tail probabilities are >= 1/4.  Rows with n >= 256 are
    asserted (failures recorded as violations); smaller n are informational
    only -- the tail bound genuinely fails there (e.g. n=8, i=2 has
    P(s_i > 0) = 3/14 < 1/4).
    """
    if n_max < 8:
        raise ValueError(f"n_max must be >= 8, got {n_max}")
    report = Lemma13Report(n_max=n_max)
    quarter = Fraction(1, 4)
    for n in range(8, n_max + 1, 4):
        for i in range(1, n // 2 + 1):
            dist = exact_distribution(n, i)
            e_abs = dist.expected_abs()
            p_neg = dist.prob_negative()
            p_pos = dist.prob_positive()
            lower_ok = (32 * e_abs) ** 2 >= i
            upper_ok = e_abs**2 <= i
            sq_ok = dist.second_moment() <= i
            in_tail_range = n // 4 <= i <= n // 2
            tail_ok = (p_neg >= quarter and p_pos >= quarter) if in_tail_range else None
            row = Lemma13Row(
                n=n,
                i=i,
                e_abs=e_abs,
                p_zero=dist.prob_zero(),
                p_neg=p_neg,
                lower_ok=lower_ok,
                upper_ok=upper_ok,
                sq_ok=sq_ok,
                tail_ok=tail_ok,
                asserted=n >= 256,
            )
            report.rows.append(row)
            if row.asserted and not row.ok():
                report.violations.append(row)
    return report


CSV_HEADER = "n,i,e_abs,p_zero,p_negative,lower_ok,upper_ok,sq_ok,tail_ok,asserted"


def rows_to_csv(rows) -> str:
    """Render check rows as CSV; probabilities stay exact fraction strings."""
    lines = [CSV_HEADER]
    for r in rows:
        tail = "" if r.tail_ok is None else str(int(r.tail_ok))
        lines.append(
            f"{r.n},{r.i},{r.e_abs},{r.p_zero},{r.p_neg},"
            f"{int(r.lower_ok)},{int(r.upper_ok)},{int(r.sq_ok)},{tail},{int(r.asserted)}"
        )
    return "\n".join(lines) + "\n"
