"""Closed-form convergence-bound evaluators with explicit precondition gates.

Upper bound (shared-Hessian quadratic mean, step size 4 l lnT / (T mu),
l <= 2, K >= 128 (L/mu)^2 lnT):

    E||x_T - x*||^2 <= D^2 / T^l
                      + 2^13 G^2 L^2 ln^3 T / (T^2 mu^4)
                      + 2^15 G^2 L^2 n^2 ln^4 T / (T^3 mu^4)

Lower bound (some initialization, any step size in [1/(nK), 2^-14/(nL)],
K >= 2^14 L, L >= 2^17, n >= 256 a multiple of 4):

    E||x_T - x*||^2 >= 2^-56 G^2 n / T^2

Logs are natural.  Bounds are always evaluated, even when preconditions
fail; ``applicable`` flags whether every gate holds, which is useful for
plotting bound curves next to empirical ones at desk-scale parameters
where the formal constants are out of reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Precondition:
    name: str
    required: str
    actual: str
    satisfied: bool


@dataclass(frozen=True)
class BoundReport:
    name: str
    bound_value: float
    preconditions: tuple[Precondition, ...]

    @property
    def applicable(self) -> bool:
        return all(p.satisfied for p in self.preconditions)

    def lines(self) -> list[str]:
        """Aligned text rendering for the CLI."""
        out = [f"{self.name}: bound = {self.bound_value:.17g}  applicable = {self.applicable}"]
        if self.preconditions:
            width = max(len(p.name) for p in self.preconditions)
            for p in self.preconditions:
                mark = "ok " if p.satisfied else "FAIL"
                out.append(f"  [{mark}] {p.name:<{width}}  required {p.required}  actual {p.actual}")
        return out


def _positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def upper_bound_quadratic(n: int, k_epochs: int, mu: float, l_smooth: float,
                          g_bound: float, d_bound: float, l: float) -> BoundReport:
    """Three-term upper bound for SGDo on the quadratic family."""
    _positive(n=n, k_epochs=k_epochs, mu=mu, l_smooth=l_smooth, g_bound=g_bound, d_bound=d_bound)
    t_total = n * k_epochs
    ln_t = math.log(t_total)
    value = (
        d_bound**2 / t_total**l
        + 2**13 * g_bound**2 * l_smooth**2 * ln_t**3 / (t_total**2 * mu**4)
        + 2**15 * g_bound**2 * l_smooth**2 * n**2 * ln_t**4 / (t_total**3 * mu**4)
    )
    k_required = 128 * (l_smooth / mu) ** 2 * ln_t
    pre = (
        Precondition("l <= 2", "l <= 2", f"l = {l:g}", l <= 2),
        Precondition(
            "epoch count",
            f"K >= 128 (L/mu)^2 lnT = {k_required:.6g}",
            f"K = {k_epochs}",
            k_epochs >= k_required,
        ),
        Precondition(
            "step size",
            "alpha = 4 l lnT / (T mu) (the theorem1 regime)",
            "assumed",
            True,
        ),
    )
    return BoundReport(name="upper_bound_quadratic", bound_value=value, preconditions=pre)


def lower_bound_general(n: int, k_epochs: int, g_bound: float, l_smooth: float) -> BoundReport:
    """Lower bound 2^-56 G^2 n / T^2 with its formal-regime gates."""
    _positive(n=n, k_epochs=k_epochs, g_bound=g_bound, l_smooth=l_smooth)
    t_total = n * k_epochs
    value = 2.0**-56 * g_bound**2 * n / t_total**2
    lo, hi = alpha_window(n, k_epochs, l_smooth)
    pre = (
        Precondition("curvature", "L >= 2^17", f"L = {l_smooth:g}", l_smooth >= 2**17),
        Precondition("epoch count", "K >= 2^14 L", f"K = {k_epochs}", k_epochs >= 2**14 * l_smooth),
        Precondition("component count", "n >= 256, multiple of 4",
                     f"n = {n}", n >= 256 and n % 4 == 0),
        Precondition("step-size window", "1/(nK) <= alpha <= 2^-14/(nL) nonempty",
                     f"({lo:.6g}, {hi:.6g})", lo <= hi),
    )
    return BoundReport(name="lower_bound_general", bound_value=value, preconditions=pre)


def alpha_window(n: int, k_epochs: int, l_smooth: float) -> tuple[float, float]:
    """Step-size window (1/(nK), 2^-14/(nL)); empty whenever lo > hi."""
    _positive(n=n, k_epochs=k_epochs, l_smooth=l_smooth)
    return 1.0 / (n * k_epochs), 2.0**-14 / (n * l_smooth)
