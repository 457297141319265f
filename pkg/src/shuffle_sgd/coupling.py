"""Monte Carlo checks of the coupling and stability claims behind SGDo.

Four checks, each reducing to rows of (estimate, stderr, bound, pass):

* ``swap_distance_check`` -- two trajectories whose permutations differ by
  one transposition stay within 2*G*alpha of each other at every step of
  an epoch.  The claim is almost-sure, so the assertion is exact per trial
  (tolerance only 1e-12 relative, for floating point).
* ``gradient_gap_check`` -- with the start-of-epoch iterate frozen, the
  conditional expectation of F(x) - f_sigma(i)(x) at the iterate where the
  i-th drawn component is applied is bounded by 2*alpha*G^2 in magnitude.
* ``epoch_drift_check`` -- within one epoch the iterate stays close to the
  epoch's starting point: E||x_i - x_0||^2 <= 5*i*alpha^2*G^2
  + 2*i*alpha*(F(x_0) - F(x*)).
* ``posexp_check`` -- for the asymmetric piecewise family started at 0
  with alpha <= 1/L, every iterate has nonnegative expectation.  The
  symmetric (l_left = 1) variant is a control whose means must straddle 0.

Statistical assertions pass when the estimate respects the bound with a
4*stderr one-sided margin; means and variances are accumulated with
``math.fsum`` over the repeat lanes, so results do not depend on how
repeats would be scheduled.

Stream convention: every check takes a stream (or a run config) whose
lineage (base_seed, sweep_index, repeat_index) acts as a template.  Checks
with a frozen warmup phase run the warmup on the template lineage itself
and give repeat lane t the lineage (base_seed, sweep_index,
repeat_index + 1 + t); checks without a warmup use repeat_index + t.
Lane t is bit-identical to the corresponding scalar-stream run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .engine import RecordMode, RunConfig, _batch_init, _batch_step, run_batch, run_sgdo
from .objectives import (
    PiecewiseFamily,
    Point,
    Product2DFamily,
    QuadraticFamily,
    piecewise_value,
    quad_grad_rows,
)
from .permutation import BatchRng, RngStream, batch_shuffle, swap

CSV_HEADER = "check_name,i,j,estimate,stderr,bound,pass"

# Relative slack on the almost-sure swap bound; everything past this is a
# genuine violation, not rounding.
SWAP_REL_TOL = 1e-12


@dataclass(frozen=True)
class CheckRow:
    """One (i, j) cell of a check: estimate vs. bound with its margin.

    ``margin`` is bound + 4*stderr minus the one-sided test statistic
    (|estimate|, estimate, or -estimate, depending on the check); it is
    nonnegative exactly when the row passes.
    """

    check_name: str
    i: int
    j: int
    estimate: float
    stderr: float
    bound: float
    margin: float
    passed: bool

    def csv_line(self) -> str:
        return (
            f"{self.check_name},{self.i},{self.j},{self.estimate:.17g},"
            f"{self.stderr:.17g},{self.bound:.17g},{int(self.passed)}"
        )


@dataclass(frozen=True)
class CheckReport:
    """All rows of one check plus human-readable violation notes."""

    name: str
    rows: tuple[CheckRow, ...]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def violations(self) -> tuple[CheckRow, ...]:
        return tuple(r for r in self.rows if not r.passed)

    def worst(self) -> CheckRow:
        return min(self.rows, key=lambda r: r.margin)

    def summary(self) -> str:
        status = "PASS" if self.passed else f"FAIL ({len(self.violations)} rows)"
        w = self.worst()
        return (
            f"{self.name}: {status}  rows={len(self.rows)}  "
            f"worst margin {w.margin:.3g} at (i={w.i}, j={w.j})"
        )


def rows_to_csv(rows) -> str:
    """Render check rows as CSV with the fixed 7-column header."""
    lines = [CSV_HEADER]
    lines.extend(r.csv_line() for r in rows)
    return "\n".join(lines) + "\n"


def _mean_stderr(values: NDArray[np.float64]) -> tuple[float, float]:
    """Exact-sum mean and ddof=1 standard error over the lane axis."""
    m = values.shape[0]
    mean = math.fsum(values.tolist()) / m
    if m < 2:
        return mean, 0.0
    with np.errstate(over="ignore"):
        centered = values - mean
        var = math.fsum((centered * centered).tolist()) / (m - 1)
    return mean, math.sqrt(var / m)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _sq_dist(x: NDArray[np.float64], ref: Point) -> NDArray[np.float64]:
    """Per-lane squared Euclidean distance from a fixed reference point."""
    if x.ndim == 1:
        d = x - float(ref[0])
        return d * d
    diff = x - ref
    return np.sum(diff * diff, axis=1)


def _gap_norm(x1: NDArray[np.float64], x2: NDArray[np.float64]) -> NDArray[np.float64]:
    if x1.ndim == 1:
        return np.abs(x1 - x2)
    diff = x1 - x2
    return np.sqrt(np.sum(diff * diff, axis=1))


# -- batch objective values (same dispatch style as the engine's batch step) --


def _batch_full_value(family, x):
    """F(x) for lanes x: (m,) for piecewise, (m, d) otherwise."""
    if isinstance(family, PiecewiseFamily):
        return piecewise_value(x, family.l_left)
    if isinstance(family, QuadraticFamily):
        hx = quad_grad_rows(x, family.hessian, np.zeros(family.dim))
        return 0.5 * np.sum(x * hx, axis=-1) + x @ family.base_linear + family.base_const
    if isinstance(family, Product2DFamily):
        return piecewise_value(x[:, 0], family.spec1.l_left) + piecewise_value(
            x[:, 1], family.spec2.l_left
        )
    raise TypeError(f"no batch value for family type {type(family).__name__}")


def _batch_component_value(family, x, idx):
    """f_idx(x) with a per-lane component index array (1-based)."""
    if isinstance(family, PiecewiseFamily):
        s = np.where(idx <= family.n // 2, 1.0, -1.0)
        return piecewise_value(x, family.l_left) + s * (0.5 * family.g_lin) * x
    if isinstance(family, QuadraticFamily):
        off = family.linear_offsets[idx - 1]
        return _batch_full_value(family, x) + np.sum(off * x, axis=-1)
    if isinstance(family, Product2DFamily):
        s = np.where(idx <= family.n // 2, 1.0, -1.0)
        v1 = piecewise_value(x[:, 0], family.spec1.l_left) + s * (0.5 * family.spec1.g_lin) * x[:, 0]
        v2 = piecewise_value(x[:, 1], family.spec2.l_left) + s * (0.5 * family.spec2.g_lin) * x[:, 1]
        return v1 + v2
    raise TypeError(f"no batch value for family type {type(family).__name__}")


# -- swap coupling -------------------------------------------------------------


@dataclass(frozen=True)
class CoupledPair:
    """Two one-epoch trajectories from the same start, permutations differing
    by the transposition of positions ``swap_positions`` (1-based)."""

    perm_base: NDArray[np.int64]
    perm_swapped: NDArray[np.int64]
    swap_positions: tuple[int, int]
    alpha: float
    iterates_base: NDArray[np.float64]
    iterates_swapped: NDArray[np.float64]
    gaps: NDArray[np.float64]
    bound: float

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max(initial=0.0))

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.bound * (1.0 + SWAP_REL_TOL)


def couple_pair(family, alpha: float, perm, a: int, b: int, init: Point | None = None) -> CoupledPair:
    """Scalar reference: run one epoch under perm and under swap(perm, a, b).

    Both trajectories share alpha, the family, and the initial point
    (default 0).  Gaps are Euclidean distances after each step.
    """
    n = family.n
    perm = np.asarray(perm, dtype=np.int64)
    _require(sorted(perm.tolist()) == list(range(1, n + 1)), "perm must contain 1..n once each")
    _require(1 <= a <= n and 1 <= b <= n, f"swap positions must be in 1..{n}")
    consts = family.constants()
    _require(alpha <= 2.0 / consts.l_smooth, f"need alpha <= 2/L = {2.0 / consts.l_smooth}")
    swapped = swap(perm, a, b)
    x1 = np.zeros(family.dim) if init is None else np.asarray(init, dtype=np.float64).copy()
    x2 = x1.copy()
    path1, path2, gaps = [x1.copy()], [x2.copy()], []
    for i in range(1, n + 1):
        x1 = x1 - alpha * family.component_grad(int(perm[i - 1]), x1)
        x2 = x2 - alpha * family.component_grad(int(swapped[i - 1]), x2)
        path1.append(x1.copy())
        path2.append(x2.copy())
        diff = x1 - x2
        gaps.append(float(np.sqrt(np.sum(diff * diff))))
    return CoupledPair(
        perm_base=perm,
        perm_swapped=swapped,
        swap_positions=(a, b),
        alpha=alpha,
        iterates_base=np.stack(path1),
        iterates_swapped=np.stack(path2),
        gaps=np.array(gaps),
        bound=2.0 * consts.g_bound * alpha,
    )


def swap_distance_check(family, n: int, alpha: float, trials: int, stream: RngStream) -> CheckReport:
    """Exact per-trial check that swapped-permutation trajectories stay
    within 2*G*alpha.

    Trial t draws, from lane lineage (base, sweep, repeat + t): a
    permutation, then two uniform positions a and b.  Both one-epoch
    trajectories start at 0.  Rows give the max gap over all trials after
    each step i; stderr is 0 because the claim is almost-sure.
    """
    _require(n == family.n, f"n = {n} does not match family.n = {family.n}")
    _require(trials >= 1, "need at least one trial")
    consts = family.constants()
    _require(alpha <= 2.0 / consts.l_smooth, f"need alpha <= 2/L = {2.0 / consts.l_smooth}")
    lin = stream.lineage
    batch = BatchRng.from_lineages(
        lin.base_seed, lin.sweep_index, range(lin.repeat_index, lin.repeat_index + trials)
    )
    perms = batch_shuffle(batch, n)
    pos_a = (batch.randbelow(n) + 1).astype(np.int64)
    pos_b = (batch.randbelow(n) + 1).astype(np.int64)
    lanes = np.arange(trials)
    swapped = perms.copy()
    tmp = swapped[lanes, pos_a - 1].copy()
    swapped[lanes, pos_a - 1] = swapped[lanes, pos_b - 1]
    swapped[lanes, pos_b - 1] = tmp

    bound = 2.0 * consts.g_bound * alpha
    tol_bound = bound * (1.0 + SWAP_REL_TOL)
    x1 = _batch_init(family, trials, None)
    x2 = x1.copy()
    rows = []
    notes: list[str] = []
    for i in range(1, n + 1):
        x1 = _batch_step(family, x1, perms[:, i - 1], alpha)
        x2 = _batch_step(family, x2, swapped[:, i - 1], alpha)
        gaps = _gap_norm(x1, x2)
        worst = float(gaps.max(initial=0.0))
        ok = worst <= tol_bound
        if not ok:
            for t in np.nonzero(gaps > tol_bound)[0][:5]:
                notes.append(
                    f"trial {int(t)} (repeat lineage {lin.repeat_index + int(t)}): "
                    f"gap {gaps[t]:.17g} > {bound:.17g} at step {i}; "
                    f"perm {perms[t].tolist()} vs swap of positions "
                    f"({int(pos_a[t])}, {int(pos_b[t])})"
                )
        rows.append(
            CheckRow(
                check_name="swap_distance",
                i=i,
                j=1,
                estimate=worst,
                stderr=0.0,
                bound=bound,
                margin=tol_bound - worst,
                passed=ok,
            )
        )
    return CheckReport(name="swap_distance", rows=tuple(rows), notes=tuple(notes))


# -- gradient gap --------------------------------------------------------------


def gradient_gap_check(
    family, n: int, alpha: float, epochs_warmup: int, repeats: int, stream: RngStream
) -> CheckReport:
    """Conditional mean of F(x) - f_sigma(i)(x) at each within-epoch iterate.

    The warmup (``epochs_warmup`` epochs from 0) runs on the template
    stream itself and its endpoint is frozen; each repeat lane then replays
    one epoch from that point with a fresh permutation.  The gap at row i
    is evaluated at the iterate where the i-th drawn component is applied,
    i.e. before the step that uses it.  Bound: |estimate| <= 2*alpha*G^2
    + 4*stderr.
    """
    _require(n == family.n, f"n = {n} does not match family.n = {family.n}")
    _require(repeats >= 2, "need at least two repeats for a standard error")
    consts = family.constants()
    _require(alpha <= 2.0 / consts.l_smooth, f"need alpha <= 2/L = {2.0 / consts.l_smooth}")
    _require(epochs_warmup >= 0, "epochs_warmup must be >= 0")
    lin = stream.lineage
    warm_cfg = RunConfig(
        family=family,
        k_epochs=epochs_warmup,
        alpha=alpha,
        base_seed=lin.base_seed,
        sweep_index=lin.sweep_index,
        repeat_index=lin.repeat_index,
    )
    x0 = run_sgdo(warm_cfg, stream=stream).final_x

    batch = BatchRng.from_lineages(
        lin.base_seed,
        lin.sweep_index,
        range(lin.repeat_index + 1, lin.repeat_index + 1 + repeats),
    )
    perms = batch_shuffle(batch, n)
    x = _batch_init(family, repeats, x0)
    bound = 2.0 * alpha * consts.g_bound**2
    j = epochs_warmup + 1
    rows = []
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n + 1):
            idx = perms[:, i - 1]
            gaps = _batch_full_value(family, x) - _batch_component_value(family, x, idx)
            est, se = _mean_stderr(gaps)
            limit = bound + 4.0 * se
            rows.append(
                CheckRow(
                    check_name="gradient_gap",
                    i=i,
                    j=j,
                    estimate=est,
                    stderr=se,
                    bound=bound,
                    margin=limit - abs(est),
                    passed=abs(est) <= limit,
                )
            )
            x = _batch_step(family, x, idx, alpha)
    return CheckReport(name="gradient_gap", rows=tuple(rows))


# -- epoch drift ---------------------------------------------------------------


def epoch_drift_check(family, config: RunConfig, repeats: int) -> CheckReport:
    """Mean squared drift within the replayed epoch against its linear bound.

    The replayed epoch is config.k_epochs; the preceding k_epochs - 1
    epochs are run once on the config's own lineage and frozen, so the
    bound 5*i*alpha^2*G^2 + 2*i*alpha*(F(x_0) - F(x*)) conditions on the
    recorded start-of-epoch iterate x_0.
    """
    _require(config.family is family, "config.family must be the same family object")
    _require(config.k_epochs >= 1, "config.k_epochs selects the replayed epoch; need >= 1")
    _require(repeats >= 2, "need at least two repeats for a standard error")
    alpha = config.resolve_alpha()
    consts = family.constants()
    _require(alpha <= 2.0 / consts.l_smooth, f"need alpha <= 2/L = {2.0 / consts.l_smooth}")
    j = config.k_epochs
    warm_cfg = replace(
        config, k_epochs=j - 1, regime=None, alpha=alpha, record_mode=RecordMode.FINAL_ONLY
    )
    x0 = run_sgdo(warm_cfg).final_x
    f_excess = family.eval(x0) - family.eval(family.minimizer())

    drift: dict[int, NDArray[np.float64]] = {}

    def hook(_j, i, _x_prev, _idx, x_new):
        drift[i] = _sq_dist(x_new, x0)

    run_batch(
        family,
        k_epochs=1,
        alpha=alpha,
        base_seed=config.base_seed,
        sweep_index=config.sweep_index,
        repeat_indices=range(config.repeat_index + 1, config.repeat_index + 1 + repeats),
        init=x0,
        step_hook=hook,
    )

    g_sq = consts.g_bound**2
    rows = [
        CheckRow(
            check_name="epoch_drift", i=0, j=j, estimate=0.0, stderr=0.0,
            bound=0.0, margin=0.0, passed=True,
        )
    ]
    for i in range(1, family.n + 1):
        est, se = _mean_stderr(drift[i])
        bound = 5.0 * i * alpha**2 * g_sq + 2.0 * i * alpha * f_excess
        limit = bound + 4.0 * se
        rows.append(
            CheckRow(
                check_name="epoch_drift",
                i=i,
                j=j,
                estimate=est,
                stderr=se,
                bound=bound,
                margin=limit - est,
                passed=est <= limit,
            )
        )
    return CheckReport(name="epoch_drift", rows=tuple(rows))


# -- sign of the expected iterate ----------------------------------------------


def posexp_check(
    family: PiecewiseFamily,
    config: RunConfig,
    repeats: int,
    symmetric_control: bool | None = None,
) -> CheckReport:
    """Mean iterate sign over full runs of the piecewise family from 0.

    For l_left > 1 every recorded (i, j) must have mean x >= -4*stderr
    (one-sided).  With l_left = 1 the distribution of x is symmetric about
    0, so the check flips to the two-sided control |mean| <= 4*stderr;
    ``symmetric_control`` overrides the automatic choice.
    """
    if not isinstance(family, PiecewiseFamily):
        raise TypeError("posexp_check needs a 1-D piecewise family")
    _require(config.family is family, "config.family must be the same family object")
    _require(repeats >= 2, "need at least two repeats for a standard error")
    alpha = config.resolve_alpha()
    _require(alpha <= 1.0 / family.l_left, f"need alpha <= 1/L = {1.0 / family.l_left}")
    _require(not np.any(config.initial_point()), "initial point must be 0")
    if symmetric_control is None:
        symmetric_control = family.l_left == 1.0
    name = "posexp_control" if symmetric_control else "posexp"

    iterates: dict[tuple[int, int], NDArray[np.float64]] = {}

    def hook(j, i, _x_prev, _idx, x_new):
        iterates[(j, i)] = x_new.copy()

    run_batch(
        family,
        k_epochs=config.k_epochs,
        alpha=alpha,
        base_seed=config.base_seed,
        sweep_index=config.sweep_index,
        repeat_indices=range(config.repeat_index, config.repeat_index + repeats),
        step_hook=hook,
    )

    rows = [
        CheckRow(
            check_name=name, i=0, j=0, estimate=0.0, stderr=0.0,
            bound=0.0, margin=0.0, passed=True,
        )
    ]
    for (j, i), values in sorted(iterates.items()):
        est, se = _mean_stderr(values)
        if symmetric_control:
            margin = 4.0 * se - abs(est)
        else:
            margin = est + 4.0 * se
        rows.append(
            CheckRow(
                check_name=name,
                i=i,
                j=j,
                estimate=est,
                stderr=se,
                bound=0.0,
                margin=margin,
                passed=margin >= 0.0,
            )
        )
    return CheckReport(name=name, rows=tuple(rows))
