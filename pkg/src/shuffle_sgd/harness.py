"""Monte Carlo sweeps of final error against n or K, with rate fitting.

A sweep fixes one of (n, K), varies the other over a grid, and for each
grid point runs ``repeats`` independent SGDo trajectories from 0 with the
step size given by the configured regime.  The repeat with lineage
(base_seed, grid_index, repeat_index) is bit-identical however the work is
scheduled: grid points may run on a process pool, and per-point statistics
are accumulated with ``math.fsum`` in repeat-index order, so the output is
a function of the config alone.

Emission: a CSV with the fixed header below (17-significant-digit floats,
so values round-trip exactly) and a self-contained log-log SVG with
stderr bands and optional overlay curves.  The SVG is byte-deterministic:
the figure carries no timestamp and hashed element ids use a fixed salt.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import DivergenceError, StepSizeRegime, alpha_of, final_sq_errors, run_batch
from .objectives import family_from_spec

CSV_HEADER = "sweep_var,n,K,T,alpha,repeats,mean_sq_error,stderr,min,max"

# Desk-scale defaults: large enough to separate the n >> K and K >> n
# regimes, small enough for minute-scale runtimes.
DEFAULT_K_GRID = (32, 64, 128, 256)
DEFAULT_N_GRID = (32, 64, 128, 256)
DEFAULT_FIXED_N = 256
DEFAULT_FIXED_K = 256
DEFAULT_REPEATS = 400

SVG_HASH_SALT = "shuffle-sgd"


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: family spec mapping, swept variable, grid, and protocol.

    ``sweep_var`` is "K" (grid of epoch counts at n = fixed) or "N" (grid
    of component counts at K = fixed).  K = 0 grid values are allowed and
    mean "no steps".  ``family`` is a mapping for
    :func:`objectives.family_from_spec`; its n, if any, is overridden by
    the sweep.
    """

    family: dict
    sweep_var: str
    grid: tuple[int, ...]
    fixed: int
    regime: StepSizeRegime
    repeats: int
    base_seed: int = 0
    csv_path: str | None = None
    svg_path: str | None = None

    def __post_init__(self):
        if self.sweep_var not in ("K", "N"):
            raise ValueError(f"sweep_var must be 'K' or 'N', got {self.sweep_var!r}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        for v in self.grid:
            if v != int(v) or v < 0:
                raise ValueError(f"grid values must be nonnegative integers, got {v!r}")
            if v < 1 and self.sweep_var == "N":
                raise ValueError(f"n grid values must be >= 1, got {v}")
        if self.fixed < 1 and self.sweep_var == "K":
            raise ValueError(f"fixed n must be >= 1, got {self.fixed}")
        if self.fixed < 0:
            raise ValueError(f"fixed K must be >= 0, got {self.fixed}")

    def point_nk(self, value: int) -> tuple[int, int]:
        """(n, K) of the grid point with sweep value ``value``."""
        if self.sweep_var == "K":
            return self.fixed, value
        return value, self.fixed


@dataclass(frozen=True)
class SweepPoint:
    """Aggregated final-squared-error statistics of one grid point."""

    n: int
    k_epochs: int
    t_total: int
    alpha: float
    repeats: int
    mean_sq_error: float
    stderr: float
    min_error: float
    max_error: float

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        # Half-ulp slack: the mean is an exact sum rounded once by the
        # final division, so it can sit a rounding step past an endpoint.
        lo = self.min_error * (1.0 - 1e-12)
        hi = self.max_error * (1.0 + 1e-12)
        if not lo <= self.mean_sq_error <= hi:
            raise ValueError(
                f"mean {self.mean_sq_error} outside [{self.min_error}, {self.max_error}]"
            )

    @property
    def sweep_value(self) -> dict[str, int]:
        return {"K": self.k_epochs, "N": self.n}


@dataclass(frozen=True)
class SweepResult:
    """All grid points of one sweep, in grid order."""

    sweep_var: str
    points: tuple[SweepPoint, ...]
    base_seed: int
    regime_label: str
    family: dict

    def values(self) -> list[int]:
        return [p.sweep_value[self.sweep_var] for p in self.points]

    def mean_errors(self) -> list[float]:
        return [p.mean_sq_error for p in self.points]


@dataclass(frozen=True)
class RateFit:
    """Least-squares power-law exponent from a log-log fit."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int


def _mean_stderr_minmax(errs: np.ndarray) -> tuple[float, float, float, float]:
    m = errs.shape[0]
    mean = math.fsum(errs.tolist()) / m
    if m >= 2:
        # Squaring may overflow to inf for finite-but-extreme errors; an
        # infinite stderr is the honest summary of such a run.
        with np.errstate(over="ignore"):
            centered = errs - mean
            var = math.fsum((centered * centered).tolist()) / (m - 1)
        se = math.sqrt(var / m)
    else:
        se = 0.0
    return mean, se, float(errs.min()), float(errs.max())


def _point_task(args) -> tuple[int, SweepPoint | None, tuple | None]:
    """Run one grid point; returns (grid_index, point, divergence info).

    Divergence is returned as data rather than raised so the result
    survives the trip back from a worker process.
    """
    family_spec, sweep_var, value, fixed, regime, repeats, base_seed, grid_index = args
    n, k = (fixed, value) if sweep_var == "K" else (value, fixed)
    family = family_from_spec(family_spec, n=n)
    alpha = 0.0 if k == 0 else alpha_of(regime, n, k, family.constants().mu)
    try:
        finals = run_batch(family, k, alpha, base_seed, grid_index, range(repeats))
    except DivergenceError as exc:
        return grid_index, None, (value, exc.epoch, exc.step, exc.lane)
    errs = final_sq_errors(family, finals)
    mean, se, lo, hi = _mean_stderr_minmax(errs)
    point = SweepPoint(
        n=n,
        k_epochs=k,
        t_total=n * k,
        alpha=alpha,
        repeats=repeats,
        mean_sq_error=mean,
        stderr=se,
        min_error=lo,
        max_error=hi,
    )
    return grid_index, point, None


def run_sweep(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Execute the sweep; deterministic for any worker count.

    Each grid point uses streams (base_seed, grid_index, repeat) for its
    repeats.  A diverged run aborts the whole sweep, naming the grid
    point, epoch, step, and repeat lane.
    """
    tasks = [
        (config.family, config.sweep_var, v, config.fixed, config.regime,
         config.repeats, config.base_seed, gi)
        for gi, v in enumerate(config.grid)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_point_task, tasks))
    else:
        outcomes = [_point_task(t) for t in tasks]
    outcomes.sort(key=lambda o: o[0])
    points = []
    for _, point, failure in outcomes:
        if failure is not None:
            value, epoch, step, lane = failure
            err = DivergenceError(epoch, step, lane)
            err.args = (
                f"sweep aborted at {config.sweep_var}={value}: {err.args[0]}",
            )
            raise err
        points.append(point)
    return SweepResult(
        sweep_var=config.sweep_var,
        points=tuple(points),
        base_seed=config.base_seed,
        regime_label=config.regime.label,
        family=dict(config.family),
    )


def fit_rate(points) -> RateFit:
    """OLS of ln(error) on ln(value) for (value, mean_error) pairs."""
    pts = [(float(v), float(e)) for v, e in points]
    if len(pts) < 2:
        raise ValueError(f"need at least 2 points to fit a rate, got {len(pts)}")
    for v, e in pts:
        if v <= 0 or e <= 0:
            raise ValueError(f"rate fit needs positive values, got ({v}, {e})")
    x = [math.log(v) for v, _ in pts]
    y = [math.log(e) for _, e in pts]
    m = len(pts)
    xm = math.fsum(x) / m
    ym = math.fsum(y) / m
    sxx = math.fsum((xi - xm) ** 2 for xi in x)
    if sxx == 0.0:
        raise ValueError("need at least 2 distinct sweep values")
    sxy = math.fsum((xi - xm) * (yi - ym) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = math.fsum((yi - (intercept + slope * xi)) ** 2 for xi, yi in zip(x, y))
    ss_tot = math.fsum((yi - ym) ** 2 for yi in y)
    r_sq = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    r_sq = min(1.0, max(0.0, r_sq))
    return RateFit(slope=slope, intercept=intercept, r_squared=r_sq, n_points=m)


def reference_curve(result: SweepResult, kind: str, c: float) -> tuple[str, list[float]]:
    """Overlay curve c*n/T^2 or c*n^3/T^3 evaluated on the sweep's grid."""
    values = []
    for p in result.points:
        t = p.t_total
        if kind == "n/T^2":
            values.append(c * p.n / t**2)
        elif kind == "n^3/T^3":
            values.append(c * p.n**3 / t**3)
        else:
            raise ValueError(f"unknown reference curve kind {kind!r}")
    return f"{c:g} {kind}", values


def emit_csv(result: SweepResult, path) -> Path:
    """Write the sweep as CSV; floats carry 17 significant digits."""
    lines = [CSV_HEADER]
    for p in result.points:
        lines.append(
            f"{result.sweep_var},{p.n},{p.k_epochs},{p.t_total},{p.alpha:.17g},"
            f"{p.repeats},{p.mean_sq_error:.17g},{p.stderr:.17g},"
            f"{p.min_error:.17g},{p.max_error:.17g}"
        )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_csv(path) -> tuple[str, tuple[SweepPoint, ...]]:
    """Parse an emitted CSV back into (sweep_var, points)."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing sweep CSV header")
    sweep_var = ""
    points = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 10:
            raise ValueError(f"{path}: malformed row {line!r}")
        sweep_var = cells[0]
        points.append(
            SweepPoint(
                n=int(cells[1]),
                k_epochs=int(cells[2]),
                t_total=int(cells[3]),
                alpha=float(cells[4]),
                repeats=int(cells[5]),
                mean_sq_error=float(cells[6]),
                stderr=float(cells[7]),
                min_error=float(cells[8]),
                max_error=float(cells[9]),
            )
        )
    return sweep_var, tuple(points)


def emit_svg(result: SweepResult, bound_curves, path) -> Path:
    """Render the sweep as a log-log errorbar plot; byte-deterministic.

    ``bound_curves`` is a sequence of (label, values) overlays aligned
    with the grid, e.g. from :func:`reference_curve` or the closed-form
    bound evaluators.
    """
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        xs = result.values()
        if xs:
            ax.errorbar(
                xs,
                result.mean_errors(),
                yerr=[p.stderr for p in result.points],
                fmt="o-",
                capsize=3,
                label="mean final squared error ± stderr",
            )
        for label, values in bound_curves:
            ax.plot(xs, values, "--", label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        xlabel = "K (epochs)" if result.sweep_var == "K" else "n (components)"
        fixed = ""
        if result.points:
            p0 = result.points[0]
            fixed = f", n={p0.n}" if result.sweep_var == "K" else f", K={p0.k_epochs}"
        ax.set_xlabel(xlabel)
        ax.set_ylabel("mean final squared error")
        kind = result.family.get("kind", "?")
        ax.set_title(f"{kind} family, step size {result.regime_label}{fixed}")
        if xs or bound_curves:
            ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
