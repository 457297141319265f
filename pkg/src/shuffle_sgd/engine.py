"""Epoch-shuffled SGD: step-size regimes, the epoch loop, and recording.

One run is T = n*K constant-step-size iterations
x <- x - alpha * grad f_sigma(x), where each epoch j draws a fresh uniform
permutation sigma^j of the n components from the run's stream (or, for the
with-replacement baseline, each of the T steps draws a uniform index).

The scalar path (``run_sgdo``) is the reference implementation.  The batch
path (``run_batch``) steps many repeats in lockstep for Monte Carlo work
and is bit-identical lane-for-lane: both paths evaluate gradients through
the shared helpers in ``objectives`` with the same expression structure.

All logarithms in step-size formulas are natural logs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .objectives import (
    PiecewiseFamily,
    Point,
    Product2DFamily,
    QuadraticFamily,
    piecewise_slope,
    quad_grad_rows,
)
from .permutation import BatchRng, RngStream, batch_shuffle, derive_stream, shuffle


class DivergenceError(RuntimeError):
    """An iterate became non-finite (signals a mis-set step size)."""

    def __init__(self, epoch: int, step: int, lane: int | None = None):
        self.epoch = epoch
        self.step = step
        self.lane = lane
        where = f"epoch {epoch}, step {step}"
        if lane is not None:
            where += f", repeat lane {lane}"
        super().__init__(f"iterate diverged (non-finite) at {where}")


_REGIME_KINDS = ("1/T", "lnT/T", "1/n", "theorem1")


@dataclass(frozen=True)
class StepSizeRegime:
    """Constant step-size rule; alpha_of turns it into a number given (n, K, mu)."""

    kind: str
    c: float = 1.0
    l: float = 2.0

    def __post_init__(self):
        if self.kind not in _REGIME_KINDS:
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind == "lnT/T" and not self.c > 0:
            raise ValueError(f"lnT/T regime needs c > 0, got {self.c}")
        if self.kind == "theorem1" and self.l > 2:
            raise ValueError(f"theorem1 regime needs l <= 2, got {self.l}")

    @classmethod
    def recip_t(cls) -> "StepSizeRegime":
        return cls("1/T")

    @classmethod
    def log_over_t(cls, c: float) -> "StepSizeRegime":
        return cls("lnT/T", c=c)

    @classmethod
    def recip_n(cls) -> "StepSizeRegime":
        return cls("1/n")

    @classmethod
    def theorem1(cls, l: float) -> "StepSizeRegime":
        return cls("theorem1", l=l)

    @property
    def label(self) -> str:
        if self.kind == "lnT/T":
            return f"{self.c:g}lnT/T"
        if self.kind == "theorem1":
            return f"theorem1(l={self.l:g})"
        return self.kind


def parse_regime(text: str) -> StepSizeRegime:
    """Parse a regime label: 1/T, 1/n, [c]lnT/T (log accepted), theorem1[(l)]."""
    t = text.strip().replace(" ", "")
    if t == "1/T":
        return StepSizeRegime.recip_t()
    if t == "1/n":
        return StepSizeRegime.recip_n()
    m = re.fullmatch(r"([0-9.]*)(?:ln|log)T/T", t)
    if m:
        return StepSizeRegime.log_over_t(float(m.group(1)) if m.group(1) else 1.0)
    m = re.fullmatch(r"theorem1(?:\((?:l=)?([0-9.]+)\))?", t)
    if m:
        return StepSizeRegime.theorem1(float(m.group(1)) if m.group(1) else 2.0)
    raise ValueError(f"cannot parse step-size regime {text!r}")


def alpha_of(regime: StepSizeRegime, n: int, k_epochs: int, mu: float) -> float:
    """Constant step size for a whole run of K epochs over n components."""
    if n < 1 or k_epochs < 1:
        raise ValueError(f"need n, K >= 1, got n={n}, K={k_epochs}")
    if mu <= 0:
        raise ValueError(f"need mu > 0, got {mu}")
    t_total = n * k_epochs
    if regime.kind == "1/T":
        return 1.0 / t_total
    if regime.kind == "lnT/T":
        return regime.c * math.log(t_total) / t_total
    if regime.kind == "1/n":
        return 1.0 / n
    return 4.0 * regime.l * math.log(t_total) / (t_total * mu)


class RecordMode(Enum):
    FINAL_ONLY = "final"
    PER_EPOCH = "epoch"
    PER_STEP = "step"


@dataclass
class RunConfig:
    """One SGDo run: family, epochs, step size, init, recording, lineage.

    Exactly one of ``regime`` / ``alpha`` sets the step size.  K = 0 is
    allowed and performs no steps.  The stream lineage is
    (base_seed, sweep_index, repeat_index).
    """

    family: object
    k_epochs: int
    regime: StepSizeRegime | None = None
    alpha: float | None = None
    init: Point | None = None
    record_mode: RecordMode = RecordMode.FINAL_ONLY
    base_seed: int = 0
    sweep_index: int = 0
    repeat_index: int = 0

    def __post_init__(self):
        if self.k_epochs < 0:
            raise ValueError(f"K must be >= 0, got {self.k_epochs}")
        if (self.regime is None) == (self.alpha is None) and self.k_epochs > 0:
            raise ValueError("set exactly one of regime or alpha")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")

    def resolve_alpha(self) -> float:
        if self.k_epochs == 0:
            return 0.0
        if self.alpha is not None:
            return self.alpha
        mu = self.family.constants().mu
        return alpha_of(self.regime, self.family.n, self.k_epochs, mu)

    def initial_point(self) -> Point:
        if self.init is None:
            return np.zeros(self.family.dim)
        init = np.asarray(self.init, dtype=np.float64)
        if init.shape != (self.family.dim,):
            raise ValueError(f"init must have shape ({self.family.dim},)")
        return init.copy()


@dataclass
class Trajectory:
    """Result of one run; records hold (epoch, step, iterate copy) tuples.

    PER_EPOCH records each epoch boundary (j, 0) and (j, n); PER_STEP also
    records every intermediate step.  The final squared error is
    ||x_T - x*||^2 against the family's exact minimizer.
    """

    final_x: Point
    final_sq_error: float
    alpha: float
    k_epochs: int
    records: list = field(default_factory=list)

    def record_map(self) -> dict:
        return {(j, i): x for j, i, x in self.records}


def sgdo_step(family, i_component: int, x: Point, alpha: float) -> Point:
    """One step x - alpha * grad f_i(x); raises DivergenceError on non-finite."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    # Overflow to inf is the divergence signal; the isfinite check below
    # turns it into an error, so the IEEE warnings stay silent.
    with np.errstate(over="ignore", invalid="ignore"):
        new = x - alpha * family.component_grad(i_component, x)
    if not np.all(np.isfinite(new)):
        raise DivergenceError(epoch=0, step=i_component)
    return new


def _finish(family, x: Point, alpha: float, k_epochs: int, records: list) -> Trajectory:
    x_star = family.minimizer()
    # A finite iterate whose squared error overflows reports inf honestly.
    with np.errstate(over="ignore"):
        err = float(np.sum((x - x_star) ** 2))
    return Trajectory(final_x=x, final_sq_error=err, alpha=alpha, k_epochs=k_epochs, records=records)


def run_sgdo(config: RunConfig, stream: RngStream | None = None) -> Trajectory:
    """Reference scalar run: K epochs, fresh permutation per epoch.

    ``stream`` may be injected for tests; by default it is derived from the
    config's lineage.  Exactly K permutations are consumed.
    """
    family = config.family
    n = family.n
    alpha = config.resolve_alpha()
    if stream is None:
        stream = derive_stream(config.base_seed, config.sweep_index, config.repeat_index)
    x = config.initial_point()
    records: list = []
    mode = config.record_mode
    if mode is not RecordMode.FINAL_ONLY:
        records.append((0, 0, x.copy()))
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, config.k_epochs + 1):
            perm = shuffle(stream, n)
            if mode is not RecordMode.FINAL_ONLY:
                records.append((j, 0, x.copy()))
            for i in range(1, n + 1):
                x = x - alpha * family.component_grad(int(perm[i - 1]), x)
                if not np.all(np.isfinite(x)):
                    raise DivergenceError(epoch=j, step=i)
                if mode is RecordMode.PER_STEP or (mode is RecordMode.PER_EPOCH and i == n):
                    records.append((j, i, x.copy()))
    return _finish(family, x, alpha, config.k_epochs, records)


def run_sgd_with_replacement(config: RunConfig, stream: RngStream | None = None) -> Trajectory:
    """Baseline: each of the T steps draws a uniform component index."""
    family = config.family
    n = family.n
    alpha = config.resolve_alpha()
    if stream is None:
        stream = derive_stream(config.base_seed, config.sweep_index, config.repeat_index)
    x = config.initial_point()
    records: list = []
    mode = config.record_mode
    if mode is not RecordMode.FINAL_ONLY:
        records.append((0, 0, x.copy()))
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, config.k_epochs + 1):
            if mode is not RecordMode.FINAL_ONLY:
                records.append((j, 0, x.copy()))
            for i in range(1, n + 1):
                idx = stream.randbelow(n) + 1
                x = x - alpha * family.component_grad(idx, x)
                if not np.all(np.isfinite(x)):
                    raise DivergenceError(epoch=j, step=i)
                if mode is RecordMode.PER_STEP or (mode is RecordMode.PER_EPOCH and i == n):
                    records.append((j, i, x.copy()))
    return _finish(family, x, alpha, config.k_epochs, records)


# -- batch path ---------------------------------------------------------------
#
# State layout per family: piecewise (m,), quadratic (m, d), product2d (m, 2).
# Each step applies the same floating-point expressions as the scalar path.


def _batch_init(family, m: int, init: Point | None) -> NDArray[np.float64]:
    if init is None:
        init = np.zeros(family.dim)
    if isinstance(family, PiecewiseFamily):
        return np.full(m, float(init[0]))
    return np.tile(np.asarray(init, dtype=np.float64), (m, 1))


def _batch_step(family, x, idx, alpha: float):
    """Apply component step for per-lane indices idx (1-based)."""
    if isinstance(family, PiecewiseFamily):
        s = np.where(idx <= family.n // 2, 1.0, -1.0)
        g = piecewise_slope(x, family.l_left) * x + s * (0.5 * family.g_lin)
        return x - alpha * g
    if isinstance(family, QuadraticFamily):
        lin = family.component_linear[idx - 1]
        g = quad_grad_rows(x, family.hessian, lin)
        return x - alpha * g
    if isinstance(family, Product2DFamily):
        s = np.where(idx <= family.n // 2, 1.0, -1.0)
        out = np.empty_like(x)
        for c, sub in enumerate((family.spec1, family.spec2)):
            xc = x[:, c]
            g = piecewise_slope(xc, sub.l_left) * xc + s * (0.5 * sub.g_lin)
            out[:, c] = xc - alpha * g
        return out
    raise TypeError(f"no batch step for family type {type(family).__name__}")


def run_batch(
    family,
    k_epochs: int,
    alpha: float,
    base_seed: int,
    sweep_index: int,
    repeat_indices: range,
    init: Point | None = None,
    with_replacement: bool = False,
    step_hook=None,
) -> NDArray[np.float64]:
    """Run many repeats in lockstep; returns the final iterates.

    Lane r follows the stream with lineage (base_seed, sweep_index,
    repeat_indices[r]) and is bit-identical to the corresponding scalar
    run.  ``step_hook(j, i, x_prev, idx, x_new)`` is called after every
    step with read-only views, for Monte Carlo accumulators.

    Shape of the result: (m,) for 1-D piecewise families, else (m, d).
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    n = family.n
    m = len(repeat_indices)
    batch = BatchRng.from_lineages(base_seed, sweep_index, repeat_indices)
    x = _batch_init(family, m, init)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, k_epochs + 1):
            if with_replacement:
                perms = None
            else:
                perms = batch_shuffle(batch, n)
            for i in range(1, n + 1):
                idx = batch.randbelow(n) + 1 if with_replacement else perms[:, i - 1]
                x_new = _batch_step(family, x, idx, alpha)
                if step_hook is not None:
                    step_hook(j, i, x, idx, x_new)
                x = x_new
            if not np.all(np.isfinite(x)):
                lane = int(np.nonzero(~np.isfinite(np.atleast_2d(x.T)).all(axis=0))[0][0])
                raise DivergenceError(epoch=j, step=n, lane=lane)
    return x


def final_sq_errors(family, finals: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-lane squared distance of final iterates to the minimizer."""
    x_star = family.minimizer()
    if finals.ndim == 1:
        d = finals - float(x_star[0])
        return d * d
    diff = finals - x_star
    return np.sum(diff * diff, axis=1)
