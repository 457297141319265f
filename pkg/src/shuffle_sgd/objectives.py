"""Function families: finite sums f_1..f_n whose mean is a known objective F.

Three constructions are provided, each with component gradients, the full
gradient, exact minimizers, and the constants (mu, L, G, D) under which the
convergence statements operate:

* ``PiecewiseFamily`` -- the 1-D lower-bound construction.  The mean is
  F(x) = x^2/2 for x >= 0 and L x^2/2 for x < 0.  Components of the first
  kind (i <= n/2) add a +Gx/2 linear term, second kind -Gx/2; their
  minimizers are -G/2L and G/2.  With l_left = 1 the family is symmetric
  (the "F2" family).
* ``QuadraticFamily`` -- components share one Hessian H and differ by
  linear offsets b_i with sum_i b_i = 0 exactly, so the mean is
  F(x) = x'Hx/2 + b'x + c.
* ``Product2DFamily`` -- component i is f_{1,i}(x1) + f_{2,i}(x2) for two
  piecewise families sharing n (the second with l_left = 1).

Branch convention at the piecewise kink: x = 0 takes the x >= 0 branch.
Every evaluation path (scalar and batch) goes through the module-level
``piecewise_*`` / ``quad_grad_rows`` helpers so results are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .permutation import RngStream, derive_stream

Point = NDArray[np.float64]

# Reserved sweep index for family construction streams, so drawing linear
# offsets never collides with run streams (whose sweep indices are small
# grid positions).
FAMILY_STREAM_INDEX = 2**31 - 1


@dataclass(frozen=True)
class AssumptionConstants:
    """Constants of the standing assumptions.

    mu: strong convexity of the mean F; l_smooth: gradient Lipschitz
    constant of every component; g_bound: gradient norm cap on the domain
    the iterates occupy; d_bound: radius of that domain around x*.
    """

    mu: float
    l_smooth: float
    g_bound: float
    d_bound: float

    def __post_init__(self):
        if not (0 < self.mu <= self.l_smooth):
            raise ValueError(f"need 0 < mu <= l_smooth, got ({self.mu}, {self.l_smooth})")
        if self.g_bound <= 0 or self.d_bound <= 0:
            raise ValueError("g_bound and d_bound must be positive")
        for v in (self.mu, self.l_smooth, self.g_bound, self.d_bound):
            if not math.isfinite(v):
                raise ValueError("constants must be finite")


def piecewise_slope(x, l_left: float):
    """Curvature factor of the piecewise base: l_left on x < 0, 1 on x >= 0."""
    return np.where(x < 0.0, l_left, 1.0)


def piecewise_value(x, l_left: float):
    """Base value x^2/2 (x >= 0) or l_left x^2/2 (x < 0), elementwise."""
    return np.where(x < 0.0, 0.5 * l_left, 0.5) * x * x


def quad_grad_rows(x, hessian: NDArray[np.float64], lin):
    """H x + lin for x of shape (..., d), accumulated in fixed column order.

    The explicit loop keeps the floating-point evaluation order identical
    for scalar (d,) and batch (m, d) inputs.
    """
    d = hessian.shape[0]
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for r in range(d):
        acc = hessian[r, 0] * x[..., 0]
        for c in range(1, d):
            acc = acc + hessian[r, c] * x[..., c]
        out[..., r] = acc
    return out + lin


@dataclass(frozen=True)
class PiecewiseFamily:
    """Lower-bound family: n components, half +G/2 linear term, half -G/2."""

    n: int
    l_left: float
    g_lin: float

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(f"n must be even and >= 2, got {self.n}")
        if self.l_left < 1:
            raise ValueError(f"l_left must be >= 1, got {self.l_left}")
        if self.g_lin <= 0:
            raise ValueError(f"g_lin must be positive, got {self.g_lin}")

    @property
    def dim(self) -> int:
        return 1

    def kind(self, i: int) -> int:
        """+1 for first-kind components (i <= n/2), -1 for second kind."""
        self._check_index(i)
        return 1 if i <= self.n // 2 else -1

    def component_grad(self, i: int, x: Point) -> Point:
        s = self.kind(i)
        return piecewise_slope(x, self.l_left) * x + s * (0.5 * self.g_lin)

    def full_grad(self, x: Point) -> Point:
        return piecewise_slope(x, self.l_left) * x

    def eval(self, x: Point) -> float:
        return float(piecewise_value(x, self.l_left)[0])

    def eval_component(self, i: int, x: Point) -> float:
        s = self.kind(i)
        return float((piecewise_value(x, self.l_left) + s * (0.5 * self.g_lin) * x)[0])

    def minimizer(self) -> Point:
        return np.zeros(1)

    def constants(self) -> AssumptionConstants:
        g = self.g_lin
        return AssumptionConstants(
            mu=1.0,
            l_smooth=self.l_left,
            g_bound=g,
            d_bound=g / 2 + g / (2 * self.l_left),
        )

    def _check_index(self, i: int) -> None:
        if not (1 <= i <= self.n):
            raise ValueError(f"component index must be in 1..{self.n}, got {i}")


def make_f2(n: int, g_lin: float = 1.0) -> PiecewiseFamily:
    """The symmetric variant: piecewise family with left curvature 1."""
    return PiecewiseFamily(n=n, l_left=1.0, g_lin=g_lin)


def make_linear_offsets(n: int, d: int, g_lin: float, stream: RngStream) -> NDArray[np.float64]:
    """n offset vectors with exact zero sum and max Euclidean norm <= g_lin/2.

    Offsets come in antithetic pairs (b, -b) drawn uniformly from
    [-G/2, G/2]^d, plus a zero vector when n is odd; pairing makes the sum
    exactly zero in floating point, and stays exact under the sign-symmetric
    rescaling that enforces the norm cap.
    """
    half = n // 2
    draws = np.empty((half, d))
    for r in range(half):
        for c in range(d):
            draws[r, c] = stream.uniform(-g_lin / 2, g_lin / 2)
    offsets = np.concatenate([draws, -draws], axis=0)
    if n % 2 == 1:
        offsets = np.concatenate([offsets, np.zeros((1, d))], axis=0)
    norms = np.sqrt(np.sum(offsets * offsets, axis=1))
    max_norm = float(norms.max(initial=0.0))
    if max_norm > g_lin / 2:
        offsets = offsets * ((g_lin / 2) / max_norm)
    return offsets


@dataclass(frozen=True)
class QuadraticFamily:
    """Shared-Hessian quadratic family: f_i(x) = x'Hx/2 + (b + b_i)'x + c."""

    n: int
    hessian: NDArray[np.float64]
    base_linear: NDArray[np.float64]
    base_const: float
    linear_offsets: NDArray[np.float64]
    g_bound: float
    d_bound: float
    component_linear: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.hessian, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hessian must be a square matrix")
        if not np.array_equal(h, h.T):
            raise ValueError("hessian must be symmetric")
        d = h.shape[0]
        if self.base_linear.shape != (d,):
            raise ValueError(f"base_linear must have shape ({d},)")
        if self.linear_offsets.shape != (self.n, d):
            raise ValueError(f"linear_offsets must have shape ({self.n}, {d})")
        eigs = np.linalg.eigvalsh(h)
        if eigs[0] <= 0:
            raise ValueError(f"hessian must be positive definite, min eigenvalue {eigs[0]}")
        for c in range(d):
            if math.fsum(self.linear_offsets[:, c]) != 0.0:
                raise ValueError("linear offsets must sum to zero exactly")
        object.__setattr__(self, "component_linear", self.base_linear + self.linear_offsets)

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]

    def component_grad(self, i: int, x: Point) -> Point:
        self._check_index(i)
        return quad_grad_rows(x, self.hessian, self.component_linear[i - 1])

    def full_grad(self, x: Point) -> Point:
        return quad_grad_rows(x, self.hessian, self.base_linear)

    def eval(self, x: Point) -> float:
        hx = quad_grad_rows(x, self.hessian, np.zeros(self.dim))
        return float(0.5 * np.dot(x, hx) + np.dot(self.base_linear, x) + self.base_const)

    def eval_component(self, i: int, x: Point) -> float:
        self._check_index(i)
        return self.eval(x) + float(np.dot(self.linear_offsets[i - 1], x))

    def minimizer(self) -> Point:
        return np.linalg.solve(self.hessian, -self.base_linear)

    def constants(self) -> AssumptionConstants:
        eigs = np.linalg.eigvalsh(self.hessian)
        return AssumptionConstants(
            mu=float(eigs[0]),
            l_smooth=float(eigs[-1]),
            g_bound=self.g_bound,
            d_bound=self.d_bound,
        )

    def _check_index(self, i: int) -> None:
        if not (1 <= i <= self.n):
            raise ValueError(f"component index must be in 1..{self.n}, got {i}")


def make_quadratic(
    n: int,
    hessian,
    base_linear=None,
    base_const: float = 0.0,
    g_bound: float = 1.0,
    d_bound: float = 1.0,
    seed: int = 0,
) -> QuadraticFamily:
    """Quadratic family with seeded offsets (lineage (seed, FAMILY_STREAM_INDEX, 0))."""
    h = np.atleast_2d(np.asarray(hessian, dtype=np.float64))
    d = h.shape[0]
    b = np.zeros(d) if base_linear is None else np.asarray(base_linear, dtype=np.float64)
    stream = derive_stream(seed, FAMILY_STREAM_INDEX, 0)
    offsets = make_linear_offsets(n, d, g_bound, stream)
    return QuadraticFamily(
        n=n,
        hessian=h,
        base_linear=b,
        base_const=base_const,
        linear_offsets=offsets,
        g_bound=g_bound,
        d_bound=d_bound,
    )


@dataclass(frozen=True)
class Product2DFamily:
    """Coordinatewise product of two piecewise families sharing n."""

    spec1: PiecewiseFamily
    spec2: PiecewiseFamily

    def __post_init__(self):
        if self.spec1.n != self.spec2.n:
            raise ValueError("both sub-families must share n")

    @property
    def n(self) -> int:
        return self.spec1.n

    @property
    def dim(self) -> int:
        return 2

    def component_grad(self, i: int, x: Point) -> Point:
        g1 = self.spec1.component_grad(i, x[0:1])
        g2 = self.spec2.component_grad(i, x[1:2])
        return np.concatenate([g1, g2])

    def full_grad(self, x: Point) -> Point:
        g1 = self.spec1.full_grad(x[0:1])
        g2 = self.spec2.full_grad(x[1:2])
        return np.concatenate([g1, g2])

    def eval(self, x: Point) -> float:
        return self.spec1.eval(x[0:1]) + self.spec2.eval(x[1:2])

    def eval_component(self, i: int, x: Point) -> float:
        return self.spec1.eval_component(i, x[0:1]) + self.spec2.eval_component(i, x[1:2])

    def minimizer(self) -> Point:
        return np.zeros(2)

    def constants(self) -> AssumptionConstants:
        c1 = self.spec1.constants()
        c2 = self.spec2.constants()
        # Coordinatewise bounds combine in the Euclidean norm.
        return AssumptionConstants(
            mu=min(c1.mu, c2.mu),
            l_smooth=max(c1.l_smooth, c2.l_smooth),
            g_bound=math.hypot(c1.g_bound, c2.g_bound),
            d_bound=math.hypot(c1.d_bound, c2.d_bound),
        )


def make_product2d(n: int, l_left: float = 4.0, g_lin: float = 1.0) -> Product2DFamily:
    """Product family: first coordinate with curvature l_left, second with 1."""
    return Product2DFamily(
        spec1=PiecewiseFamily(n=n, l_left=l_left, g_lin=g_lin),
        spec2=make_f2(n, g_lin),
    )


def family_from_spec(spec: dict, n: int | None = None):
    """Build a family from a config mapping.

    Recognized keys: kind ("piecewise" | "f2" | "product2d" | "quadratic"),
    n, L, G; quadratic additionally hessian (nested list or scalar),
    b (base linear), c (base constant), D, seed.  An explicit ``n``
    argument overrides the mapping (used by sweeps).
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise ValueError("family spec needs a 'kind' key")
    n_val = n if n is not None else spec.pop("n", None)
    if n is not None:
        spec.pop("n", None)
    if n_val is None:
        raise ValueError("family spec needs 'n'")
    g = float(spec.pop("G", 1.0))
    if kind == "piecewise":
        l_left = float(spec.pop("L", 4.0))
        family = PiecewiseFamily(n=int(n_val), l_left=l_left, g_lin=g)
    elif kind == "f2":
        spec.pop("L", None)
        family = make_f2(int(n_val), g)
    elif kind == "product2d":
        l_left = float(spec.pop("L", 4.0))
        family = make_product2d(int(n_val), l_left, g)
    elif kind == "quadratic":
        hessian = spec.pop("hessian", 1.0)
        family = make_quadratic(
            n=int(n_val),
            hessian=hessian,
            base_linear=spec.pop("b", None),
            base_const=float(spec.pop("c", 0.0)),
            g_bound=g,
            d_bound=float(spec.pop("D", 1.0)),
            seed=int(spec.pop("seed", 0)),
        )
    else:
        raise ValueError(f"unknown family kind {kind!r}")
    if spec:
        raise ValueError(f"unknown family spec keys: {sorted(spec)}")
    return family
