"""Discretized probability measures on [0, 1] and [0, 1]^2.

Every measure lives on a uniform partition of the type space into ``n``
cells.  Masses are stored per cell; inside a cell the measure is assumed to
follow a fixed *cell shape* (the restriction of a marginal CDF to the cell).
That convention lets transfers be averaged exactly over cells instead of
being sampled at midpoints, so expectations computed on the grid are the
continuum expectations of a piecewise-constant likelihood ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import rel_entr

from ._quad import cumulative_integral, gauss_legendre_unit

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition of [0, 1] into ``n`` cells."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.n!r}")

    @property
    def width(self) -> float:
        return 1.0 / self.n

    @property
    def weight(self) -> float:
        return 1.0 / self.n

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n

    def cell_of(self, x):
        """Index of the cell containing ``x`` (the top edge belongs to the last cell)."""
        idx = np.floor(np.asarray(x, dtype=float) * self.n).astype(int)
        return np.clip(idx, 0, self.n - 1)


def _check_masses(mass, shape):
    mass = np.asarray(mass, dtype=float)
    if mass.shape != shape:
        raise ValueError(f"mass array has shape {mass.shape}, expected {shape}")
    if np.any(mass < 0):
        raise ValueError("masses must be nonnegative")
    total = mass.sum()
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"masses sum to {total!r}, not 1")
    mass = mass.copy()
    mass.setflags(write=False)
    return mass


@dataclass(frozen=True, eq=False)
class Density1D:
    grid: Grid1D
    mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", _check_masses(self.mass, (self.grid.n,)))

    @property
    def cdf(self) -> np.ndarray:
        """Cumulative mass at the right edge of each cell."""
        return np.cumsum(self.mass)


@dataclass(frozen=True, eq=False)
class Density2D:
    grid: Grid1D
    mass: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        object.__setattr__(self, "mass", _check_masses(self.mass, (n, n)))

    def marginal(self, axis=0) -> Density1D:
        m = self.mass.sum(axis=1 - axis)
        return Density1D(self.grid, m / m.sum())

    def is_product(self, tol=1e-12) -> bool:
        outer = np.outer(self.mass.sum(axis=1), self.mass.sum(axis=0))
        return bool(np.max(np.abs(outer - self.mass)) <= tol)


# --------------------------------------------------------------------------
# marginal CDF families


class Marginal:
    """A strictly increasing CDF on [0, 1] with F(0) = 0 and F(1) = 1."""

    name = "marginal"

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def integrated_cdf(self, x):
        """``int_0^x F(z) dz``."""
        return cumulative_integral(self.cdf, x)

    def log_survival_integral(self, x):
        """``int_0^x log(1 - F(z)) dz`` for x < 1.

        Split as ``log(1 - z) + log((1 - F) / (1 - z))``: the first part has a
        closed form and the second is smooth up to z = 1 when f(1) > 0.
        """
        x = np.asarray(x, dtype=float)

        def smooth(z):
            return np.log1p(-self.cdf(z)) - np.log1p(-z)

        with np.errstate(divide="ignore"):
            closed = -(1.0 - x) * np.log1p(-x) - x
        return closed + cumulative_integral(smooth, x, grade=4)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class PowerMarginal(Marginal):
    """F(z) = z**alpha."""

    def __init__(self, alpha):
        if not alpha > 0:
            raise ValueError(f"power family needs alpha > 0, got {alpha!r}")
        self.alpha = float(alpha)
        self.name = f"power({self.alpha:g})"

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** self.alpha

    def pdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return self.alpha * x ** (self.alpha - 1.0)

    def ppf(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0) ** (1.0 / self.alpha)

    def integrated_cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** (self.alpha + 1.0) / (self.alpha + 1.0)

    def log_survival_integral(self, x):
        if self.alpha == 1.0:
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore"):
                return -(1.0 - x) * np.log1p(-x) - x
        return super().log_survival_integral(x)


class TabulatedMarginal(Marginal):
    """Piecewise-linear CDF through tabulated (theta, F(theta)) pairs."""

    def __init__(self, theta, values, name="tabulated"):
        theta = np.asarray(theta, dtype=float)
        values = np.asarray(values, dtype=float)
        if theta.ndim != 1 or theta.shape != values.shape or theta.size < 2:
            raise ValueError("need matching 1-d arrays of at least two points")
        if theta[0] != 0.0 or theta[-1] != 1.0:
            raise ValueError("tabulated CDF must start at theta=0 and end at theta=1")
        if values[0] != 0.0 or values[-1] != 1.0:
            raise ValueError("tabulated CDF must have F(0)=0 and F(1)=1")
        bad_x = np.flatnonzero(np.diff(theta) <= 0)
        if bad_x.size:
            raise ValueError(f"theta values not strictly increasing at index {bad_x[0] + 1}")
        bad = np.flatnonzero(np.diff(values) <= 0)
        if bad.size:
            k = bad[0]
            raise ValueError(
                f"CDF not strictly increasing between theta={theta[k]:g} and theta={theta[k + 1]:g}"
            )
        self.theta = theta
        self.values = values
        self.slopes = np.diff(values) / np.diff(theta)
        self.name = name

    def cdf(self, x):
        return np.interp(x, self.theta, self.values)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.theta, x, side="right") - 1, 0, self.slopes.size - 1)
        return self.slopes[k]

    def ppf(self, u):
        return np.interp(u, self.values, self.theta)


class CallableMarginal(Marginal):
    """Wraps a user CDF callable; density by central differences, inverse by bisection."""

    def __init__(self, func, name="callable", check_points=10001):
        self.func = func
        self.name = name
        z = np.linspace(0.0, 1.0, check_points)
        fz = np.asarray(func(z), dtype=float)
        if abs(fz[0]) > 1e-12 or abs(fz[-1] - 1.0) > 1e-12:
            raise ValueError(f"CDF must satisfy F(0)=0 and F(1)=1, got {fz[0]!r} and {fz[-1]!r}")
        bad = np.flatnonzero(np.diff(fz) <= 0)
        if bad.size:
            raise ValueError(f"CDF not strictly increasing near theta={z[bad[0]]:.6g}")

    def cdf(self, x):
        return np.asarray(self.func(np.clip(np.asarray(x, dtype=float), 0.0, 1.0)), dtype=float)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        step = 1e-6
        lo = np.clip(x - step, 0.0, 1.0)
        hi = np.clip(x + step, 0.0, 1.0)
        return (self.cdf(hi) - self.cdf(lo)) / (hi - lo)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


UNIFORM = PowerMarginal(1.0)


def as_marginal(spec) -> Marginal:
    if isinstance(spec, Marginal):
        return spec
    if callable(spec):
        return CallableMarginal(spec)
    raise TypeError(f"cannot interpret {spec!r} as a marginal CDF")


# --------------------------------------------------------------------------
# reference beliefs


@dataclass(frozen=True)
class CellRule:
    """Quadrature for the within-cell law on one axis.

    ``points[j, m]`` are the abscissae in cell ``j`` and ``weights`` sum to one.
    ``u`` holds the matching within-cell CDF levels, used for integrals of
    functions of ``max``/``min`` over a diagonal cell.
    """

    points: np.ndarray
    weights: np.ndarray
    u: np.ndarray


def cell_rule(shape: Marginal, grid: Grid1D, order=16) -> CellRule:
    u, w = gauss_legendre_unit(order)
    edges = shape.cdf(grid.edges)
    lo = edges[:-1, None]
    span = np.diff(edges)[:, None]
    points = shape.ppf(lo + span * u[None, :])
    return CellRule(points, w, u)


@dataclass(frozen=True, eq=False)
class ReferenceBelief:
    """Reference joint belief P on the grid.

    ``cell_shape`` is the within-cell law on each axis.  For IID references it
    is the marginal itself; for the band belief it is uniform.
    """

    grid: Grid1D
    joint: np.ndarray
    cell_shape: Marginal = UNIFORM
    marginal: Marginal | None = None
    label: str = "reference"
    _rule: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.n
        object.__setattr__(self, "joint", _check_masses(self.joint, (n, n)))

    @property
    def density2d(self) -> Density2D:
        return Density2D(self.grid, self.joint)

    @property
    def marginal_mass(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def marginal_cdf(self) -> np.ndarray:
        return np.cumsum(self.marginal_mass)

    @property
    def conditional(self) -> np.ndarray:
        """Row-normalized joint: ``conditional[j]`` is P(. | theta in cell j)."""
        rows = self.marginal_mass
        out = np.zeros_like(self.joint)
        pos = rows > 0
        out[pos] = self.joint[pos] / rows[pos, None]
        return out

    @property
    def density(self) -> np.ndarray:
        return self.joint * self.grid.n ** 2

    @property
    def support(self) -> np.ndarray:
        return self.joint > 0

    @property
    def is_iid(self) -> bool:
        return self.marginal is not None

    def rule(self, order=16) -> CellRule:
        if order not in self._rule:
            self._rule[order] = cell_rule(self.cell_shape, self.grid, order)
        return self._rule[order]

    def within_cell_cdf(self, j, x):
        """CDF of the cell-``j`` law at ``x`` (vectorized over ``j`` and ``x``)."""
        edges = self.cell_shape.cdf(self.grid.edges)
        j = np.asarray(j)
        lo = edges[j]
        span = edges[j + 1] - lo
        return np.clip((self.cell_shape.cdf(x) - lo) / span, 0.0, 1.0)


def build_iid_reference(marginal_cdf, n) -> ReferenceBelief:
    """IID reference whose cells carry the CDF increments of ``marginal_cdf``."""
    marginal = as_marginal(marginal_cdf)
    grid = Grid1D(n)
    m = np.diff(marginal.cdf(grid.edges))
    if np.any(m <= 0):
        k = int(np.flatnonzero(m <= 0)[0])
        raise ValueError(f"CDF is not strictly increasing on cell {k}")
    m = m / m.sum()
    return ReferenceBelief(grid, np.outer(m, m), marginal, marginal, label=f"iid[{marginal.name}]")


def build_band_reference(zeta, n) -> ReferenceBelief:
    """P uniform on the cells whose midpoints satisfy |theta - theta'| <= 1 - zeta."""
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"band parameter must lie in [0, 1), got {zeta!r}")
    grid = Grid1D(n)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :]) / n
    mask = gap <= (1.0 - zeta) + 1e-12
    joint = mask / mask.sum()
    marginal = UNIFORM if mask.all() else None
    return ReferenceBelief(grid, joint, UNIFORM, marginal, label=f"band[{zeta:g}]")


def is_affiliated(ref: ReferenceBelief, tol=1e-15) -> bool:
    """Exhaustive log-supermodularity check of the cell density over all quadruples."""
    f = ref.density
    n = ref.grid.n
    i = np.arange(n)
    a, b = np.meshgrid(i, i, indexing="ij")
    a = a.ravel()
    b = b.ravel()
    lhs = f[a[:, None], b[:, None]] * f[a[None, :], b[None, :]]
    rhs = f[np.maximum(a[:, None], a[None, :]), np.maximum(b[:, None], b[None, :])] * f[
        np.minimum(a[:, None], a[None, :]), np.minimum(b[:, None], b[None, :])
    ]
    return bool(np.all(lhs <= rhs * (1 + tol) + tol))


# --------------------------------------------------------------------------
# divergences


@dataclass(frozen=True)
class Phi:
    """Convex generator of a phi-divergence.

    ``deriv`` is phi' and ``inv_deriv`` its inverse; ``deriv_zero`` is phi'(0+)
    (possibly -inf) and ``deriv_inf`` the limit of phi' at infinity.
    """

    name: str
    func: Callable
    deriv: Callable
    inv_deriv: Callable
    deriv_zero: float = -math.inf
    deriv_inf: float = math.inf


def _xlogx(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)


PHI = {
    "kl": Phi("kl", _xlogx, lambda z: np.log(z) + 1.0, lambda s: np.exp(s - 1.0)),
    "chi2": Phi("chi2", lambda z: (np.asarray(z) - 1.0) ** 2, lambda z: 2.0 * (z - 1.0),
                lambda s: 1.0 + 0.5 * s, deriv_zero=-2.0),
    "hellinger": Phi("hellinger", lambda z: (np.sqrt(z) - 1.0) ** 2,
                     lambda z: 1.0 - 1.0 / np.sqrt(z),
                     lambda s: 1.0 / (1.0 - s) ** 2, deriv_inf=1.0),
    "burg": Phi("burg", lambda z: z - 1.0 - np.log(z), lambda z: 1.0 - 1.0 / z,
                lambda s: 1.0 / (1.0 - s), deriv_inf=1.0),
}


def get_phi(phi) -> Phi:
    if isinstance(phi, Phi):
        return phi
    try:
        return PHI[phi]
    except KeyError:
        raise ValueError(f"unknown divergence {phi!r}; choose from {sorted(PHI)}") from None


def _mass(x):
    return np.asarray(x.mass if isinstance(x, (Density1D, Density2D)) else x, dtype=float)


def divergence(Q, P, phi="kl") -> float:
    """``sum_k P_k phi(Q_k / P_k)`` with phi shifted so that phi(1) = 0.

    Returns ``math.inf`` when Q charges a P-null cell.
    """
    q = _mass(Q)
    p = _mass(P)
    if q.shape != p.shape:
        raise ValueError(f"shape mismatch {q.shape} vs {p.shape}")
    if np.any((p <= 0) & (q > 0)):
        return math.inf
    pos = p > 0
    if isinstance(phi, str) and phi == "kl":
        return float(max(rel_entr(q[pos], p[pos]).sum(), 0.0))
    gen = get_phi(phi) if isinstance(phi, (str, Phi)) else None
    func = gen.func if gen is not None else phi
    shift = float(func(np.array(1.0)))
    with np.errstate(divide="ignore"):
        vals = func(q[pos] / p[pos])
    return float(np.sum(p[pos] * (vals - shift)))


# --------------------------------------------------------------------------
# hazard condition and right-continuous inverse


@dataclass(frozen=True)
class HazardCheck:
    holds: bool
    violation: int | None
    values: np.ndarray


def hazard_condition_check(F, n=400, tol=1e-9) -> HazardCheck:
    """Check that theta * f(theta) / (1 - F(theta)) is nondecreasing on grid nodes.

    ``F`` is a :class:`Marginal` (evaluated on an ``n``-cell grid) or a
    :class:`Density1D`.  The top cell is excluded.
    """
    if isinstance(F, Density1D):
        grid = F.grid
        below = np.concatenate(([0.0], np.cumsum(F.mass)[:-1]))
        cdf = below + 0.5 * F.mass
        pdf = F.mass * grid.n
    else:
        grid = Grid1D(n)
        marg = as_marginal(F)
        cdf = marg.cdf(grid.nodes)
        pdf = marg.pdf(grid.nodes)
    theta = grid.nodes[:-1]
    vals = theta * pdf[:-1] / (1.0 - cdf[:-1])
    drops = np.flatnonzero(np.diff(vals) < -tol)
    if drops.size:
        return HazardCheck(False, int(drops[0] + 1), vals)
    return HazardCheck(True, None, vals)


def quantile(points, cdf_values, kind="linear"):
    """Right-continuous inverse ``c -> sup{z : H(z) <= c}`` of a monotone CDF.

    ``kind="linear"`` interpolates H linearly between ``points``;
    ``kind="step"`` treats H as the right-continuous step function of a
    discrete law with atoms at ``points``.
    """
    z = np.asarray(points, dtype=float)
    h = np.asarray(cdf_values, dtype=float)
    if z.shape != h.shape or z.ndim != 1:
        raise ValueError("points and CDF values must be matching 1-d arrays")
    if np.any(np.diff(z) <= 0):
        raise ValueError("points must be strictly increasing")
    if np.any(np.diff(h) < 0):
        raise ValueError("CDF values must be nondecreasing")

    def inverse(c):
        c_arr = np.asarray(c, dtype=float)
        if np.any((c_arr < 0) | (c_arr > 1)):
            raise ValueError("quantile level must lie in [0, 1]")
        # index of the first point where H exceeds c
        k = np.searchsorted(h, c_arr, side="right")
        if kind == "step":
            out = z[np.minimum(k, z.size - 1)]
        else:
            k1 = np.clip(k, 1, z.size - 1)
            z0, z1 = z[k1 - 1], z[k1]
            h0, h1 = h[k1 - 1], h[k1]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(h1 > h0, (c_arr - h0) / (h1 - h0), 1.0)
            out = np.where(k >= z.size, z[-1], z0 + np.clip(t, 0.0, 1.0) * (z1 - z0))
            out = np.where(k == 0, z[0], out)
        return out if out.ndim else float(out)

    return inverse
