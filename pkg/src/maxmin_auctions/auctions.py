"""Equilibrium bids and transfer functions for two-bidder auctions.

Auction tags: ``fpa`` (first price), ``spa`` (second price), ``apa``
(all pay), ``war`` (static war of attrition), ``contest:<kappa>`` (winner
pays her bid, loser pays ``kappa`` times hers) and ``fpa-affiliated``
(first price with bids solved from the reference's own conditional law).

Every transfer here has a total of the form ``g_hi(max) + g_lo(min)``;
the solvers only ever see that total, averaged over grid cells.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._quad import gauss_legendre_unit
from .measure import Grid1D, Marginal, ReferenceBelief, UNIFORM

TAGS = ("fpa", "spa", "apa", "war", "contest", "fpa-affiliated")


@dataclass(frozen=True, eq=False)
class BidFunction:
    grid: Grid1D
    func: Callable
    name: str = "bid"

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    @property
    def values(self) -> np.ndarray:
        return self(self.grid.nodes)


def _grid(grid):
    return grid if isinstance(grid, Grid1D) else Grid1D(int(grid))


def bid_fpa(F: Marginal, grid=400) -> BidFunction:
    """b(theta) = theta - int_0^theta F(z)/F(theta) dz, with b(0) = 0."""

    def b(x):
        Fx = F.cdf(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = x - F.integrated_cdf(x) / Fx
        return np.where(Fx > 0, out, 0.0)

    return BidFunction(_grid(grid), b, "fpa")


def bid_spa(grid=400) -> BidFunction:
    return BidFunction(_grid(grid), lambda x: np.array(x, dtype=float), "spa")


def bid_apa(F: Marginal, grid=400) -> BidFunction:
    """b(theta) = theta F(theta) - int_0^theta F(z) dz."""
    return BidFunction(_grid(grid), lambda x: x * F.cdf(x) - F.integrated_cdf(x), "apa")


def bid_war(F: Marginal, grid=400) -> BidFunction:
    """b(theta) = int_0^theta z f(z) / (1 - F(z)) dz; ``inf`` at theta >= 1.

    Integrated by parts to ``-theta log(1 - F) + int_0^theta log(1 - F)`` so
    the density is never needed.
    """

    def b(x):
        inside = np.clip(x, 0.0, np.nextafter(1.0, 0.0))
        with np.errstate(divide="ignore"):
            val = -inside * np.log1p(-F.cdf(inside)) + F.log_survival_integral(inside)
        return np.where(x >= 1.0, np.inf, np.maximum(val, 0.0))

    return BidFunction(_grid(grid), b, "war")


def bid_simple_contest(F: Marginal, kappa, grid=400) -> BidFunction:
    """Bid equating the interim payment with the first-price one, F(theta) b_fpa(theta)."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"contest fraction must lie in [0, 1], got {kappa!r}")

    def b(x):
        Fx = F.cdf(x)
        pay = x * Fx - F.integrated_cdf(x)
        denom = Fx + kappa * (1.0 - Fx)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, pay / denom, 0.0)

    return BidFunction(_grid(grid), b, f"contest:{kappa:g}")


def diagonal_hazard(ref: ReferenceBelief):
    """Return ``x -> f(x | x) / F(x | x)`` under the cell model of ``ref``."""
    cond = ref.conditional
    n = ref.grid.n
    below = np.concatenate((np.zeros((n, 1)), np.cumsum(cond, axis=1)[:, :-1]), axis=1)
    diag = np.diag(cond).copy()
    before = np.diag(below).copy()
    shape = ref.cell_shape
    edges = shape.cdf(ref.grid.edges)
    span = np.diff(edges)

    def ratio(x):
        j = ref.grid.cell_of(x)
        m = (shape.cdf(x) - edges[j]) / span[j]
        dens = shape.pdf(x) / span[j]
        F = before[j] + diag[j] * m
        with np.errstate(divide="ignore", invalid="ignore"):
            return diag[j] * dens / F

    return ratio


def bid_fpa_affiliated(ref: ReferenceBelief, substeps=16) -> BidFunction:
    """First-price bid solving b' = (theta - b) f(theta|theta) / F(theta|theta).

    Fixed-step RK4 on a mesh aligned with cell edges, started at two cells
    with b = theta / 2.  Bids below the start follow theta / 2.
    """
    grid = ref.grid
    n = grid.n
    if np.any(np.diag(ref.joint) <= 0):
        raise ValueError("reference has no mass on some diagonal cell; F(theta|theta) vanishes")
    start_cell = min(2, n - 1)
    eps = start_cell / n
    hazard = diagonal_hazard(ref)
    step = grid.width / substeps
    count = (n - start_cell) * substeps
    mesh = eps + step * np.arange(count + 1)
    mesh[-1] = 1.0
    b = np.empty(count + 1)
    b[0] = 0.5 * eps

    def rhs(x, y):
        return (x - y) * hazard(x)

    # substeps stay inside one cell; evaluate the cell-interior stages there
    for k in range(count):
        x = mesh[k]
        h = mesh[k + 1] - x
        xl = x + 1e-13
        xr = mesh[k + 1] - 1e-13
        y = b[k]
        k1 = rhs(xl, y)
        k2 = rhs(x + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(xr, y + h * k3)
        if not np.all(np.isfinite([k1, k2, k3, k4])):
            raise ValueError(f"conditional mass F(theta|theta) vanished near theta={x:.4g}")
        b[k + 1] = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    xs = np.concatenate(([0.0], mesh))
    ys = np.concatenate(([0.0], b))

    def func(x):
        return np.interp(x, xs, ys)

    return BidFunction(grid, func, "fpa-affiliated")


# --------------------------------------------------------------------------
# transfers


def _tie(x, y):
    return (x > y) + 0.5 * (x == y)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Per-bidder transfer ``t(theta, theta')`` of an auction with symmetric bidders."""

    kind: str
    bid: BidFunction
    kappa: float = 0.0

    def __call__(self, theta, other):
        x = np.asarray(theta, dtype=float)
        y = np.asarray(other, dtype=float)
        b = self.bid
        if self.kind in ("fpa", "fpa-affiliated"):
            return b(x) * _tie(x, y)
        if self.kind == "spa":
            return b(y) * _tie(x, y)
        if self.kind == "apa":
            return b(x) * np.ones_like(y)
        if self.kind == "war":
            # b(y) is never needed where y >= 1 and x > y
            low = np.where(x > y, b(np.minimum(y, x)), 0.0)
            return low + np.where(x <= y, b(x), 0.0)
        if self.kind == "contest":
            return b(x) * (_tie(x, y) + self.kappa * _tie(y, x))
        raise ValueError(f"unknown auction kind {self.kind!r}")

    @property
    def loser_pays(self) -> bool:
        return self.kind in ("apa", "war") or (self.kind == "contest" and self.kappa > 0)

    def total_parts(self):
        """``(g_hi, g_lo)`` with total transfer ``g_hi(max) + g_lo(min)``."""
        b = self.bid
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
        if self.kind in ("fpa", "fpa-affiliated"):
            return b, zero
        if self.kind == "spa":
            return zero, b
        if self.kind == "apa":
            return b, b
        if self.kind == "war":
            return zero, lambda x: 2.0 * b(x)
        if self.kind == "contest":
            k = self.kappa
            return b, lambda x: k * b(x)
        raise ValueError(f"unknown auction kind {self.kind!r}")

    def total(self, theta, other):
        """Pointwise total transfer ``t(theta, theta') + t(theta', theta)``."""
        return self(theta, other) + self(other, theta)

    def node_total(self, grid: Grid1D) -> np.ndarray:
        x = grid.nodes
        return self.total(x[:, None], x[None, :])

    def cell_total(self, ref: ReferenceBelief, order=16) -> np.ndarray:
        """Exact conditional mean of the total transfer on every grid cell of ``ref``."""
        rule = ref.rule(order)
        g_hi, g_lo = self.total_parts()
        hi = g_hi(rule.points)
        lo = g_lo(rule.points)
        avg_hi = hi @ rule.weights
        avg_lo = lo @ rule.weights
        diag = (hi @ (2.0 * rule.u * rule.weights)) + (lo @ (2.0 * (1.0 - rule.u) * rule.weights))
        n = ref.grid.n
        idx = np.arange(n)
        top = np.maximum(idx[:, None], idx[None, :])
        bot = np.minimum(idx[:, None], idx[None, :])
        T = avg_hi[top] + avg_lo[bot]
        T[idx, idx] = diag
        return T


@dataclass(frozen=True, eq=False)
class AuctionSpec:
    tag: str
    reference: ReferenceBelief
    kappa: float = 0.0

    @property
    def name(self) -> str:
        return f"contest:{self.kappa:g}" if self.tag == "contest" else self.tag


def parse_auction(name: str, reference: ReferenceBelief) -> AuctionSpec:
    """Parse ``fpa|spa|apa|war|contest:<kappa>|fpa-affiliated``."""
    name = name.strip().lower()
    if name.startswith("contest"):
        _, _, k = name.partition(":")
        if not k:
            raise ValueError("contest needs a fraction, e.g. contest:0.5")
        kappa = float(k)
        if not 0.0 <= kappa <= 1.0:
            raise ValueError(f"contest fraction must lie in [0, 1], got {kappa!r}")
        return AuctionSpec("contest", reference, kappa)
    if name not in TAGS:
        raise ValueError(f"unknown auction {name!r}; expected one of {TAGS}")
    return AuctionSpec(name, reference)


def _reference_marginal(ref: ReferenceBelief) -> Marginal:
    if ref.marginal is None:
        raise ValueError(
            f"auction bids need an IID reference with a known marginal, got {ref.label}"
        )
    return ref.marginal


def build_bid(spec: AuctionSpec) -> BidFunction:
    ref = spec.reference
    grid = ref.grid
    if spec.tag == "spa":
        return bid_spa(grid)
    if spec.tag == "fpa-affiliated":
        return bid_fpa_affiliated(ref)
    F = _reference_marginal(ref)
    if spec.tag == "fpa":
        return bid_fpa(F, grid)
    if spec.tag == "apa":
        return bid_apa(F, grid)
    if spec.tag == "war":
        return bid_war(F, grid)
    if spec.tag == "contest":
        return bid_simple_contest(F, spec.kappa, grid)
    raise ValueError(f"unknown auction {spec.tag!r}")


def transfer(spec: AuctionSpec) -> TransferFunction:
    kind = "fpa-affiliated" if spec.tag == "fpa-affiliated" else spec.tag
    return TransferFunction(kind, build_bid(spec), spec.kappa)


def is_total_monotone(tf: TransferFunction, grid: Grid1D, tol=1e-12) -> bool:
    """Total transfer nondecreasing in each argument on grid nodes."""
    T = tf.node_total(grid)
    return bool(np.all(np.diff(T, axis=0) >= -tol) and np.all(np.diff(T, axis=1) >= -tol))


# --------------------------------------------------------------------------
# interim payments


def _conditional_integral(tf, ref, report, theta, winning_only, order=16):
    """Integrate ``t(report, .)`` against the cell-model conditional given ``theta``.

    Returns ``(integral, conditioning_mass)``; cells straddling ``report`` are
    split at the report so the kink is integrated exactly.
    """
    grid = ref.grid
    j = int(grid.cell_of(theta))
    weights = ref.conditional[j]
    shape = ref.cell_shape
    edges = shape.cdf(grid.edges)
    span = np.diff(edges)
    cut = np.clip((shape.cdf(report) - edges[:-1]) / span, 0.0, 1.0)
    u, w = gauss_legendre_unit(order)

    def part(a, b):
        lev = a[:, None] + (b - a)[:, None] * u[None, :]
        pts = shape.ppf(edges[:-1, None] + span[:, None] * lev)
        vals = tf(np.full_like(pts, report), pts)
        return (vals @ w) * (b - a)

    below = part(np.zeros_like(cut), cut)
    total = weights @ below
    mass = weights @ cut
    if not winning_only:
        total = total + weights @ part(cut, np.ones_like(cut))
    return float(total), float(mass)


def interim_expected_payment(tf: TransferFunction, ref: ReferenceBelief, report, theta) -> float:
    """e(report, theta) = int t(report, theta') P(d theta' | theta)."""
    return _conditional_integral(tf, ref, report, theta, winning_only=False)[0]


def winning_conditional_payment(tf: TransferFunction, ref: ReferenceBelief, report, theta) -> float:
    """w(report, theta): expected payment given ``theta' < report``."""
    total, mass = _conditional_integral(tf, ref, report, theta, winning_only=True)
    if mass <= 0:
        raise ValueError(f"conditioning event [0, {report!r}] has zero mass given theta={theta!r}")
    return total / mass


_NODE_PAYMENTS = weakref.WeakKeyDictionary()


def interim_payments(tf: TransferFunction, ref: ReferenceBelief, types=None) -> np.ndarray:
    """``e(theta, theta)`` at each of ``types`` (default: grid nodes, cached per transfer)."""
    if types is not None:
        types = np.asarray(types, dtype=float)
        return np.array([interim_expected_payment(tf, ref, x, x) for x in types])
    hit = _NODE_PAYMENTS.get(tf)
    if hit is not None and hit[0] is ref:
        return hit[1].copy()
    out = np.array([interim_expected_payment(tf, ref, x, x) for x in ref.grid.nodes])
    _NODE_PAYMENTS[tf] = (ref, out)
    return out.copy()


def winning_probability(ref: ReferenceBelief, report, theta) -> float:
    """P(theta' < report | theta) under the cell model."""
    grid = ref.grid
    j = int(grid.cell_of(theta))
    cut = ref.within_cell_cdf(np.arange(grid.n), report)
    return float(ref.conditional[j] @ cut)


def fpa_payoff(bid: BidFunction, ref: ReferenceBelief, report, theta) -> float:
    """Interim payoff of type ``theta`` bidding ``bid(report)`` in a first-price auction."""
    return (theta - float(bid(report))) * winning_probability(ref, report, theta)


def interim_payoff(tf: TransferFunction, ref: ReferenceBelief, report, theta) -> float:
    """Interim payoff of type ``theta`` reporting ``report``: value times win
    probability minus interim expected payment."""
    return theta * winning_probability(ref, report, theta) - interim_expected_payment(tf, ref, report, theta)


def war_crossing(F: Marginal = UNIFORM, grid=400, tol=1e-12) -> float:
    """Interior type where the war-of-attrition bid meets the identity."""
    b = bid_war(F, grid)
    lo, hi = 1e-6, 1.0 - 1e-9
    if b(lo) - lo >= 0 or b(hi) - hi <= 0:
        raise ValueError("war-of-attrition bid does not cross the identity once")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if b(mid) - mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
