"""Single-crossing predicates, reference revenue comparisons and ranking certificates.

All predicates work on grid nodes: for a bidder of type ``theta`` they look
at the difference ``d(theta') = t^X(theta, theta') - t^Y(theta, theta')``
as a function of the competitor's type.  Auctions here are symmetric, so
one bidder's schedule describes both.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import AmbiguitySet, best_case_revenue, worst_case_revenue
from .auctions import (
    AuctionSpec,
    TransferFunction,
    interim_expected_payment,
    interim_payments,
    transfer,
    winning_conditional_payment,
)
from .measure import Grid1D, ReferenceBelief, hazard_condition_check

MARGIN = 1e-9
RRC_TOL = 2e-3
RANK_SLACK = 1e-6


@dataclass
class CrossingReport:
    holds: bool
    thresholds: np.ndarray
    witness: tuple | None = None
    kind: str = "wscc"
    forms_agree: bool = True

    def __bool__(self):
        return self.holds


def difference_matrix(X: TransferFunction, Y: TransferFunction, grid: Grid1D | None = None):
    """``D[j, k] = t^X(x_j, x_k) - t^Y(x_j, x_k)`` on grid nodes."""
    grid = grid or X.bid.grid
    x = grid.nodes
    return X(x[:, None], x[None, :]) - Y(x[:, None], x[None, :])


def _threshold_scan(D, x, margin):
    """Threshold form: first strictly negative entry sets the crossing; nothing
    strictly positive may follow it."""
    n = D.shape[1]
    thresholds = np.full(D.shape[0], np.nan)
    witness = None
    ok = True
    for j, row in enumerate(D):
        neg = np.flatnonzero(row < -margin)
        if neg.size == 0:
            continue
        k0 = neg[0]
        thresholds[j] = x[k0 - 1] if k0 > 0 else 0.0
        pos = np.flatnonzero(row[k0 + 1:] > margin)
        if pos.size and ok:
            ok = False
            witness = (int(j), float(x[j]), float(x[k0]), float(x[k0 + 1 + pos[0]]))
    return ok, thresholds, witness


def _implication_scan(D, margin):
    """Implication form: ``d(theta'') < 0`` forces ``d(theta') <= 0`` for every higher ``theta'``."""
    suffix = np.maximum.accumulate(D[:, ::-1], axis=1)[:, ::-1]
    later = np.concatenate((suffix[:, 1:], np.full((D.shape[0], 1), -np.inf)), axis=1)
    return not bool(np.any((D < -margin) & (later > margin)))


def _wscc_from_difference(D, x, margin, kind):
    ok, thresholds, witness = _threshold_scan(D, x, margin)
    ok2 = _implication_scan(D, margin)
    if ok != ok2:
        raise AssertionError("threshold and implication forms of the crossing test disagree")
    return CrossingReport(ok, thresholds, witness, kind, ok == ok2)


def check_wscc(X, Y, grid=None, margin=MARGIN) -> CrossingReport:
    """``t^X >= t^Y`` below a threshold in the competitor's type and ``<=`` above it."""
    grid = grid or X.bid.grid
    return _wscc_from_difference(difference_matrix(X, Y, grid), grid.nodes, margin, "wscc")


def check_nwscc(X, Y, grid=None, margin=MARGIN) -> CrossingReport:
    """Mirror image: ``t^X <= t^Y`` below the threshold and ``>=`` above it."""
    grid = grid or X.bid.grid
    return _wscc_from_difference(-difference_matrix(X, Y, grid), grid.nodes, margin, "nwscc")


def check_scc(X, Y, grid=None, margin=MARGIN) -> CrossingReport:
    """Both lines of the standard single-crossing implication over all node pairs."""
    grid = grid or X.bid.grid
    x = grid.nodes
    D = difference_matrix(X, Y, grid)
    suffix_max = np.maximum.accumulate(D[:, ::-1], axis=1)[:, ::-1]
    later_max = np.concatenate((suffix_max[:, 1:], np.full((D.shape[0], 1), -np.inf)), axis=1)
    weak_bad = (D <= margin) & (later_max > margin)
    strict_bad = (D < -margin) & (later_max >= -margin)
    bad = weak_bad | strict_bad
    witness = None
    if bad.any():
        j, k = map(int, np.argwhere(bad)[0])
        row = D[j, k + 1:]
        k2 = k + 1 + int(np.flatnonzero(row > margin if weak_bad[j, k] else row >= -margin)[0])
        witness = (j, float(x[j]), float(x[k]), float(x[k2]))
    _, thresholds, _ = _threshold_scan(D, x, margin)
    report = CrossingReport(not bad.any(), thresholds, witness, "scc")
    if report.holds and not _implication_scan(D, margin):
        raise AssertionError("standard single crossing holds but the weak form fails")
    return report


@dataclass
class RRCResult:
    holds: bool
    max_deficit: float
    e_x: np.ndarray
    e_y: np.ndarray

    def __bool__(self):
        return self.holds


def check_rrc(X, Y, P: ReferenceBelief, tol=RRC_TOL) -> RRCResult:
    """Interim payments under ``P`` satisfy ``e^X(theta, theta) >= e^Y(theta, theta) - tol`` at nodes."""
    ex = interim_payments(X, P)
    ey = ex if Y is X else interim_payments(Y, P)
    deficit = float(np.max(ey - ex))
    return RRCResult(deficit <= tol, max(deficit, 0.0), ex, ey)


@dataclass
class LinkageReport:
    lc1: bool | None
    lc2: bool | None
    d_e: tuple = field(default=(None, None), repr=False)
    d_w: tuple = field(default=(None, None), repr=False)
    reason: str = ""


def _type_derivative(func, grid: Grid1D, step_cells=2):
    """Derivative of ``func(report=x, theta)`` in ``theta`` at ``theta = x`` for every node.

    Central difference with a ``step_cells`` stencil, one-sided at the ends.
    Nodes where ``func`` raises ``ValueError`` come back as NaN.
    """
    x = grid.nodes
    n = grid.n
    out = np.full(n, np.nan)
    for j in range(n):
        lo, hi = max(j - step_cells, 0), min(j + step_cells, n - 1)
        if hi == lo:
            continue
        try:
            out[j] = (func(x[j], x[hi]) - func(x[j], x[lo])) / (x[hi] - x[lo])
        except ValueError:
            pass
    return out


def linkage_diagnostics(X: AuctionSpec | TransferFunction, Y, P: ReferenceBelief,
                        step_cells=2, tol=1e-9) -> LinkageReport:
    """Compare own-type derivatives of interim payments (and of winning payments
    when both auctions leave losers paying nothing)."""
    try:
        tx = X if isinstance(X, TransferFunction) else transfer(X)
        ty = Y if isinstance(Y, TransferFunction) else transfer(Y)
    except ValueError as exc:
        return LinkageReport(None, None, reason=f"equilibrium unavailable: {exc}")
    grid = P.grid
    dx = _type_derivative(lambda r, t: interim_expected_payment(tx, P, r, t), grid, step_cells)
    dy = _type_derivative(lambda r, t: interim_expected_payment(ty, P, r, t), grid, step_cells)
    ok = np.isfinite(dx) & np.isfinite(dy)
    lc1 = bool(np.all(dx[ok] <= dy[ok] + tol))
    if tx.loser_pays or ty.loser_pays:
        return LinkageReport(lc1, None, (dx, dy), reason="losers pay in at least one auction")
    wx = _type_derivative(lambda r, t: winning_conditional_payment(tx, P, r, t), grid, step_cells)
    wy = _type_derivative(lambda r, t: winning_conditional_payment(ty, P, r, t), grid, step_cells)
    ok = np.isfinite(wx) & np.isfinite(wy)
    lc2 = bool(np.all(wx[ok] <= wy[ok] + tol))
    return LinkageReport(lc1, lc2, (dx, dy), (wx, wy))


# --------------------------------------------------------------------------
# ranking harness

# pairs whose worst-case order is predicted, with the auction expected on top first
WORST_CASE_PAIRS = (("fpa", "spa"), ("fpa", "apa"), ("apa", "war"), ("spa", "war"))
BEST_CASE_PAIRS = (("war", "spa"), ("war", "apa"), ("spa", "fpa"), ("apa", "fpa"))


@dataclass
class PairCertificate:
    x: str
    y: str
    crossing: bool
    rrc: bool
    rrc_deficit: float
    hazard: bool | None
    certified: bool
    slack: float

    @property
    def ranking_holds(self) -> bool:
        return self.slack >= -RANK_SLACK


@dataclass
class RankingTable:
    mode: str
    values: dict
    order: list
    pairs: list
    solutions: dict = field(default_factory=dict, repr=False)

    def pair(self, x, y) -> PairCertificate:
        for p in self.pairs:
            if (p.x, p.y) == (x, y):
                return p
        raise KeyError((x, y))


def rank_auctions(specs, aset: AmbiguitySet, mode="worst", pairs=None, seed=0) -> RankingTable:
    """Solve each auction's worst (or best) case and certify the predicted pairwise orders.

    A pair ``(X, Y)`` is certified by the crossing condition (weak single
    crossing for worst cases, its mirror for best cases) together with the
    reference revenue condition.  Pairs that pit the second-price auction
    against the war of attrition additionally need the hazard condition on
    the marginal.
    """
    if mode not in ("worst", "best"):
        raise ValueError("mode must be 'worst' or 'best'")
    ref = aset.reference
    specs = list(specs)
    tfs = {s.name: transfer(s) for s in specs}
    solve = worst_case_revenue if mode == "worst" else best_case_revenue
    sols = {name: solve(aset, tf, seed=seed) for name, tf in tfs.items()}
    values = {k: s.value for k, s in sols.items()}
    if pairs is None:
        base = WORST_CASE_PAIRS if mode == "worst" else BEST_CASE_PAIRS
        pairs = [p for p in base if p[0] in tfs and p[1] in tfs]
    hazard = None
    rrc_cache = {name: interim_payments(tf, ref) for name, tf in tfs.items()}
    out = []
    for a, b in pairs:
        X, Y = tfs[a], tfs[b]
        cross = check_wscc(X, Y) if mode == "worst" else check_nwscc(X, Y)
        deficit = float(np.max(rrc_cache[b] - rrc_cache[a]))
        rrc = deficit <= RRC_TOL
        h = None
        if {a, b} == {"spa", "war"}:
            if hazard is None:
                hazard = ref.marginal is not None and hazard_condition_check(ref.marginal).holds
            h = hazard
        certified = bool(cross.holds and rrc and (h is None or h))
        out.append(PairCertificate(a, b, cross.holds, rrc, max(deficit, 0.0), h, certified,
                                   values[a] - values[b]))
    order = sorted(values, key=values.get, reverse=True)
    return RankingTable(mode, values, order, out, sols)


def all_pairs(names):
    return list(itertools.permutations(names, 2))


def crossing_threshold_war(bid_a, bid_w, theta, lo=0.0, hi=None, tol=1e-12):
    """Solve ``b^W(t) = b^A(theta)`` for ``t in [0, theta]`` by bisection."""
    target = float(bid_a(theta))
    hi = theta if hi is None else hi
    if float(bid_w(hi)) < target:
        return math.nan
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(bid_w(mid)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
