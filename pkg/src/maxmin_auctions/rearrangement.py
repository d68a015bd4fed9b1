"""Rearrangements of discrete densities and brute-force rearrangement oracles.

A density ``nu`` is represented by its cell masses; its likelihood ratio
against a reference ``mu`` is ``nu / mu`` on ``supp(mu)``.  Two densities
are rearrangements of each other when their ratios have the same
``mu``-distribution.  Constructions below move ratio "blocks" along the
cumulative ``mu``-mass axis, so cells with unequal reference masses are
handled exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .measure import Density1D, Density2D, ReferenceBelief

RATIO_TOL = 1e-10
BREAK_TOL = 1e-12
ENUM_CELL_CAP = 9
ASSIGN_AXIS_CAP = 8
MARGINAL_PERM_CAP = 8


def _masses(obj):
    if isinstance(obj, (Density1D, Density2D)):
        return np.asarray(obj.mass, dtype=float)
    if isinstance(obj, ReferenceBelief):
        return np.asarray(obj.joint, dtype=float)
    return np.asarray(obj, dtype=float)


@dataclass(frozen=True)
class LikelihoodProfile:
    """Reference masses together with a ratio per cell (NaN off the support)."""

    base: np.ndarray
    ratio: np.ndarray

    @classmethod
    def of(cls, nu, mu):
        q, p = _masses(nu), _masses(mu)
        if q.shape != p.shape:
            raise ValueError(f"shape mismatch: {q.shape} vs {p.shape}")
        if np.any((p <= 0) & (q > 0)):
            raise ValueError("density charges a cell with zero reference mass")
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(p > 0, q / np.where(p > 0, p, 1.0), np.nan)
        return cls(p, r)

    def step_quantile(self):
        """Breakpoints in cumulative reference mass and ascending ratio values."""
        m = self.base > 0
        r = self.ratio[m].ravel()
        w = self.base[m].ravel()
        order = np.argsort(r, kind="stable")
        return np.concatenate(([0.0], np.cumsum(w[order]))), r[order]


def _merge_breaks(*arrays):
    b = np.unique(np.concatenate(arrays))
    keep = np.concatenate(([True], np.diff(b) > BREAK_TOL))
    return b[keep]


def _step_eval(breaks, values, s):
    k = np.searchsorted(breaks, s, side="right") - 1
    return values[np.clip(k, 0, values.size - 1)]


def is_rearrangement(nu_prime, nu, mu, tol=RATIO_TOL) -> bool:
    """True iff ``nu_prime / mu`` and ``nu / mu`` have equal ``mu``-distributions."""
    a = LikelihoodProfile.of(nu_prime, mu)
    b = LikelihoodProfile.of(nu, mu)
    ba, va = a.step_quantile()
    bb, vb = b.step_quantile()
    breaks = _merge_breaks(ba, bb)
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    if mids.size == 0:
        return True
    return bool(np.max(np.abs(_step_eval(ba, va, mids) - _step_eval(bb, vb, mids))) <= tol)


def _transport(q, p, key):
    """Reassign ratio blocks of ``q`` so the ratio is nonincreasing in ``key``.

    Cells of ``supp(p)`` are laid out by ascending ``key`` (ties by cell
    index) on the cumulative ``p``-mass axis and receive the average of the
    descending ratio quantile over their interval.  Cells with equal key
    values share one averaged ratio.  Returns (masses, exact) where
    ``exact`` says no averaging altered the ratio distribution.
    """
    shape = q.shape
    qf, pf, kf = q.ravel(), p.ravel(), np.asarray(key, dtype=float).ravel()
    m = pf > 0
    if np.any(~m & (qf > 0)):
        raise ValueError("density charges a cell with zero reference mass")
    idx = np.flatnonzero(m)
    ratio = qf[idx] / pf[idx]
    mass = pf[idx]
    # source: ratios sorted descending, as an integrated step function G
    src = np.argsort(-ratio, kind="stable")
    s_breaks = np.concatenate(([0.0], np.cumsum(mass[src])))
    g_breaks = np.concatenate(([0.0], np.cumsum(mass[src] * ratio[src])))

    def G(s):
        return np.interp(s, s_breaks, g_breaks)

    dest = np.lexsort((idx, kf[idx]))
    d_key = kf[idx][dest]
    d_mass = mass[dest]
    # tie groups of the key become one interval
    starts = np.flatnonzero(np.concatenate(([True], d_key[1:] != d_key[:-1])))
    edges = np.concatenate(([0.0], np.cumsum(d_mass)))
    lo = edges[starts]
    hi = edges[np.concatenate((starts[1:], [d_mass.size]))]
    group_ratio = (G(hi) - G(lo)) / (hi - lo)
    sizes = np.diff(np.concatenate((starts, [d_mass.size])))
    out = np.zeros_like(qf)
    out[idx[dest]] = np.repeat(group_ratio, sizes) * d_mass
    out = out.reshape(shape)
    total = out.sum()
    if total > 0:
        out = out / total * q.sum()
    exact = is_rearrangement(out, q, p)
    return out, exact


def decreasing_rearrangement_1d(nu, mu) -> Density1D:
    """Rearrangement of ``nu`` whose ratio to ``mu`` is nonincreasing along the axis."""
    q, p = _masses(nu), _masses(mu)
    if q.shape != p.shape or q.ndim != 1:
        raise ValueError("expected two 1D mass vectors of equal length")
    out, _ = _transport(q, p, np.arange(q.size))
    grid = nu.grid if isinstance(nu, Density1D) else None
    if grid is None:
        return out
    return Density1D(grid, out)


@dataclass(frozen=True)
class RearrangementResult:
    density: Density2D
    exact: bool


def anti_comonotone_rearrangement(Q, T, P: ReferenceBelief) -> RearrangementResult:
    """Rearrangement of ``Q`` whose ratio to ``P`` moves opposite to the cell values ``T``.

    ``T`` is an n x n array (or a transfer evaluated cell by cell).  Cells
    with equal ``T`` receive equal ratio; if that forces averaging of
    distinct ratios, ``exact`` is False and the output is only a
    mean-preserving contraction of a rearrangement.
    """
    if hasattr(T, "cell_total"):
        T = T.cell_total(P)
    q = _masses(Q)
    p = P.joint
    if q.shape != p.shape:
        raise ValueError(f"shape mismatch: {q.shape} vs {p.shape}")
    out, exact = _transport(q, p, np.asarray(T, dtype=float))
    return RearrangementResult(Density2D(P.grid, out), exact)


def independent_decreasing_rearrangement(Q, P: ReferenceBelief) -> Density2D:
    """Sort each marginal ratio of a product ``Q`` into nonincreasing order, then re-multiply."""
    q = _masses(Q)
    p = P.joint
    if not Density2D(P.grid, q).is_product():
        raise ValueError("independent rearrangement needs a product density Q")
    if not P.density2d.is_product():
        raise ValueError("independent rearrangement needs a product reference P")
    q1, q2 = q.sum(axis=1), q.sum(axis=0)
    p1, p2 = p.sum(axis=1), p.sum(axis=0)
    a, _ = _transport(q1, p1, np.arange(q1.size))
    b, _ = _transport(q2, p2, np.arange(q2.size))
    return Density2D(P.grid, np.outer(a, b))


# --------------------------------------------------------------------------
# brute-force oracles


@dataclass(frozen=True)
class PermutationClosure:
    """All cell permutations of a seed mass array (reference masses must be uniform)."""

    seed: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.seed, dtype=float)
        object.__setattr__(self, "seed", s)


@dataclass(frozen=True)
class MarginalPermutationClosure:
    """Products ``a[pi] x b[sigma]`` over permutations of two marginal mass vectors."""

    first: np.ndarray
    second: np.ndarray
    iid: bool = False


def _expect(mass, T):
    return float(np.dot(np.ravel(mass), np.ravel(T)))


def brute_force_min(family, T):
    """Exact ``min E[T]`` over a finite family of densities.

    ``family`` is a list of mass arrays, a :class:`PermutationClosure` or a
    :class:`MarginalPermutationClosure`.  Up to 9 cells the permutation
    closure is enumerated outright; larger closures (at most 8 cells per
    axis) are solved as an assignment problem, which is exact.
    Returns ``(value, argmin_masses)``.
    """
    T = np.asarray(T, dtype=float)
    if isinstance(family, PermutationClosure):
        seed = family.seed
        if seed.shape != T.shape:
            raise ValueError("seed and T have different shapes")
        flat, tf = seed.ravel(), T.ravel()
        if flat.size <= ENUM_CELL_CAP:
            best, arg = math.inf, None
            for perm in itertools.permutations(range(flat.size)):
                cand = flat[list(perm)]
                v = _expect(cand, tf)
                if v < best:
                    best, arg = v, cand
            return best, arg.reshape(seed.shape)
        if max(seed.shape) > ASSIGN_AXIS_CAP:
            raise ValueError(f"permutation closure capped at {ASSIGN_AXIS_CAP} cells per axis")
        rows, cols = linear_sum_assignment(np.outer(flat, tf))
        cand = np.empty_like(flat)
        cand[cols] = flat[rows]
        return _expect(cand, tf), cand.reshape(seed.shape)
    if isinstance(family, MarginalPermutationClosure):
        a, b = np.asarray(family.first, float), np.asarray(family.second, float)
        if max(a.size, b.size) > MARGINAL_PERM_CAP:
            raise ValueError(f"marginal permutations capped at {MARGINAL_PERM_CAP} states")
        best, arg = math.inf, None
        perms_a = [a[list(pi)] for pi in itertools.permutations(range(a.size))]
        if family.iid:
            pairs = ((x, x) for x in perms_a)
        else:
            perms_b = [b[list(pi)] for pi in itertools.permutations(range(b.size))]
            pairs = itertools.product(perms_a, perms_b)
        for x, y in pairs:
            cand = np.outer(x, y)
            v = _expect(cand, T)
            if v < best:
                best, arg = v, cand
        return best, arg
    members = [np.asarray(m, dtype=float) for m in family]
    if not members:
        raise ValueError("empty family")
    vals = [_expect(m, T) for m in members]
    k = int(np.argmin(vals))
    return vals[k], members[k]


@lru_cache(maxsize=None)
def _tableaux(rows, cols):
    """Standard Young tableaux of a rows x cols rectangle, as rank arrays.

    Entry (i, j) holds the order in which that cell is filled; each row and
    column is filled left to right, so ranks increase along both axes.
    """
    out = []
    filled = [0] * rows
    current = np.zeros((rows, cols), dtype=np.int8)

    def rec(k):
        if k == rows * cols:
            out.append(current.ravel().copy())
            return
        for i in range(rows):
            j = filled[i]
            if j < cols and (i == 0 or filled[i - 1] > j):
                current[i, j] = k
                filled[i] += 1
                rec(k + 1)
                filled[i] -= 1

    rec(0)
    return np.array(out)


def decreasing_members(seed):
    """All members of the permutation closure of ``seed`` with ratio nonincreasing per axis.

    Under uniform reference masses ratios order like masses.  The largest
    mass must go to the first-filled cell of a tableau, and so on; with
    distinct seed values this lists the decreasing members exactly once.
    Ties produce duplicates, which is harmless for minimization.
    """
    seed = np.asarray(seed, dtype=float)
    desc = np.sort(seed.ravel())[::-1]
    ranks = _tableaux(*seed.shape)
    return desc[ranks].reshape((-1,) + seed.shape)


def min_over_decreasing_members(seed, T):
    members = decreasing_members(seed)
    vals = members.reshape(members.shape[0], -1) @ np.ravel(T)
    k = int(np.argmin(vals))
    return _expect(members[k], T), members[k]


def upper_sets(n):
    """Every upper set of the n x n product order, as boolean masks.

    An upper set is determined by a nonincreasing column threshold: cell
    (i, j) belongs iff ``i >= h[j]`` with ``h`` nonincreasing in ``j``.
    """
    out = []
    for h in itertools.combinations_with_replacement(range(n + 1), n):
        thresholds = np.array(h[::-1])
        i = np.arange(n)[:, None]
        out.append(i >= thresholds[None, :])
    return out


def rectangle_reduction_check(mass, n=None):
    """Exhaustively check ``P(U & A1* x A2*) <= P(U & A1 x A2)``.

    ``U`` runs over all upper sets, ``A1, A2`` over all subsets of states,
    and ``Ai*`` is the left interval with the same reference mass.  The
    reference is a product with uniform marginals so left intervals of
    equal mass always exist.  Returns ``(checked, failures)``.
    """
    mass = np.asarray(mass, dtype=float)
    n = mass.shape[0]
    subsets = [np.array(s, dtype=bool) for s in itertools.product((False, True), repeat=n)]
    checked, failures = 0, []
    for U in upper_sets(n):
        PU = np.where(U, mass, 0.0)
        for A1 in subsets:
            L1 = np.arange(n) < A1.sum()
            row_any, row_left = PU[A1], PU[L1]
            for A2 in subsets:
                L2 = np.arange(n) < A2.sum()
                lhs = row_left[:, L2].sum()
                rhs = row_any[:, A2].sum()
                checked += 1
                if lhs > rhs + 1e-12:
                    failures.append((U.copy(), A1.copy(), A2.copy(), lhs, rhs))
    return checked, failures


@dataclass
class SophisticationVerdict:
    applicable: bool
    agree: bool
    min_first: float = math.nan
    min_second: float = math.nan
    witness: np.ndarray | None = field(default=None, repr=False)

    def __bool__(self):
        return self.applicable and self.agree


def probabilistic_sophistication_check(family, T, T_prime, mu=None, tol=1e-10):
    """Compare ``min E[T]`` and ``min E[T']`` over ``family`` when ``T`` and ``T'``
    have the same ``mu``-distribution (uniform ``mu`` by default)."""
    T = np.asarray(T, dtype=float)
    T_prime = np.asarray(T_prime, dtype=float)
    mu = np.full(T.shape, 1.0 / T.size) if mu is None else _masses(mu)
    shift = min(T.min(), T_prime.min()) - 1.0
    same = is_rearrangement((T - shift) * mu, (T_prime - shift) * mu, mu, tol=1e-12)
    if not same:
        return SophisticationVerdict(False, False)
    a, _ = brute_force_min(family, T)
    b, wb = brute_force_min(family, T_prime)
    return SophisticationVerdict(True, abs(a - b) <= tol, a, b, None if abs(a - b) <= tol else wb)
