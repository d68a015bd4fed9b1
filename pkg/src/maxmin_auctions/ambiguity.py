"""Worst-case, best-case and divergence-penalized expectations over ambiguity sets.

Families: ``kl`` (relative-entropy ball), ``phi`` (phi-divergence ball),
``blr`` (bounded likelihood ratio ``dQ/dP in [1 - alpha eta, 1 + beta eta]``)
and ``contam`` (``Q = eta R + (1 - eta) P``).  Domains: ``joint`` (any Q << P),
``ind`` (product Q, each marginal constrained) and ``iid`` (Q = q x q).

Every solver is built on one primitive, :func:`linear_min`, which minimizes
a linear functional over the one-block version of a family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .measure import Density2D, ReferenceBelief, divergence, get_phi

FAMILIES = ("kl", "phi", "blr", "contam")
DOMAINS = ("joint", "ind", "iid")

TAU_BRACKET = (1e-8, 1e8)
BISECT_ITERS = 200
MONOTONE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class AmbiguitySet:
    family: str
    eta: float
    domain: str = "joint"
    reference: ReferenceBelief | None = None
    phi: str = "kl"
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"radius must be a finite nonnegative number, got {self.eta!r}")
        if self.family == "contam" and self.eta > 1:
            raise ValueError("contamination weight must lie in [0, 1]")
        if self.family == "blr" and (self.alpha < 0 or self.beta < 0):
            raise ValueError("bounded likelihood ratio needs alpha, beta >= 0")
        if self.family == "phi":
            get_phi(self.phi)
        ref = self.reference
        if ref is not None and self.domain == "iid" and not ref.is_iid:
            raise ValueError("the iid domain requires an IID reference belief")
        if ref is not None and self.domain == "ind" and not ref.density2d.is_product():
            raise ValueError("the ind domain requires a product reference belief")

    def with_reference(self, reference):
        return AmbiguitySet(self.family, self.eta, self.domain, reference, self.phi,
                            self.alpha, self.beta)

    def with_eta(self, eta):
        return AmbiguitySet(self.family, eta, self.domain, self.reference, self.phi,
                            self.alpha, self.beta)

    @property
    def ratio_bounds(self):
        """Likelihood-ratio bounds of the bounded-ratio family, with the lower one clipped at 0."""
        lo = 1.0 - self.alpha * self.eta
        return max(lo, 0.0), 1.0 + self.beta * self.eta, lo < 0

    @property
    def divergence_name(self):
        return self.phi if self.family == "phi" else "kl"

    def describe(self):
        if self.family == "kl":
            head = f"kl:{self.eta:g}"
        elif self.family == "phi":
            head = f"phi:{self.phi}:{self.eta:g}"
        elif self.family == "blr":
            head = f"blr:{self.alpha:g}:{self.beta:g}:{self.eta:g}"
        else:
            head = f"contam:{self.eta:g}"
        return f"{head}:{self.domain}"


def parse_ambiguity(text: str, reference: ReferenceBelief | None = None) -> AmbiguitySet:
    """Parse ``kl:<eta>``, ``phi:<name>:<eta>``, ``blr:<a>:<b>:<eta>``, ``contam:<eta>``
    with optional suffix ``:joint|:ind|:iid``."""
    parts = [p.strip().lower() for p in text.split(":")]
    domain = "joint"
    if parts and parts[-1] in DOMAINS:
        domain = parts.pop()
    if not parts:
        raise ValueError(f"empty ambiguity specification {text!r}")
    fam, args = parts[0], parts[1:]
    try:
        if fam == "kl" and len(args) == 1:
            return AmbiguitySet("kl", float(args[0]), domain, reference)
        if fam == "phi" and len(args) == 2:
            return AmbiguitySet("phi", float(args[1]), domain, reference, phi=args[0])
        if fam == "blr" and len(args) == 3:
            a, b, eta = map(float, args)
            return AmbiguitySet("blr", eta, domain, reference, alpha=a, beta=b)
        if fam == "contam" and len(args) == 1:
            return AmbiguitySet("contam", float(args[0]), domain, reference)
    except ValueError as exc:
        raise ValueError(f"bad ambiguity specification {text!r}: {exc}") from None
    raise ValueError(f"bad ambiguity specification {text!r}")


@dataclass
class WorstCaseSolution:
    value: float
    minimizer: Density2D
    dual: float | None
    achieved_divergence: float
    monotone_flag: bool
    certified: bool = True
    info: dict = field(default_factory=dict)
    increasing: bool = False

    @property
    def ratio(self) -> np.ndarray:
        return likelihood_ratio(self.minimizer.mass, self.info["reference_mass"])


# --------------------------------------------------------------------------
# one-block linear minimization


def _argmin_set(c):
    scale = max(1.0, float(np.max(np.abs(c))))
    return c - c.min() <= 1e-14 * scale


def _kl_tilt(p, c, tau):
    a = -(c - c.min()) / tau
    a -= a.max()
    w = p * np.exp(a)
    Z = w.sum()
    q = w / Z
    kl = float(np.dot(q, a - math.log(Z)))
    return q, max(kl, 0.0)


def _min_kl(p, c, eta):
    if eta == 0 or np.ptp(c) == 0:
        return p.copy(), None, {"saturated": False}
    low = _argmin_set(c)
    mass = p[low].sum()
    if eta >= -math.log(mass):
        q = np.where(low, p / mass, 0.0)
        return q, 0.0, {"saturated": True}
    lo, hi = math.log(TAU_BRACKET[0]), math.log(TAU_BRACKET[1])
    q_lo, kl_lo = _kl_tilt(p, c, math.exp(lo))
    if kl_lo <= eta:
        return q_lo, math.exp(lo), {"saturated": False, "bracket_hit": True}
    q_hi, _ = _kl_tilt(p, c, math.exp(hi))
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        q_mid, kl_mid = _kl_tilt(p, c, math.exp(mid))
        if kl_mid > eta:
            lo = mid
        else:
            hi, q_hi = mid, q_mid
    return q_hi, math.exp(hi), {"saturated": False}


def _min_blr(p, c, lo_ratio, hi_ratio):
    """Water-filling: ratio ``hi`` on the cheapest cells, ``lo`` on the rest.

    Cells with equal cost form one block and always share a ratio, so the
    threshold block is the only one with an intermediate value.
    """
    order = np.argsort(c, kind="stable")
    cs = c[order]
    ps = p[order]
    starts = np.flatnonzero(np.concatenate(([True], cs[1:] != cs[:-1])))
    block_mass = np.add.reduceat(ps, starts)
    need = 1.0 - lo_ratio * p.sum()
    span = hi_ratio - lo_ratio
    ratio_blocks = np.full(block_mass.size, lo_ratio)
    if span > 0 and need > 0:
        capacity = np.cumsum(block_mass) * span
        full = capacity <= need
        ratio_blocks[full] = hi_ratio
        k = int(np.searchsorted(capacity, need, side="left"))
        if k < block_mass.size and not full[k]:
            used = capacity[k - 1] if k > 0 else 0.0
            ratio_blocks[k] = lo_ratio + (need - used) / block_mass[k]
    sizes = np.diff(np.concatenate((starts, [cs.size])))
    ratio_sorted = np.repeat(ratio_blocks, sizes)
    q = np.empty_like(p)
    q[order] = ratio_sorted * ps
    return q / q.sum(), None, {}


def _min_contam(p, c, eta):
    low = _argmin_set(c)
    q = (1.0 - eta) * p + eta * np.where(low, p / p[low].sum(), 0.0)
    return q, None, {}


def _phi_ratio(gen, c, lam, nu):
    s = -(c + nu) / lam
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        r = np.where(s >= gen.deriv_inf, np.inf, gen.inv_deriv(np.minimum(s, gen.deriv_inf)))
    return np.maximum(np.where(s <= gen.deriv_zero, 0.0, r), 0.0)


def _phi_normalize(gen, p, c, lam):
    """Find nu with sum p r(nu) = 1 for fixed multiplier ``lam``."""
    d1 = float(gen.deriv(np.array(1.0)))
    nu_lo = -c.max() - lam * d1
    nu_hi = -c.min() - lam * d1
    if math.isfinite(gen.deriv_inf):
        nu_lo = max(nu_lo, -c.min() - lam * gen.deriv_inf)

    def excess(nu):
        # 1 - 1/total is finite even where a ratio blows up
        with np.errstate(divide="ignore"):
            return 1.0 - 1.0 / (p @ _phi_ratio(gen, c, lam, nu))

    if nu_hi > nu_lo and excess(nu_hi) < 0 < excess(nu_lo):
        nu = brentq(excess, nu_lo, nu_hi, xtol=1e-15 * max(1.0, abs(nu_hi)), rtol=1e-15)
    else:
        nu = nu_hi
    r = _phi_ratio(gen, c, lam, nu)
    if not np.all(np.isfinite(r)):
        nu = nu_hi
        r = _phi_ratio(gen, c, lam, nu)
    total = p @ r
    return r / total, nu


def _phi_div(gen, p, r):
    shift = float(gen.func(np.array(1.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = gen.func(r)
    return float(np.sum(p * (vals - shift)))


def _min_phi(p, c, eta, name):
    gen = get_phi(name)
    if eta == 0 or np.ptp(c) == 0:
        return p.copy(), None, {"saturated": False}
    low = _argmin_set(c)
    mass = p[low].sum()
    r_sat = np.where(low, 1.0 / mass, 0.0)
    d_sat = _phi_div(gen, p, r_sat)
    if eta >= d_sat:
        return p * r_sat, 0.0, {"saturated": True}
    lo, hi = math.log(1e-10), math.log(1e10)

    def ratio(loglam):
        return _phi_normalize(gen, p, c, math.exp(loglam))[0]

    def gap(loglam):
        # divergence falls as the multiplier grows; arctan keeps infinite values usable
        return math.atan(_phi_div(gen, p, ratio(loglam)) - eta)

    if gap(lo) <= 0:
        return p * ratio(lo), math.exp(lo), {"saturated": False, "bracket_hit": True}
    x = brentq(gap, lo, hi, xtol=1e-13, rtol=1e-15) if gap(hi) < 0 else hi
    r = ratio(x)
    step = 1e-13
    while _phi_div(gen, p, r) > eta and x < hi:
        # stay on the feasible side of the root
        x = min(x + step, hi)
        step *= 4
        r = ratio(x)
    return p * r, math.exp(x), {"saturated": False}


def linear_min(p, c, aset: AmbiguitySet):
    """Minimize ``sum q c`` over the one-block family around masses ``p``.

    Returns ``(q, dual, info)``.  ``p`` must be strictly positive.
    """
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    if aset.eta == 0:
        return p.copy(), None, {}
    if aset.family == "kl":
        return _min_kl(p, c, aset.eta)
    if aset.family == "phi":
        return _min_phi(p, c, aset.eta, aset.phi)
    if aset.family == "blr":
        lo, hi, clipped = aset.ratio_bounds
        q, dual, info = _min_blr(p, c, lo, hi)
        info["alpha_clipped"] = clipped
        return q, dual, info
    return _min_contam(p, c, aset.eta)


# --------------------------------------------------------------------------
# diagnostics


def likelihood_ratio(q, p):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, q / np.where(p > 0, p, 1.0), np.nan)


def _monotone_along(r, increasing, tol):
    """Consecutive finite entries along the last axis are nonincreasing (or nondecreasing)."""
    for row in np.atleast_2d(r):
        vals = row[np.isfinite(row)]
        step = np.diff(vals)
        if increasing and np.any(step < -tol):
            return False
        if not increasing and np.any(step > tol):
            return False
    return True


def is_monotone_ratio(ratio, increasing=False, tol=MONOTONE_TOL) -> bool:
    r = np.asarray(ratio, dtype=float)
    if r.ndim == 1:
        return _monotone_along(r, increasing, tol)
    return _monotone_along(r, increasing, tol) and _monotone_along(r.T, increasing, tol)


def monotone_minimizer_diagnostic(sol: WorstCaseSolution) -> bool:
    """Minimizer's likelihood ratio is nonincreasing in each argument
    (nondecreasing for best-case solutions)."""
    return is_monotone_ratio(sol.ratio, increasing=sol.increasing)


def feasibility_residual(aset: AmbiguitySet, Q) -> float:
    """How far ``Q`` (n x n masses) lies outside the set; 0 when feasible."""
    ref = aset.reference
    q = np.asarray(Q.mass if isinstance(Q, Density2D) else Q, dtype=float)
    P = ref.joint
    res = abs(q.sum() - 1.0)
    res = max(res, float(np.max(np.where(P > 0, 0.0, q))), float(max(0.0, -q.min())))
    if aset.domain == "joint":
        blocks = [(q, P)]
    else:
        q1, q2 = q.sum(axis=1), q.sum(axis=0)
        res = max(res, float(np.max(np.abs(np.outer(q1, q2) - q))))
        if aset.domain == "iid":
            res = max(res, float(np.max(np.abs(q1 - q2))))
        blocks = [(q1, P.sum(axis=1)), (q2, P.sum(axis=0))]
    for qb, pb in blocks:
        if aset.family in ("kl", "phi"):
            res = max(res, divergence(qb, pb, aset.divergence_name) - aset.eta)
        elif aset.family == "blr":
            lo, hi, _ = aset.ratio_bounds
            r = likelihood_ratio(qb, pb)[pb > 0]
            res = max(res, float(np.max(r - hi)), float(np.max(lo - r)))
        else:
            res = max(res, float(np.max((1.0 - aset.eta) * pb - qb)))
    return max(res, 0.0)


# --------------------------------------------------------------------------
# solvers


def _cost_matrix(aset, T):
    if aset.reference is None:
        raise ValueError("ambiguity set has no reference belief attached")
    if hasattr(T, "cell_total"):
        T = T.cell_total(aset.reference)
    T = np.asarray(T, dtype=float)
    n = aset.reference.grid.n
    if T.shape != (n, n):
        raise ValueError(f"total transfer has shape {T.shape}, expected {(n, n)}")
    return T


def _finish(aset, T, q, dual, info, sign, certified=True):
    ref = aset.reference
    Q = Density2D(ref.grid, q / q.sum())
    value = float(np.sum(Q.mass * T))
    if aset.domain == "joint":
        div = divergence(Q.mass, ref.joint, aset.divergence_name)
    else:
        div = max(divergence(Q.mass.sum(axis=1), ref.marginal_mass, aset.divergence_name),
                  divergence(Q.mass.sum(axis=0), ref.joint.sum(axis=0), aset.divergence_name))
    info = dict(info)
    info["reference_mass"] = ref.joint
    info["feasibility_residual"] = feasibility_residual(aset, Q)
    sol = WorstCaseSolution(value, Q, dual, div, False, certified, info, increasing=sign < 0)
    sol.monotone_flag = monotone_minimizer_diagnostic(sol)
    return sol


def _solve_joint(aset, T, sign):
    P = aset.reference.joint
    mask = P > 0
    q_flat, dual, info = linear_min(P[mask], sign * T[mask], aset)
    q = np.zeros_like(P)
    q[mask] = q_flat
    return q, dual, info, True


def _solve_ind(aset, T, sign, tol=1e-12, max_iter=10_000):
    P = aset.reference.joint
    p1, p2 = P.sum(axis=1), P.sum(axis=0)
    m1, m2 = p1 > 0, p2 > 0
    q1, q2 = p1.copy(), p2.copy()
    C = sign * T
    dual = None
    for it in range(1, max_iter + 1):
        new1 = np.zeros_like(p1)
        new1[m1], _, _ = linear_min(p1[m1], (C @ q2)[m1], aset)
        new2 = np.zeros_like(p2)
        new2[m2], dual, _ = linear_min(p2[m2], (C.T @ new1)[m2], aset)
        change = max(np.max(np.abs(new1 - q1)[m1] / p1[m1]), np.max(np.abs(new2 - q2)[m2] / p2[m2]))
        q1, q2 = new1, new2
        if change < tol:
            return np.outer(q1, q2), dual, {"iterations": it}, True
    return np.outer(q1, q2), dual, {"iterations": max_iter}, False


def _iid_run(aset, C, p, q, damping, tol, max_iter):
    dual = None
    for it in range(1, max_iter + 1):
        target, dual, _ = linear_min(p, C @ q, aset)
        new = (1.0 - damping) * q + damping * target
        change = float(np.max(np.abs(new - q) / p))
        q = new
        if change < tol:
            # finish on the target so the final point is exactly feasible
            target, dual, _ = linear_min(p, C @ q, aset)
            return target, dual, it, True
    return target, dual, max_iter, False


def _solve_iid(aset, T, sign, seed=0, starts=5, damping=0.5, tol=1e-10, max_iter=10_000):
    ref = aset.reference
    p_full = ref.marginal_mass
    mask = p_full > 0
    p = p_full[mask]
    C = sign * 0.5 * (T + T.T)[np.ix_(mask, mask)]
    rng = np.random.default_rng(seed)
    runs = []
    for s in range(starts):
        if s == 0:
            q0 = p.copy()
        else:
            q0, _, _ = linear_min(p, rng.standard_normal(p.size), aset)
        q, dual, its, ok = _iid_run(aset, C, p, q0, damping, tol, max_iter)
        runs.append((float(q @ C @ q), q, dual, its, ok))
    good = [r for r in runs if r[4]] or runs
    best = min(good, key=lambda r: r[0])
    values = [sign * r[0] for r in runs]
    q_full = np.zeros_like(p_full)
    q_full[mask] = best[1]
    info = {
        "seed": seed,
        "iterations": best[3],
        "start_values": values,
        "dispersion": float(max(values) - min(values)),
        "converged_starts": sum(r[4] for r in runs),
    }
    return np.outer(q_full, q_full), best[2], info, best[4]


def _solve(aset, T, sign, seed):
    T = _cost_matrix(aset, T)
    if aset.eta == 0:
        P = aset.reference.joint
        return _finish(aset, T, P.copy(), None, {"singleton": True}, sign)
    if aset.domain == "joint":
        q, dual, info, ok = _solve_joint(aset, T, sign)
    elif aset.domain == "ind":
        q, dual, info, ok = _solve_ind(aset, T, sign)
    else:
        q, dual, info, ok = _solve_iid(aset, T, sign, seed=seed)
    return _finish(aset, T, q, dual, info, sign, certified=ok)


def worst_case_revenue(aset: AmbiguitySet, T, seed=0) -> WorstCaseSolution:
    """``min_Q E_Q[T]`` over the set; ``T`` is an n x n cell-total matrix or a transfer."""
    return _solve(aset, T, 1.0, seed)


def best_case_revenue(aset: AmbiguitySet, T, seed=0) -> WorstCaseSolution:
    """``max_Q E_Q[T]`` over the set."""
    return _solve(aset, T, -1.0, seed)


@dataclass(frozen=True)
class PenalizedValue:
    value: float
    minimizer: np.ndarray
    limit: bool = False


def divergence_preference_value(T, reference: ReferenceBelief, eta, phi="kl") -> PenalizedValue:
    """``min_Q E_Q[T] + D(Q || P) / eta`` on the grid.

    At ``eta == 0`` the penalty is infinite and the value is ``E_P[T]``
    (flagged with ``limit=True``).
    """
    if hasattr(T, "cell_total"):
        T = T.cell_total(reference)
    T = np.asarray(T, dtype=float)
    P = reference.joint
    if eta < 0:
        raise ValueError("penalty scale must be nonnegative")
    if eta == 0:
        return PenalizedValue(float(np.sum(P * T)), P.copy(), True)
    mask = P > 0
    p, c = P[mask], T[mask]
    if phi == "kl":
        q, _ = _kl_tilt(p, c, 1.0 / eta)
    else:
        gen = get_phi(phi)
        r, _ = _phi_normalize(gen, p, c, 1.0 / eta)
        q = p * r
    Q = np.zeros_like(P)
    Q[mask] = q
    value = float(np.sum(Q * T)) + divergence(Q, P, phi) / eta
    return PenalizedValue(value, Q)


def gibbs_value(T, reference: ReferenceBelief, eta) -> float:
    """``-(1/eta) log E_P[exp(-eta T)]``, computed with a shifted log-sum-exp."""
    if hasattr(T, "cell_total"):
        T = T.cell_total(reference)
    P = reference.joint
    mask = P > 0
    c = np.asarray(T, dtype=float)[mask]
    m = c.min()
    return float(m - math.log(np.dot(P[mask], np.exp(-eta * (c - m)))) / eta)
