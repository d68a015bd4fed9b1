"""Brute-force oracle suites behind the ``verify`` subcommand.

Each suite returns a :class:`SuiteResult`; everything is deterministic
given the seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .ambiguity import AmbiguitySet, worst_case_revenue
from .auctions import AuctionSpec, transfer
from .comparison import _implication_scan, _threshold_scan, check_wscc
from .measure import Grid1D, ReferenceBelief, UNIFORM, build_iid_reference
from .rearrangement import (
    MarginalPermutationClosure,
    PermutationClosure,
    anti_comonotone_rearrangement,
    brute_force_min,
    independent_decreasing_rearrangement,
    is_rearrangement,
    rectangle_reduction_check,
    min_over_decreasing_members,
    probabilistic_sophistication_check,
)


@dataclass
class SuiteResult:
    name: str
    checked: int
    failures: int
    witness: object = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.checked} checked, {self.failures} failures"


def random_monotone(rng, shape):
    """Random array strictly increasing along every axis."""
    T = rng.random(shape) + 1e-3
    for ax in range(len(shape)):
        T = np.cumsum(T, axis=ax)
    return T


def _reference(mass) -> ReferenceBelief:
    n = mass.shape[0]
    return ReferenceBelief(Grid1D(n), np.asarray(mass, dtype=float))


def _random_reference(rng, n, uniform):
    if uniform:
        return _reference(np.full((n, n), 1.0 / n**2))
    a = rng.random(n) + 0.1
    a /= a.sum()
    return _reference(np.outer(a, a))


def suite_restriction(rng, seeds=50, n=4):
    """Permutation closure minimum equals the minimum over its decreasing members."""
    fails, witness = 0, None
    for _ in range(seeds):
        seed = rng.random((n, n)) + 1e-3
        seed /= seed.sum()
        T = random_monotone(rng, (n, n))
        full, _ = brute_force_min(PermutationClosure(seed), T)
        dec, _ = min_over_decreasing_members(seed, T)
        if full != dec:
            fails += 1
            witness = witness or (seed, T, full, dec)
    return SuiteResult("restriction_to_decreasing_members", seeds, fails, witness)


def suite_anti_comonotone(rng, count=1000, construct=None, uniform=True):
    """Anti-comonotone rearrangement reverses T's order and lowers E[T].

    With uniform reference masses it must also be an exact rearrangement.
    With unequal masses exactness is generally impossible on a grid, so
    the suite checks instead that the ``exact`` flag tells the truth.
    """
    construct = construct or anti_comonotone_rearrangement
    fails, witness = 0, None
    for _ in range(count):
        n = int(rng.integers(2, 7))
        P = _random_reference(rng, n, uniform=uniform)
        Q = P.joint * (rng.random((n, n)) + 1e-3)
        Q /= Q.sum()
        T = random_monotone(rng, (n, n))
        res = construct(Q, T, P)
        q = res.density.mass
        r = q.ravel() / P.joint.ravel()
        order = np.argsort(T.ravel())
        exact = is_rearrangement(q, Q, P.joint)
        ok = (np.all(np.diff(r[order]) <= 1e-12)
              and float(np.sum(q * T)) <= float(np.sum(Q * T)) + 1e-12)
        ok = ok and (exact if uniform else exact == res.exact)
        if not ok:
            fails += 1
            witness = witness or (Q, T)
    name = "anti_comonotone_rearrangement" + ("" if uniform else "_weighted")
    return SuiteResult(name, count, fails, witness)


def suite_independent(rng, count=1000, uniform=True):
    """Independent decreasing rearrangement lowers E[T] and preserves IID;
    with uniform reference marginals it keeps each marginal ratio law exactly."""
    fails, witness = 0, None
    for k in range(count):
        n = int(rng.integers(2, 7))
        P = _random_reference(rng, n, uniform=uniform)
        p = P.joint.sum(axis=1)
        a = p * (rng.random(n) + 1e-3)
        a /= a.sum()
        iid = k % 3 == 0
        b = a if iid else p * (rng.random(n) + 1e-3)
        b = b / b.sum()
        Q = np.outer(a, b)
        T = random_monotone(rng, (n, n))
        out = independent_decreasing_rearrangement(Q, P).mass
        ok = float(np.sum(out * T)) <= float(np.sum(Q * T)) + 1e-12
        ra, rb = out.sum(axis=1) / p, out.sum(axis=0) / p
        ok = ok and np.all(np.diff(ra) <= 1e-12) and np.all(np.diff(rb) <= 1e-12)
        if uniform:
            ok = ok and is_rearrangement(out.sum(axis=1), a, p) and is_rearrangement(out.sum(axis=0), b, p)
        if iid:
            ok = ok and np.allclose(out, out.T, atol=1e-15)
        if not ok:
            fails += 1
            witness = witness or (Q, T)
    name = "independent_decreasing_rearrangement" + ("" if uniform else "_weighted")
    return SuiteResult(name, count, fails, witness)


def suite_marginal_oracle(rng, count=20, n=5):
    """On small product grids the independent rearrangement attains the marginal-permutation minimum."""
    fails = 0
    for _ in range(count):
        a = rng.random(n) + 1e-3
        a /= a.sum()
        T = random_monotone(rng, (n, n))
        P = _reference(np.full((n, n), 1.0 / n**2))
        best, _ = brute_force_min(MarginalPermutationClosure(a, a, iid=True), T)
        got = float(np.sum(independent_decreasing_rearrangement(np.outer(a, a), P).mass * T))
        fails += abs(best - got) > 1e-12
    return SuiteResult("independent_rearrangement_vs_permutations", count, int(fails))


def suite_rectangles(n=4):
    checked, failures = rectangle_reduction_check(np.full((n, n), 1.0 / n**2))
    return SuiteResult("upper_set_rectangle_inequality", checked, len(failures),
                       failures[0] if failures else None)


def suite_crossing_forms(rng, count=500, n=12):
    """Threshold and implication forms of weak single crossing agree."""
    fails = 0
    for _ in range(count):
        D = rng.choice([-1.0, 0.0, 1.0], size=(3, n), p=[0.3, 0.4, 0.3])
        D[0] = np.sort(D[0])[::-1]  # a guaranteed crossing row
        a = _threshold_scan(D, np.arange(n) / n, 1e-9)[0]
        b = _implication_scan(D, 1e-9)
        fails += a != b
    ref = build_iid_reference(UNIFORM, 60)
    tfs = [transfer(AuctionSpec(k, ref)) for k in ("fpa", "spa", "apa", "war")]
    for X in tfs:
        for Y in tfs:
            check_wscc(X, Y)  # raises if the two forms disagree
            count += 1
    return SuiteResult("crossing_form_equivalence", count, int(fails))


def suite_sophistication(rng, count=20, n=4):
    """Over a permutation-closed family, equally distributed payoffs have equal minima."""
    fails = 0
    for _ in range(count):
        seed = rng.random((n, n)) + 1e-3
        seed /= seed.sum()
        T = random_monotone(rng, (n, n))
        perm = rng.permutation(n * n)
        T2 = T.ravel()[perm].reshape(n, n)
        verdict = probabilistic_sophistication_check(PermutationClosure(seed), T, T2)
        fails += not bool(verdict)
    return SuiteResult("permutation_invariant_minima", count, int(fails))


def _kl_oracle(p, c, eta):
    """Direct NLP over the simplex: min q.c s.t. KL(q||p) <= eta."""
    cons = [
        {"type": "eq", "fun": lambda q: q.sum() - 1.0},
        {"type": "ineq", "fun": lambda q: eta - np.sum(q * np.log(np.maximum(q, 1e-300) / p))},
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(lambda q: q @ c, p.copy(), jac=lambda q: c, method="SLSQP",
                       bounds=[(1e-14, 1.0)] * p.size, constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 1000})
    return float(res.fun)


def blr_oracle(p, c, lo, hi):
    """Bounded-ratio minimum as an LP."""
    res = linprog(c, A_eq=np.ones((1, p.size)), b_eq=[1.0],
                  bounds=list(zip(lo * p, hi * p)), method="highs")
    return float(res.fun)


def suite_solver_oracles(rng, count=20, n=6):
    """Tilt and water-filling solvers match direct optimization on small grids."""
    fails, worst = 0, 0.0
    for k in range(count):
        P = _random_reference(rng, n, uniform=bool(k % 2))
        T = random_monotone(rng, (n, n))
        eta = float(rng.uniform(0.02, 0.8))
        kl = worst_case_revenue(AmbiguitySet("kl", eta, "joint", P), T).value
        ref_kl = _kl_oracle(P.joint.ravel(), T.ravel(), eta)
        rel = abs(kl - ref_kl) / abs(ref_kl)
        worst = max(worst, rel)
        fails += rel > 1e-4
        a, b = rng.uniform(0.2, 1.5, size=2)
        e = float(rng.uniform(0.05, 0.6))
        blr = worst_case_revenue(AmbiguitySet("blr", e, "joint", P, alpha=a, beta=b), T).value
        lo = max(1 - a * e, 0.0)
        fails += abs(blr - blr_oracle(P.joint.ravel(), T.ravel(), lo, 1 + b * e)) > 1e-9
    return SuiteResult("solver_oracles", 2 * count, int(fails), {"max_kl_rel_error": worst})


def verify(seed=0, construct=None, quick=False):
    """Run every oracle suite; ``construct`` swaps in a different anti-comonotone builder."""
    rng = np.random.default_rng(seed)
    scale = 10 if quick else 1
    return [
        suite_restriction(rng, seeds=50 // scale),
        suite_anti_comonotone(rng, count=1000 // scale, construct=construct),
        suite_anti_comonotone(rng, count=1000 // scale, construct=construct, uniform=False),
        suite_independent(rng, count=1000 // scale),
        suite_independent(rng, count=1000 // scale, uniform=False),
        suite_marginal_oracle(rng, count=20 // scale),
        suite_rectangles(),
        suite_crossing_forms(rng, count=500 // scale),
        suite_sophistication(rng, count=20 // scale),
        suite_solver_oracles(rng, count=20 // scale),
    ]
