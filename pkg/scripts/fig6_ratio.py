"""Second-price over all-pay worst-case revenue across KL radii.

Alongside the solved ratio it prints the small-radius expansion
R ~ E[T] - sqrt(2 eta Var[T]), which makes the sign of R(II)/R(A) - 1
readable directly from the reference variances of the two totals.
"""

import argparse

import numpy as np

from maxmin_auctions.ambiguity import AmbiguitySet, worst_case_revenue
from maxmin_auctions.auctions import AuctionSpec, transfer
from maxmin_auctions.config import parse_marginal, parse_sweep
from maxmin_auctions.measure import build_iid_reference


def moments(T, P):
    m = float(np.sum(P * T))
    return m, float(np.sum(P * (T - m) ** 2))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--marginals", nargs="+", default=["power:1", "power:1.5"])
    ap.add_argument("--etas", default="log:1e-3:1:13")
    ap.add_argument("--grid", type=int, default=200)
    args = ap.parse_args(argv)
    etas = parse_sweep(args.etas)
    for m in args.marginals:
        ref = build_iid_reference(parse_marginal(m), args.grid)
        T2 = transfer(AuctionSpec("spa", ref)).cell_total(ref)
        TA = transfer(AuctionSpec("apa", ref)).cell_total(ref)
        (m2, v2), (mA, vA) = moments(T2, ref.joint), moments(TA, ref.joint)
        print(f"\n{m}: E[T_II]={m2:.5f} Var={v2:.5f}   E[T_A]={mA:.5f} Var={vA:.5f}")
        print(f"{'eta':>8} {'R_II':>9} {'R_A':>9} {'ratio':>8} {'expansion':>10}")
        for eta in etas:
            aset = AmbiguitySet("kl", eta, "joint", ref)
            r2 = worst_case_revenue(aset, T2).value
            rA = worst_case_revenue(aset, TA).value
            approx = (m2 - np.sqrt(2 * eta * v2)) / (mA - np.sqrt(2 * eta * vA))
            print(f"{eta:8.4f} {r2:9.5f} {rA:9.5f} {r2 / rA:8.4f} {approx:10.4f}")


if __name__ == "__main__":
    main()
