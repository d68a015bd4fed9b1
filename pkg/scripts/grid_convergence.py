"""Worst-case revenues at successive grid doublings (uniform marginal, KL radius 0.2)."""

import argparse

from maxmin_auctions.ambiguity import parse_ambiguity, worst_case_revenue
from maxmin_auctions.auctions import AuctionSpec, transfer
from maxmin_auctions.config import parse_marginal
from maxmin_auctions.measure import build_iid_reference

AUCTIONS = ("fpa", "spa", "apa", "war")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--ambiguity", default="kl:0.2:joint")
    ap.add_argument("--marginal", default="uniform")
    args = ap.parse_args(argv)
    F = parse_marginal(args.marginal)
    prev = None
    print(f"{'n':>5} " + " ".join(f"{a:>10}" for a in AUCTIONS) + "   max change")
    for n in args.grids:
        ref = build_iid_reference(F, n)
        aset = parse_ambiguity(args.ambiguity, ref)
        vals = [worst_case_revenue(aset, transfer(AuctionSpec(a, ref))).value for a in AUCTIONS]
        change = "" if prev is None else f"{max(abs(a - b) for a, b in zip(vals, prev)):.2e}"
        print(f"{n:5d} " + " ".join(f"{v:10.6f}" for v in vals) + f"   {change}")
        prev = vals


if __name__ == "__main__":
    main()
