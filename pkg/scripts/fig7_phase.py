"""Sign table of R(I) - R(II) over (eta, zeta) for band references."""

import argparse

from maxmin_auctions.config import ExperimentConfig
from maxmin_auctions.experiments import run_fig7


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--etas", default="lin:0:1:11")
    ap.add_argument("--zetas", default="lin:0:0.9:10")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)
    cfg = ExperimentConfig("fig7", n=args.grid, etas=args.etas, zetas=args.zetas, workers=args.workers)
    res = run_fig7(cfg)
    cell = {(r["eta"], r["zeta"]): r for r in res.rows}
    mark = {1: "I", -1: "II", 0: "="}
    print("rows: eta, columns: zeta; entry names the auction with higher worst-case revenue")
    print(" " * 7 + "".join(f"{z:>5.2f}" for z in cfg.zetas))
    for eta in cfg.etas:
        line = "".join(f"{mark[cell[(eta, z)]['sign']] if cell[(eta, z)]['available'] else '?':>5}"
                       for z in cfg.zetas)
        print(f"{eta:6.3f} {line}")
    print("frontier (smallest eta with I ahead):", res.diagnostics["frontier"])
    for k, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {k}")


if __name__ == "__main__":
    main()
