"""Run every experiment config in configs/ and print a one-line verdict per check."""

import argparse
import sys
import time
from pathlib import Path

from maxmin_auctions.config import load_config
from maxmin_auctions.experiments import run_experiment, write_result

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--grid", type=int, help="override the grid size of every config")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    args = ap.parse_args(argv)
    failed = 0
    for path in sorted(args.configs.glob("*.yaml")):
        cfg = load_config(path, n=args.grid, out=str(args.out / path.stem))
        start = time.perf_counter()
        res = run_experiment(cfg)
        csv_path = write_result(res, cfg)
        print(f"== {path.name}: {len(res.rows)} rows in {time.perf_counter() - start:.1f}s -> {csv_path}")
        for name, ok in res.checks.items():
            print(f"   {'PASS' if ok else 'FAIL'} {name}")
        failed += not res.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
