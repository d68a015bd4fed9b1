"""Command-line entry point.

Exit codes: 0 success, 1 a checked claim failed, 2 configuration error,
3 a solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, parse_marginal
from .experiments import _json_default, run_experiment, write_result

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("maxmin_auctions")


def _common(p):
    p.add_argument("--config", type=Path, help="YAML file with experiment fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--grid", type=int, help="grid size n")
    p.add_argument("--seed", type=int, help="seed for multi-start solvers and oracle suites")
    p.add_argument("--workers", type=int, help="parallel rows")


def build_parser():
    ap = argparse.ArgumentParser(prog="maxmin-auctions",
                                 description="Worst-case auction revenue experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=f"run the {name} experiment"))
    cmp_ = sub.add_parser("compare", help="crossing and reference-revenue certificate for a pair")
    _common(cmp_)
    cmp_.add_argument("--x", required=True)
    cmp_.add_argument("--y", required=True)
    cmp_.add_argument("--marginal", default="uniform")
    cmp_.add_argument("--zeta", type=float, help="use a band reference instead of IID")
    ver = sub.add_parser("verify", help="run the brute-force oracle suites")
    _common(ver)
    ver.add_argument("--quick", action="store_true", help="a tenth of the randomized instances")
    return ap


def _experiment_config(args) -> ExperimentConfig:
    overrides = {"out": args.out, "n": args.grid, "seed": args.seed, "workers": args.workers}
    if args.config:
        return load_config(args.config, experiment=args.command, **overrides)
    return ExperimentConfig(experiment=args.command, **{k: v for k, v in overrides.items() if v is not None})


def _run_experiment(args) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg)
    path = write_result(result, cfg)
    for k, v in result.checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    print(f"wrote {path}")
    if not result.converged:
        return EXIT_SOLVER
    return EXIT_OK if result.passed else EXIT_ASSERT


def _run_compare(args) -> int:
    from .auctions import parse_auction, transfer
    from .comparison import check_nwscc, check_rrc, check_scc, check_wscc, linkage_diagnostics
    from .measure import build_band_reference, build_iid_reference

    n = args.grid or 400
    if args.zeta is not None:
        ref = build_band_reference(args.zeta, n)
    else:
        ref = build_iid_reference(parse_marginal(args.marginal), n)
    try:
        X, Y = parse_auction(args.x, ref), parse_auction(args.y, ref)
        tx, ty = transfer(X), transfer(Y)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    w, s, nw = check_wscc(tx, ty), check_scc(tx, ty), check_nwscc(tx, ty)
    rrc = check_rrc(tx, ty, ref)
    link = linkage_diagnostics(tx, ty, ref)
    record = {
        "x": X.name, "y": Y.name, "n": n, "reference": ref.label,
        "wscc": {"holds": w.holds, "thresholds": w.thresholds, "witness": w.witness},
        "scc": {"holds": s.holds, "witness": s.witness},
        "nwscc": {"holds": nw.holds, "thresholds": nw.thresholds, "witness": nw.witness},
        "rrc": {"holds": rrc.holds, "max_deficit": rrc.max_deficit},
        "linkage": {"lc1": link.lc1, "lc2": link.lc2, "note": link.reason},
        "certified_worst_case": bool(w.holds and rrc.holds),
        "certified_best_case": bool(nw.holds and rrc.holds),
    }
    text = json.dumps(record, indent=2, default=_json_default)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"compare_{X.name}_{Y.name}.json").write_text(text)
    print(text)
    return EXIT_OK


def _run_verify(args) -> int:
    from .verify import verify

    suites = verify(seed=args.seed or 0, quick=args.quick)
    for s in suites:
        print(s.line())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"suite": s.name, "checked": s.checked, "failures": s.failures} for s in suites]
        (out / "verify.json").write_text(json.dumps(rows, indent=2))
    return EXIT_OK if all(s.passed for s in suites) else EXIT_ASSERT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    np.seterr(over="ignore")
    try:
        if args.command == "compare":
            return _run_compare(args)
        if args.command == "verify":
            return _run_verify(args)
        return _run_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
