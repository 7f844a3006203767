"""Command-line interface: estimate on a CSV, simulate a dataset, run a study.

Exit codes: 0 success, 2 no valid instruments found, 1 any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .data import RngStream, center, load_csv, partial_out_covariates
from .errors import PseudoIVError
from .montecarlo import monte_carlo
from .pipeline import run_naive, run_proposed, run_split
from .simgen import PRESET_NAMES, ScenarioConfig, gen_dataset, preset

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_INSTRUMENTS = 2


def _parse_override(text: str):
    key, _, value = text.partition("=")
    if not _:
        raise argparse.ArgumentTypeError(f"override {text!r} is not of the form k=v")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudoiv",
        description="Find valid instruments among many candidates and estimate "
                    "the causal effect of an exposure on an outcome.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run one method on a CSV dataset")
    est.add_argument("--data", required=True, help="input CSV path")
    est.add_argument("--exposure", required=True, help="exposure column name")
    est.add_argument("--outcome", required=True, help="outcome column name")
    est.add_argument("--covariates", nargs="*", default=[],
                     help="covariate column names to partial out")
    est.add_argument("--method", choices=("proposed", "naive", "split"),
                     default="proposed")
    est.add_argument("--omega", type=float, default=2.01)
    est.add_argument("--screen-s", type=int, default=None,
                     help="screening size (default: n/log n rounded to 100)")
    est.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="l1 penalty level (default: sqrt(log p / n))")
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--include-pseudos", action="store_true",
                     help="naive method only: also screen permuted copies")
    est.add_argument("--out", default=None, help="write the full result as JSON")

    sim = sub.add_parser("simulate", help="generate a synthetic dataset CSV")
    sim.add_argument("--preset", required=True, choices=PRESET_NAMES)
    sim.add_argument("--p", type=int, default=None,
                     help="override the preset's candidate count")
    sim.add_argument("--override", type=_parse_override, action="append",
                     default=[], metavar="K=V",
                     help="scenario field override, e.g. n=1000 or sigma_D2=1")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")

    mc = sub.add_parser("mc", help="run a Monte Carlo study over one scenario")
    mc.add_argument("--preset", default="main", choices=PRESET_NAMES)
    mc.add_argument("--config", default=None,
                    help="JSON scenario file (overrides --preset)")
    mc.add_argument("--replicates", type=int, default=200)
    mc.add_argument("--methods", nargs="+",
                    default=["proposed", "naive", "split", "oracle"],
                    help="any of: proposed naive split oracle ols "
                         "(space- or comma-separated)")
    mc.add_argument("--threads", type=int, default=1)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--omega", type=float, default=2.01)
    mc.add_argument("--p", type=int, default=2000,
                    help="candidate count (desk-scale default 2000)")
    mc.add_argument("--sigma-d2", type=float, default=None,
                    help="override the exposure noise variance")
    mc.add_argument("--out-dir", required=True)
    return parser


def _split_commas(items):
    return [piece for item in items for piece in item.split(",") if piece]


def _cmd_estimate(args) -> int:
    ds = load_csv(args.data, exposure_col=args.exposure, outcome_col=args.outcome,
                  covariate_cols=tuple(_split_commas(args.covariates)))
    ds = center(ds)
    if ds.X is not None:
        ds = partial_out_covariates(ds)
    rng = RngStream(args.seed)
    if args.method == "proposed":
        res = run_proposed(ds, omega=args.omega, s=args.screen_s, lam=args.lam,
                           rng=rng, alpha=args.alpha)
    elif args.method == "split":
        res = run_split(ds, omega=args.omega, s=args.screen_s, lam=args.lam,
                        rng=rng, alpha=args.alpha)
    else:
        res = run_naive(ds, omega=args.omega, s=args.screen_s, lam=args.lam,
                        alpha=args.alpha, include_pseudos=args.include_pseudos,
                        rng=rng)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res.to_dict(), fh, indent=2)
    if res.estimate is None:
        for line in res.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_NO_INSTRUMENTS
    print(res.estimate.summary())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = preset(args.preset, p=args.p, seed=args.seed)
    if args.override:
        from dataclasses import replace
        cfg = replace(cfg, **dict(args.override))
    ds = gen_dataset(cfg, RngStream(args.seed))
    header = ["d", "y"]
    k = 0 if ds.X is None else ds.X.shape[1]
    header += [f"x{i + 1}" for i in range(k)]
    header += [f"z{j + 1}" for j in range(ds.p)]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [repr(float(ds.D[i])), repr(float(ds.Y[i]))]
            if k:
                row += [repr(float(v)) for v in ds.X[i]]
            row += [repr(float(v)) for v in ds.Z[i]]
            writer.writerow(row)
    print(f"wrote {ds.n} rows x {len(header)} columns to {args.out}")
    return EXIT_OK


def _cmd_mc(args) -> int:
    config = None
    if args.config:
        with open(args.config) as fh:
            config = ScenarioConfig.from_json(fh.read())
    result = monte_carlo(args.preset, replicates=args.replicates,
                         methods=tuple(_split_commas(args.methods)), threads=args.threads,
                         master_seed=args.seed, omega=args.omega, p=args.p,
                         sigma_D2=args.sigma_d2, config=config,
                         out_dir=args.out_dir)
    for row in result.metrics:
        print(f"{row.method}: bias={row.bias:.4f} rmse={row.rmse:.4f} "
              f"coverage={row.coverage:.3f} ({row.estimates}/{row.replicates} "
              f"estimates)")
    print(f"wrote metrics.csv, replicates.csv, histogram.csv to {args.out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_mc(args)
    except PseudoIVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
