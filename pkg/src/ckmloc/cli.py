"""Command line entry point: ``ckmloc build-ckm | localize | experiment``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .ckm import build_ckm, load_ckm, save_ckm
from .config import load_scenario
from .harness import METHODS, parse_methods, run_sweep, simulate_trial
from .solver import localize

MODES = {"true": "true-geometry", "estimated": "estimated"}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckmloc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-ckm", help="build a channel knowledge map over the UE region")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--mode", choices=sorted(MODES), default="estimated")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--jobs", type=_positive, default=1)

    p = sub.add_parser("localize", help="simulate one observation and localize it")
    p.add_argument("--ckm", required=True, type=Path)
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--oracle-mode", action="store_true", help="perturb true path parameters instead of estimating them")

    p = sub.add_parser("experiment", help="Monte Carlo comparison, written as CSV")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--trials", type=_positive)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--jobs", type=_positive, default=1)
    return parser


def cmd_build_ckm(args) -> int:
    scenario = load_scenario(args.scenario)
    ckm = build_ckm(scenario, mode=MODES[args.mode], seed=args.seed, n_jobs=args.jobs)
    save_ckm(ckm, args.out)
    print(json.dumps({"out": str(args.out), "mode": ckm.mode, "entries": len(ckm), "shape": list(ckm.shape)}))
    return 0


def cmd_localize(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.oracle_mode:
        scenario = dataclasses.replace(scenario, oracle=True)
    ckm = load_ckm(args.ckm)
    if ckm.prior_scatterers is None:
        raise ValueError(f"{args.ckm}: map does not record its scatterers")
    ue, scat, obs = simulate_trial(scenario, ckm.prior_scatterers, args.seed, 0)
    res = localize(
        obs,
        ckm,
        scenario.dict_cfg,
        k_cand=scenario.k_cand,
        lambda_prior=scenario.lambda_prior,
        threshold=scenario.weight_threshold,
    )
    out = {
        "ue_true": ue.tolist(),
        "error_m": float(np.linalg.norm(res.ue_estimate - ue)),
        "coarse_error_m": float(np.linalg.norm(res.init - ue)),
        "n_scatterers": len(scat),
        "n_observed_paths": len(obs),
        **res.summary(),
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_experiment(args) -> int:
    scenario = load_scenario(args.config)
    if args.trials is not None:
        scenario = dataclasses.replace(scenario, n_trials=args.trials)
    rows = run_sweep(scenario, args.out_dir, parse_methods(args.methods), seed=args.seed, n_jobs=args.jobs)
    for row in rows:
        print(f"{row['method']:<12} N_add={row['N_add']:<2} M={row['M']:<3} rmse={row['rmse']:.3f} p50={row['p50']:.3f} p90={row['p90']:.3f}")
    return 0


COMMANDS = {"build-ckm": cmd_build_ckm, "localize": cmd_localize, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"ckmloc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
