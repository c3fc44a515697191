"""Command-line entry point.

Subcommands: validate-ce, sweep, grid-ce-time, single-trial. Every SimConfig
field has a flag override (e.g. --N 8 --sigma2_wR 1e-16); --config loads a
flat key=value file first, flags win.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness
from .channel import SimConfig, default_config, load_config


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    for field in dataclasses.fields(SimConfig):
        ftype = int if field.type in ("int", int) else float
        parser.add_argument(f"--{field.name}", type=ftype, default=None)
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")


def _resolve_config(args) -> SimConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(SimConfig)
        if getattr(args, f.name) is not None
    }
    if args.config:
        cfg = load_config(args.config)
        return dataclasses.replace(cfg, **overrides).validate()
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    return default_config(**overrides)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bscsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ce = sub.add_parser("validate-ce", help="sum-received-power vs SNR (CE quality)")
    _add_config_flags(p_ce)
    p_ce.add_argument("--values", type=_float_list,
                      default=[i * 40.0 / 19.0 for i in range(20)],
                      help="comma-separated SNR grid in dB")
    p_ce.add_argument("--trials", type=int, default=500)
    p_ce.add_argument("--out", required=True)

    p_sw = sub.add_parser("sweep", help="max-min rate sweep over one parameter")
    _add_config_flags(p_sw)
    p_sw.add_argument("--param", required=True, choices=harness.SWEEP_PARAMETERS)
    p_sw.add_argument("--values", type=_float_list, required=True)
    p_sw.add_argument("--trials", type=int, default=200)
    p_sw.add_argument("--designs", default="joint",
                      help="comma-separated subset of " + ",".join(harness.DESIGNS))
    p_sw.add_argument("--out", required=True)

    p_gr = sub.add_parser("grid-ce-time", help="2-D CE-time allocation grid")
    _add_config_flags(p_gr)
    p_gr.add_argument("--c0-values", type=_float_list,
                      default=[0.002, 0.005, 0.01, 0.02, 0.05, 0.1])
    p_gr.add_argument("--ck-values", type=_float_list,
                      default=[0.002, 0.005, 0.01, 0.02, 0.05])
    p_gr.add_argument("--trials", type=int, default=50)
    p_gr.add_argument("--out", required=True)

    p_tr = sub.add_parser("single-trial", help="run one seeded trial and print metrics")
    _add_config_flags(p_tr)
    p_tr.add_argument("--design", default="joint", choices=harness.DESIGNS)

    args = parser.parse_args(argv)
    cfg = _resolve_config(args)

    if args.command == "validate-ce":
        harness.validate_ce_sweep(
            cfg, args.values, trials=args.trials, out=args.out, jobs=args.jobs
        )
    elif args.command == "sweep":
        values = args.values
        if args.param in ("N", "M"):
            values = [int(v) for v in values]
        spec = harness.SweepSpec(
            parameter=args.param,
            values=tuple(values),
            trials=args.trials,
            designs=tuple(args.designs.split(",")),
        )
        harness.run_sweep(spec, cfg, out=args.out, jobs=args.jobs)
    elif args.command == "grid-ce-time":
        harness.grid_ce_time(
            cfg, args.c0_values, args.ck_values,
            trials=args.trials, out=args.out, jobs=args.jobs,
        )
    elif args.command == "single-trial":
        metrics = harness.run_trial(
            cfg, args.design, np.random.default_rng([cfg.seed, 0, 0])
        )
        for key in ("design", "min_rate", "sigma_r", "iterations", "gap"):
            print(f"{key} = {getattr(metrics, key)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
