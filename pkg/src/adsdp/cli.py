"""Command line: generate data, run methods, sweep rho or n.

Exit codes: 0 success, 2 usage error, 3 unreadable or invalid input data,
4 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attribution import Model
from .events import EventError
from .experiment import (
    METHODS,
    SCENARIOS,
    Dataset,
    ExperimentConfig,
    run_trials,
    summary_table,
    synthetic_dataset,
    write_results,
    write_summary,
)
from .synth import FULL_SCALE, GLOBAL_CAP, Family, SynthSpec, generate, read_csv, write_csv

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONFIG = 4

DESK_USERS = 10_000
DESK_PUBLISHERS = 50
RHO_VALUES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
N_VALUES = (7, 15, 31, 63, 127)


class UsageError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", default="zipf", help="synthetic family name or a directory written by 'generate'")
    p.add_argument("--users", type=int, default=None, help=f"synthetic users (default {DESK_USERS})")
    p.add_argument("--publishers", type=int, default=None, help=f"synthetic publishers (default {DESK_PUBLISHERS})")
    p.add_argument("--days", type=_positive_int, default=31)
    p.add_argument("--model", type=str.upper, choices=[m.value for m in Model], default="LTA", help="attribution model for CSV input")
    p.add_argument("--gs", type=_positive_int, default=None, help="global cap for CSV input (default: observed max)")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    _add_data_flags(p)
    p.add_argument("--config", type=Path, default=None, help="JSON file of run parameters")
    p.add_argument("--method", action="append", choices=METHODS, help="repeatable; default all methods")
    p.add_argument("--scenario", choices=SCENARIOS, default="prefix_wrmse")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", type=Path, required=True, help="results CSV path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adsdp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as event CSVs")
    g.add_argument("--family", choices=[f.value for f in Family], default="zipf")
    g.add_argument("--users", type=int, default=None)
    g.add_argument("--publishers", type=int, default=None)
    g.add_argument("--days", type=_positive_int, default=31)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ticks-per-day", type=_positive_int, default=86_400)
    g.add_argument("--out", type=Path, required=True, help="output directory")

    r = sub.add_parser("run", help="run methods for a number of seeded trials")
    _add_run_flags(r)

    s = sub.add_parser("sweep", help="run methods over a range of rho or n")
    _add_run_flags(s)
    s.add_argument("--axis", choices=("rho", "n"), required=True)
    s.add_argument("--values", type=float, nargs="*", default=None)

    cfg = sub.add_parser("config", help="print the default JSON config")
    cfg.add_argument("--out", type=Path, default=None)
    return ap


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    # constructing the mechanism config validates split, p, svt and friends
    cfg.adsbpc(cfg.lambda_cap or 10, cfg.seed)
    return cfg


def _dataset(args, n_days: int, seed: int) -> Dataset:
    name = args.dataset
    path = Path(name)
    if path.is_dir():
        stream = read_csv(path, Model(args.model))
        if stream.n_days != n_days and args.days != 31:
            raise UsageError("--days does not apply to CSV input")
        observed = int(stream.user_totals().max()) if stream.n_users else 1
        return Dataset(path.name, stream, args.gs or max(observed, 1)).warm()
    try:
        family = Family(name)
    except ValueError:
        raise UsageError(f"--dataset must be one of {[f.value for f in Family]} or a directory") from None
    users = args.users if args.users is not None else min(DESK_USERS, FULL_SCALE[family][0])
    pubs = args.publishers if args.publishers is not None else min(DESK_PUBLISHERS, FULL_SCALE[family][1])
    if users < 1 or pubs < 1:
        raise UsageError("--users and --publishers must be >= 1")
    return synthetic_dataset(family, users, pubs, n_days, seed)


def cmd_generate(args) -> int:
    family = Family(args.family)
    users = args.users if args.users is not None else min(DESK_USERS, FULL_SCALE[family][0])
    pubs = args.publishers if args.publishers is not None else min(DESK_PUBLISHERS, FULL_SCALE[family][1])
    if users < 0 or pubs < 1:
        raise UsageError("--users must be >= 0 and --publishers >= 1")
    stream = generate(SynthSpec(family, users, pubs, args.days, args.seed))
    out = write_csv(stream, args.out, args.ticks_per_day)
    print(f"wrote {stream.n_conversions} conversions (cap {GLOBAL_CAP[family]}) to {out}")
    return 0


def _summary_path(out: Path) -> Path:
    return out.with_name(out.stem + "_summary.csv")


def cmd_run(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    cfg = _load_config(args)
    methods = tuple(args.method or METHODS)
    data = _dataset(args, args.days, cfg.seed)
    results = run_trials(methods, data, args.scenario, cfg, args.trials)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_results(args.out, results)
    table = write_summary(_summary_path(args.out), results)
    for m, err in table.items():
        print(f"{m:8s} {err:.6g}")
    return 0


def cmd_sweep(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.values is not None and len(args.values) == 0:
        raise UsageError("--values needs at least one value")
    cfg = _load_config(args)
    methods = tuple(args.method or METHODS)
    values = args.values if args.values is not None else (RHO_VALUES if args.axis == "rho" else N_VALUES)
    if args.axis == "n" and any(v != int(v) or v < 1 for v in values):
        raise UsageError("n values must be positive integers")
    if args.axis == "rho" and any(not v > 0 for v in values):
        raise UsageError("rho values must be positive")

    all_results = []
    plot_rows = []
    data = None if args.axis == "n" else _dataset(args, args.days, cfg.seed)
    for v in values:
        if args.axis == "rho":
            run_cfg = replace(cfg, rho_total=float(v))
            d = data
        else:
            run_cfg = cfg
            d = _dataset(args, int(v), cfg.seed)
        res = run_trials(methods, d, args.scenario, run_cfg, args.trials)
        all_results.extend(res)
        for m, err in summary_table(res).items():
            errs = np.array([r.error for r in res if r.method == m])
            plot_rows.append([m, args.axis, repr(float(v)), repr(err), repr(float(errs.std(ddof=1))) if errs.size > 1 else "0.0"])

    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_results(args.out, all_results)
    plot = args.out.with_name(args.out.stem + "_plot.tsv")
    with plot.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["method", "axis", "value", "error", "trial_std"])
        w.writerows(sorted(plot_rows, key=lambda r: (METHODS.index(r[0]), float(r[2]))))
    print(f"wrote {len(all_results)} rows to {args.out} and plot data to {plot}")
    return 0


def cmd_config(args) -> int:
    text = ExperimentConfig().to_json() + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "sweep": cmd_sweep, "config": cmd_config}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"adsdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EventError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"adsdp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"adsdp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
