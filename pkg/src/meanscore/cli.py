"""Command-line interface: ``meanscore sweep``, ``simulate``, ``describe`` and ``demo-data``."""

import argparse
import logging
import math
import sys

from .demo import demo_path, write_demo
from .errors import MeanScoreError
from .io import RunConfig, emit_results, load_dataset, parse_grid, write_results
from .sweep import run_sweep

EXIT_OK, EXIT_FIT, EXIT_INPUT = 0, 1, 2
# flags whose values may start with a minus sign
VALUE_FLAGS = ("--delta-grid", "--deltas", "--reason-delta")


def _float(text):
    text = text.strip().lower()
    if text in ("-inf", "-infinity"):
        return -math.inf
    return float(text)


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _reason_delta(text):
    reason, sep, value = text.partition("=")
    if not sep:
        reason, sep, value = text.partition(":")
    if not sep or not reason:
        raise argparse.ArgumentTypeError(f"expected REASON=VALUE or REASON=delta, got {text!r}")
    value = value.strip()
    return reason.strip(), value if value.lower() == "delta" else _float(value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meanscore",
        description="Mean score sensitivity analysis for trial outcomes missing not at random.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="sensitivity sweep over departures from MAR")
    sw.add_argument("data", help="comma-separated file with a header row; 'demo' for the bundled file")
    sw.add_argument("--config", help="YAML file with RunConfig fields; flags override it")
    sw.add_argument("--outcome")
    sw.add_argument("--arm")
    sw.add_argument("--covar", action="append", help="substantive covariate (repeatable)")
    sw.add_argument("--aux", action="append", help="auxiliary covariate (repeatable)")
    sw.add_argument("--reason", help="column holding the reason for missingness")
    sw.add_argument("--cluster", help="column holding cluster ids")
    sw.add_argument("--family", choices=("identity", "logit"))
    sw.add_argument("--delta-grid", type=parse_grid, metavar="MIN:MAX:STEPS",
                    help="STEPS equally spaced values from MIN to MAX")
    sw.add_argument("--deltas", type=lambda s: [_float(v) for v in _csv_list(s)],
                    help="explicit comma-separated values (may include -inf); overrides the grid")
    sw.add_argument("--pattern", choices=("both", "arm1", "arm0", "all"))
    sw.add_argument("--level", type=float)
    sw.add_argument("--engine", choices=("auto", "full", "tworeg"))
    sw.add_argument("--impute", action="append",
                    help="covariate to mean-impute (repeatable; 'all' for every covariate)")
    sw.add_argument("--reason-delta", action="append", type=_reason_delta, metavar="REASON=VALUE",
                    help="departure for one reason; VALUE 'delta' follows the sweep")
    sw.add_argument("--out", help="output file (default: standard output)")

    sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    sim.add_argument("--dgm", type=lambda s: [int(v) for v in _csv_list(s)], default=[1],
                     help="comma-separated DGMs from 1-4")
    sim.add_argument("--scenario", type=_csv_list, default=["a"],
                     help="comma-separated scenarios from a-d")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--methods", type=_csv_list, default=None,
                     help="comma-separated subset of full,cc,ms,mi,sm")
    sim.add_argument("--seed", type=int, default=20150101)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--mi-imputations", type=int, default=30)
    sim.add_argument("--out", help="output file (default: standard output)")

    desc = sub.add_parser("describe", help="summarise a dataset by arm")
    desc.add_argument("data")
    desc.add_argument("--outcome", required=True)
    desc.add_argument("--arm", default="arm")

    demo = sub.add_parser("demo-data", help="write the synthetic demonstration dataset")
    demo.add_argument("directory")
    return parser


def _sweep_config(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "outcome": args.outcome, "arm": args.arm, "covariates": args.covar,
        "auxiliaries": args.aux, "reason": args.reason, "cluster": args.cluster,
        "family": args.family, "delta_grid": args.delta_grid, "deltas": args.deltas,
        "patterns": args.pattern, "level": args.level, "engine": args.engine,
        "impute": args.impute, "out": args.out,
    }
    if args.reason_delta:
        overrides["reason_deltas"] = dict(args.reason_delta)
    return config.updated(**overrides)


def cmd_sweep(args):
    config = _sweep_config(args)
    path = demo_path() if args.data == "demo" else args.data
    data = load_dataset(path, config)
    rows = run_sweep(data, config)
    if config.out:
        emit_results(rows, config.out)
    else:
        write_results(rows, sys.stdout)
    failed = [row for row in rows if row.error]
    for row in failed:
        print(f"error: {row.pattern} delta={row.delta:g}: {row.error}", file=sys.stderr)
    return EXIT_FIT if failed else EXIT_OK


def cmd_simulate(args):
    from .sim import METHODS, DgmSpec, report_rows, run_study, write_report

    specs = [DgmSpec.scenario_spec(d, s, seed=args.seed) for d in args.dgm for s in args.scenario]
    methods = tuple(args.methods) if args.methods else METHODS
    reports = run_study(specs, args.reps, methods=methods, workers=args.workers,
                        mi_imputations=args.mi_imputations)
    if args.out:
        write_report(reports, args.out)
    else:
        header, rows = report_rows(reports)
        print(",".join(header))
        for row in rows:
            print(",".join(row))
    return EXIT_OK


def cmd_describe(args):
    config = RunConfig(outcome=args.outcome, arm=args.arm)
    data = load_dataset(demo_path() if args.data == "demo" else args.data, config)
    print("arm,n,n_obs,n_mis,outcome_mean")
    for arm in (1, 0):
        sel = data.z == arm
        obs = data.y[sel & data.observed]
        print(f"{arm},{sel.sum()},{len(obs)},{sel.sum() - len(obs)},{obs.mean():.10g}")
    return EXIT_OK


def cmd_demo(args):
    data_path, manifest_path = write_demo(args.directory)
    print(data_path)
    print(manifest_path)
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "simulate": cmd_simulate, "describe": cmd_describe,
            "demo-data": cmd_demo}


def _attach_negative_values(argv):
    # "--delta-grid -10:0:5" would otherwise be read as an unknown option
    out, k = [], 0
    while k < len(argv):
        tok = argv[k]
        if tok in VALUE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (MeanScoreError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
