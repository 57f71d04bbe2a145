"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .harness import (
    GENERATORS,
    SUITES,
    ConfigError,
    RunConfig,
    generate,
    plot_rows,
    rows_to_csv,
    rows_to_jsonl,
    run_single,
    sweep,
    verify,
)
from .metric import MetricError
from .oracles import OracleCapExceeded
from .placers import PLACERS

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    for conv in (int, float):
        try:
            return key, conv(value)
        except ValueError:
            pass
    return key, value


def _params(args) -> dict:
    params = dict(args.param or [])
    if getattr(args, "instance", None):
        params["path"] = args.instance
    return params


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(p, many=False):
    nargs = "+" if many else None
    p.add_argument("--generator", default="euclidean", choices=sorted(GENERATORS))
    p.add_argument("--n", type=int, required=True, nargs=nargs)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE", help="generator parameter")
    p.add_argument("--instance", help="instance JSON for --generator file")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omtsp", description="Online metric TSP placement experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit an instance as JSON")
    _add_common(p)

    p = sub.add_parser("run", help="run one placer and print its record")
    _add_common(p)
    p.add_argument("--algorithm", required=True)
    p.add_argument("--exact", action="store_true", help="compute exact OPT (small inputs only)")
    p.add_argument("--no-time", action="store_true", help="omit wall time for byte-stable output")

    p = sub.add_parser("sweep", help="run a grid of configs; JSON Lines or CSV")
    _add_common(p, many=True)
    p.add_argument("--algorithm", required=True, nargs="+")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--csv", action="store_true", help="flat summary table instead of JSONL")
    p.add_argument("--no-time", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--trials", "--budget", dest="trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("plotdata", help="CSV of ratio against sqrt(n)")
    _add_common(p, many=True)
    p.add_argument("--algorithm", default="rfmb")
    p.add_argument("--trials", type=int, default=5)
    return parser


def _cmd_gen(args) -> int:
    inst = generate(args.generator, args.n, args.seed, _params(args))
    _emit(inst.dumps() + "\n", args.out)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = RunConfig(args.algorithm, args.generator, args.n, args.seed, _params(args), args.exact, args.out)
    record = run_single(cfg)
    _emit(record.to_json(timing=not args.no_time) + "\n", args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    for name in args.algorithm:
        if name not in PLACERS:
            raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(PLACERS)}")
    params = _params(args)
    configs = [
        RunConfig(alg, args.generator, n, args.seed, params, args.exact, args.out, args.trials)
        for alg in args.algorithm
        for n in args.n
    ]
    result = sweep(configs, workers=args.workers)
    text = rows_to_csv(result.rows) if args.csv else rows_to_jsonl(result.rows, timing=not args.no_time)
    _emit(text, args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.trials < 1:
        raise ConfigError("budget must be at least 1")
    report = verify(args.suite, args.trials, args.seed)
    _emit(json.dumps(report.to_dict(), sort_keys=True) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_plotdata(args) -> int:
    if args.algorithm not in PLACERS:
        raise ConfigError(f"unknown algorithm {args.algorithm!r}")
    rows = plot_rows(args.algorithm, args.generator, args.n, args.trials, args.seed, _params(args))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


COMMANDS = {"gen": _cmd_gen, "run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify, "plotdata": _cmd_plotdata}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; those are config errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MetricError, OracleCapExceeded, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
