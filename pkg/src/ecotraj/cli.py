"""Command-line front end: run, generate, evaluate, sweep.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager, nullcontext
from dataclasses import replace
from typing import Sequence

from . import io as eio
from .engine import run
from .errors import DataError, EcoError, ParameterError
from .geo import Params
from .metrics import mean_of
from .synthetic import GeneratorSpec, two_blob_scenario, generate_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# flag name -> Params field
PARAM_FLAGS = {
    "eps": "eps0",
    "min_pts": "min_pts",
    "delta": "delta",
    "rho": "rho",
    "alpha": "alpha",
    "mu": "mu",
    "delta_t": "delta_t",
    "delta_eps": "delta_eps",
    "dist_floor": "dist_floor",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_params(p: argparse.ArgumentParser) -> None:
    d = Params()
    p.add_argument("--eps", type=float, default=d.eps0, help="initial eps in meters")
    p.add_argument("--min-pts", type=int, default=d.min_pts)
    p.add_argument("--delta", type=float, default=d.delta, help="minimal-group radius in meters")
    p.add_argument("--rho", type=int, default=d.rho, help="minimum size of an active group")
    p.add_argument("--alpha", type=float, default=d.alpha, help="weight of the historical cost")
    p.add_argument("--mu", type=float, default=d.mu, help="speed limit in m/s")
    p.add_argument("--delta-t", type=float, default=d.delta_t, help="step length in seconds")
    p.add_argument("--delta-eps", type=float, default=d.delta_eps, help="eps probe step in meters")
    p.add_argument("--dist-floor", type=float, default=d.dist_floor, help="distance floor for similarities")
    p.add_argument("--gap-steps", type=int, default=1, help="missed steps after which history expires")
    p.add_argument("--init-max-iters", type=int, default=10, help="eps search rounds at the first step")
    p.add_argument("--origin", type=float, default=None, help="stream origin in seconds (default: first timestamp)")
    p.add_argument("--disable-smoothing", action="store_true", help="cluster raw locations")
    p.add_argument("--seed", type=int, default=None, help="accepted for config symmetry; the pipeline draws no random numbers")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV of object_id,timestamp,lat,lon (or x,y with --planar)")
    p.add_argument("--planar", action="store_true", help="input holds planar meters instead of lat/lon")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecotraj", description="Evolutionary density clustering of moving-object streams.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="cluster a record stream step by step")
    _add_input(p)
    _add_params(p)
    p.add_argument("--out", help="per-step JSONL (default: stdout)")
    p.add_argument("--metrics-out", help="per-step summary CSV")
    p.add_argument("--assignments-out", help="per-object cluster assignments CSV, input to `evaluate`")

    p = sub.add_parser("generate", help="write a synthetic planar stream as CSV")
    g = GeneratorSpec()
    p.add_argument("--groups", type=int, default=g.group_count)
    p.add_argument("--objects-per-group", type=int, default=g.objects_per_group)
    p.add_argument("--steps", type=int, default=g.steps)
    p.add_argument("--speed", type=float, default=g.group_speed, help="group speed in m/s")
    p.add_argument("--spread", type=float, default=g.spread, help="intra-group spread in meters")
    p.add_argument("--deviation-p", type=float, default=g.deviation_p)
    p.add_argument("--deviation-magnitude", type=float, default=g.deviation_magnitude)
    p.add_argument("--separation", type=float, default=g.separation)
    p.add_argument("--delta-t", type=float, default=g.delta_t)
    p.add_argument("--seed", type=int, default=g.seed)
    p.add_argument("--two-blob", action="store_true", help="emit the fixed 12-object, 3-step scenario instead")
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("evaluate", help="recompute QS and NMI from an assignments file")
    p.add_argument("--input", required=True)
    p.add_argument("--dist-floor", type=float, default=Params().dist_floor)
    p.add_argument("--out", help="per-step CSV of step,qs,nmi")

    p = sub.add_parser("sweep", help="metrics over a grid of one parameter")
    _add_input(p)
    _add_params(p)
    p.add_argument("--param", required=True, choices=sorted(PARAM_FLAGS), help="parameter to vary")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="output CSV (default: stdout)")
    return parser


@contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _params(args) -> Params:
    return Params(**{field: getattr(args, flag) for flag, field in PARAM_FLAGS.items()})


def _records(args):
    report = eio.parse_records(args.input, "planar" if args.planar else "geographic", strict=args.strict)
    if report.malformed:
        print(f"skipped {report.malformed} malformed line(s)", file=sys.stderr)
    # stable sort: equal timestamps keep file order
    return sorted(report.records, key=lambda r: r.timestamp)


def _engine_kwargs(args) -> dict:
    if args.gap_steps < 0:
        raise ParameterError("--gap-steps must be non-negative")
    if args.init_max_iters < 1:
        raise ParameterError("--init-max-iters must be at least 1")
    return dict(
        origin=args.origin,
        gap_steps=args.gap_steps,
        smoothing=not args.disable_smoothing,
        init_max_iters=args.init_max_iters,
        strict=args.strict,
    )


def cmd_run(args) -> int:
    params = _params(args)
    kwargs = _engine_kwargs(args)
    records = _records(args)
    metrics_ctx = open(args.metrics_out, "w", newline="", encoding="utf-8") if args.metrics_out else nullcontext()
    assign_ctx = open(args.assignments_out, "w", newline="", encoding="utf-8") if args.assignments_out else nullcontext()
    with _open_out(args.out) as out, metrics_ctx as mfh, assign_ctx as afh:
        summary = csv.writer(mfh, lineterminator="\n") if mfh else None
        assign = csv.writer(afh, lineterminator="\n") if afh else None
        if summary:
            summary.writerow(eio.SUMMARY_FIELDS)
        if assign:
            assign.writerow(eio.ASSIGNMENT_FIELDS)
        for result in run(records, params, **kwargs):
            out.write(eio.dump_step(result) + "\n")
            if summary:
                summary.writerow(eio.summary_row(result))
            if assign:
                assign.writerows(eio.assignment_rows(result))
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.two_blob:
        records = two_blob_scenario().records
    else:
        spec = GeneratorSpec(
            group_count=args.groups,
            objects_per_group=args.objects_per_group,
            steps=args.steps,
            group_speed=args.speed,
            spread=args.spread,
            deviation_p=args.deviation_p,
            deviation_magnitude=args.deviation_magnitude,
            seed=args.seed,
            delta_t=args.delta_t,
            separation=args.separation,
        )
        records = generate_synthetic(spec)
    with _open_out(args.out) as out:
        eio.write_records(records, out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ev = eio.evaluate(eio.read_assignments(args.input), args.dist_floor)
    if args.out:
        with _open_out(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "qs", "nmi"])
            for k, q, n in zip(ev.steps, ev.qs, ev.nmi):
                w.writerow([k, "" if q is None else repr(q), "" if n is None else repr(n)])
    print(json.dumps({"steps": len(ev.steps), "mean_qs": ev.mean_qs, "mean_nmi": ev.mean_nmi}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _params(args)
    kwargs = _engine_kwargs(args)
    field = PARAM_FLAGS[args.param]
    cast = int if field in ("min_pts", "rho") else float
    try:
        values = [cast(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    if not values:
        raise UsageError("--values is empty")
    records = _records(args)
    with _open_out(args.out) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["param", "value", "steps", "mean_qs", "mean_nmi", "mean_ms", "mean_clusters", "mean_smoothed"])
        for v in values:
            params = replace(base, **{field: v})
            results = list(run(records, params, **kwargs))
            ms = [r.metrics.processing_seconds * 1000.0 for r in results]
            row = [
                args.param, v, len(results),
                mean_of([r.metrics.qs for r in results]),
                mean_of([r.metrics.nmi_with_prev for r in results]),
                mean_of(ms),
                mean_of([r.metrics.clusters for r in results if r.metrics.objects]),
                mean_of([r.metrics.smoothed for r in results if r.metrics.objects]),
            ]
            w.writerow(["" if c is None else c for c in row])
    return EXIT_OK


COMMANDS = {"run": cmd_run, "generate": cmd_generate, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError) as exc:
        print(f"ecotraj {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EcoError, OSError) as exc:
        print(f"ecotraj {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
