"""Command line entry point: ``symforecast <experiment> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from symforecast.harness.experiments import KINDS, MODELS, default_config, load_config, run_experiment
from symforecast.harness.outputs import emit_outputs

OUT_ENV = "SYMFORECAST_OUT"

log = logging.getLogger("symforecast")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with an [experiment] section")
    common.add_argument("--seed", type=int, action="append",
                        help="training seed; repeat for several (overrides the config)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--scale", type=float,
                        help="fraction of the frequency grid, seeds or series to run")
    common.add_argument("--k", type=int, help="forecast length")
    common.add_argument("--data", help="input file or UCR directory")
    common.add_argument("--max-epochs", type=int)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="symforecast",
                                     description="Raw and symbolic LSTM forecasting experiments.")
    sub = parser.add_subparsers(dest="kind", required=True)
    helps = {
        "sine": "sine waves of varying frequency, DTW against the continuation",
        "trend": "linear ramp, can forecasts leave the training range",
        "shape": "two-level square wave, do forecasts stay in the bands",
        "bench": "first series of every UCR class",
        "forecast": "forecast a single CSV series",
    }
    for kind in KINDS:
        p = sub.add_parser(kind, parents=[common], help=helps[kind])
        if kind == "forecast":
            p.add_argument("--holdout", action="store_true",
                           help="score against the last k values instead of forecasting past the end")
    return parser


def config_from_args(args):
    overrides = {}
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    for name in ("model", "scale", "k", "data", "max_epochs"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if getattr(args, "holdout", False):
        overrides["holdout"] = True
    if args.config:
        return load_config(args.config, kind=args.kind, **overrides)
    return default_config(args.kind, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or os.environ.get(OUT_ENV) or "results"

    def progress(rec):
        status = "ok" if rec.ok else f"FAILED {rec.error}"
        dtw = f" dtw={rec.scores.dtw:.4g}" if rec.scores else ""
        log.info("%s %s %s/%s seed=%d%s %s", rec.experiment, rec.series, rec.model,
                 rec.train_mode, rec.seed, dtw, status)

    try:
        records = run_experiment(cfg, workers=args.workers, progress=progress)
        paths = emit_outputs(records, out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    failed = [r for r in records if not r.ok]
    print(f"{len(records)} runs, {len(failed)} failed; results in {paths['results']}")
    for rec in failed:
        print(f"  {rec.series} {rec.model}/{rec.train_mode} seed={rec.seed}: {rec.error}",
              file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
