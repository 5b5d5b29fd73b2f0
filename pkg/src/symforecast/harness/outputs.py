"""Persist run records: results.csv, per-run forecast CSVs and static SVG charts.

results.csv has one row per run with the columns in ``COLUMNS``. Floats are
written with 17 significant digits so they re-parse to the same float64.
Empty cells mean "not applicable" (no truth to score against, failed run).
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from symforecast.harness.experiments import RunRecord  # noqa: E402

SCORE_COLUMNS = ["euclidean", "dtw", "euclidean_diff", "dtw_diff", "smape"]
TIMING_COLUMNS = ["build_s", "train_s", "forecast_s", "total_s"]
COLUMNS = (
    ["experiment", "series", "model", "train_mode", "seed", "lag", "k"]
    + SCORE_COLUMNS + TIMING_COLUMNS
    + ["epochs", "best_epoch", "string_length", "final_value", "band_fraction",
       "symbols", "forecast_file", "error"]
)
WALL_CLOCK_COLUMNS = set(TIMING_COLUMNS)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g") if math.isfinite(value) else str(float(value))
    return str(value)


def forecast_filename(rec: RunRecord) -> str:
    return f"{rec.experiment}__{rec.series}__{rec.model}__{rec.train_mode}__s{rec.seed}.csv"


def record_row(rec: RunRecord, forecast_file: str | None = None) -> dict:
    row = dict.fromkeys(COLUMNS, "")
    row.update(experiment=rec.experiment, series=rec.series, model=rec.model,
               train_mode=rec.train_mode, seed=rec.seed, lag=rec.lag, k=rec.k,
               epochs=rec.epochs, best_epoch=rec.best_epoch, symbols=rec.symbols,
               forecast_file=forecast_file, error=rec.error)
    if rec.scores is not None:
        row.update(rec.scores.as_dict())
    if rec.timings:
        row.update(build_s=rec.timings.get("build"), train_s=rec.timings.get("train"),
                   forecast_s=rec.timings.get("forecast"), total_s=rec.total_seconds)
    for key in ("string_length", "final_value", "band_fraction"):
        row[key] = rec.extra.get(key)
    return {k: fmt(v) for k, v in row.items()}


def write_results(records, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=COLUMNS)
            writer.writeheader()
            for rec in records:
                name = forecast_filename(rec) if rec.ok else None
                writer.writerow(record_row(rec, name and f"forecasts/{name}"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_forecast(rec: RunRecord, path) -> Path:
    path = Path(path)
    truth = rec.truth if rec.truth is not None else [None] * len(rec.forecast)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "forecast", "truth"])
        for step, (f, t) in enumerate(zip(rec.forecast, truth), start=1):
            writer.writerow([step, fmt(f), fmt(t)])
    return path


def read_results(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# charts


def _sine_chart(records):
    panels = defaultdict(list)
    for rec in records:
        if rec.scores is not None:
            n = int(rec.series.removeprefix("sine_n"))
            panels[(rec.model, rec.train_mode)].append((n, rec.scores.dtw))
    keys = sorted(panels)
    fig, axes = plt.subplots(max(1, len(keys)), 1, figsize=(7, 2.6 * max(1, len(keys))),
                             squeeze=False)
    for ax, key in zip(axes[:, 0], keys):
        n, d = np.array(panels[key]).T
        ax.scatter(n, d, s=10)
        if key[0] == "abba":
            k = records[0].k
            ax.axhline(0.1 * math.sqrt(k), color="k", lw=0.8)
        ax.set_yscale("log")
        ax.set_title(f"{key[0]} / {key[1]}")
        ax.set_xlabel("frequency n")
        ax.set_ylabel("DTW")
    return fig


def _forecast_chart(records):
    by_model = defaultdict(list)
    for rec in records:
        if rec.ok:
            by_model[(rec.series, rec.model)].append(rec)
    keys = sorted(by_model)[:12]
    fig, axes = plt.subplots(max(1, len(keys)), 1, figsize=(7, 2.6 * max(1, len(keys))),
                             squeeze=False)
    for ax, key in zip(axes[:, 0], keys):
        runs = by_model[key]
        for rec in runs:
            ax.plot(rec.forecast, lw=0.8, alpha=0.7)
        if runs[0].truth is not None:
            ax.plot(runs[0].truth, color="k", lw=1.2, ls="--", label="truth")
            ax.legend(loc="best", fontsize=7)
        ax.set_title(f"{key[0]}: {key[1]}")
        ax.set_xlabel("forecast step")
    return fig


def _bench_chart(records):
    paired = _pairs(records, lambda r: r.scores.smape if r.scores else None)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if paired:
        raw, sym = np.array(paired).T
        ax.scatter(raw, sym, s=12)
        top = max(raw.max(), sym.max())
        ax.plot([0, top], [0, top], color="k", lw=0.8)
    ax.set_xlabel("raw sMAPE")
    ax.set_ylabel("ABBA sMAPE")
    return fig


def _runtime_chart(records):
    paired = _pairs(records, lambda r: r.total_seconds)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    raw, sym = np.array(paired).T
    ax.scatter(raw, sym, s=12)
    top = max(raw.max(), sym.max())
    ax.plot([0, top], [0, top], color="k", lw=0.8)
    ax.set_xlabel("raw seconds (build + train + forecast)")
    ax.set_ylabel("ABBA seconds")
    return fig


def _pairs(records, value):
    """(raw, abba) value pairs for runs sharing series, training mode and seed."""
    table = {}
    for rec in records:
        if rec.ok:
            table[(rec.experiment, rec.series, rec.train_mode, rec.seed, rec.model)] = value(rec)
    out = []
    for (exp, series, mode, seed, model), v in table.items():
        other = table.get((exp, series, mode, seed, "abba"))
        if model == "raw" and v is not None and other is not None:
            out.append((v, other))
    return out


def write_charts(records, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    kinds = sorted({rec.experiment for rec in records})
    for kind in kinds:
        subset = [r for r in records if r.experiment == kind]
        if kind == "sine":
            fig = _sine_chart(subset)
        elif kind == "bench":
            fig = _bench_chart(subset)
        else:
            fig = _forecast_chart(subset)
        fig.tight_layout()
        path = out_dir / f"{kind}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    if _pairs(records, lambda r: r.total_seconds):
        fig = _runtime_chart(records)
        fig.tight_layout()
        path = out_dir / "runtime.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written


def emit_outputs(records, out_dir) -> dict:
    """Write everything for ``records`` into ``out_dir`` and return the paths."""
    out_dir = Path(out_dir)
    fc_dir = out_dir / "forecasts"
    try:
        fc_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {fc_dir}: {exc}") from exc
    results = write_results(records, out_dir / "results.csv")
    forecasts = [write_forecast(r, fc_dir / forecast_filename(r)) for r in records if r.ok]
    charts = write_charts(records, out_dir)
    return {"results": results, "forecasts": forecasts, "charts": charts}
