"""Experiment definitions: configs, synthetic data, and the run loop.

Every experiment expands into independent tasks, one per (series, model,
training mode, seed). A task trains, forecasts and scores a single model and
returns a ``RunRecord``.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from symforecast import abba
from symforecast.forecasting import TrainConfig, abba_pipeline, raw_pipeline
from symforecast.harness.io import first_series_per_class, load_csv
from symforecast.metrics import SimilarityReport, report
from symforecast.series import znormalize

KINDS = ("sine", "trend", "shape", "bench", "forecast")
MODELS = ("raw", "abba", "both")

LOW_BAND = (340.0, 370.0)
HIGH_BAND = (2450.0, 2550.0)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: str = "both"
    train_modes: tuple[str, ...] = ("stateful",)
    raw_lag: int = 10
    abba_lag: int = 10
    cells: int = 50
    layers: int = 2
    patience: int = 50
    dropout: float = 0.0
    max_epochs: int = 10000
    lr: float = 1e-3
    tol: float = 0.05
    max_k: int = 10
    scaling: float = 0.0
    max_len: int | None = None
    k: int = 50
    seeds: tuple[int, ...] = (0,)
    frequencies: tuple[int, ...] = ()
    n_samples: int = 1000
    data: str | None = None
    scale: float = 1.0
    forecast_mode: str = "iterated"
    holdout: bool = True
    min_train_length: int = 100
    min_string_length: int = 20

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"experiment kind must be one of {KINDS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError("scale must lie in (0, 1]")

    @property
    def models(self) -> tuple[str, ...]:
        return ("raw", "abba") if self.model == "both" else (self.model,)

    def train_config(self, model: str, mode: str, seed: int) -> TrainConfig:
        return TrainConfig(
            lag=self.raw_lag if model == "raw" else self.abba_lag,
            cells=self.cells, layers=self.layers, patience=self.patience, mode=mode,
            dropout=self.dropout, seed=seed, max_epochs=self.max_epochs, lr=self.lr)

    @property
    def abba_params(self) -> abba.AbbaParams:
        return abba.AbbaParams(self.tol, self.max_k, self.scaling, self.max_len)

    def scaled(self) -> "ExperimentConfig":
        """Shrink the frequency grid and seed list by ``scale``."""
        if self.scale == 1.0:
            return self
        return replace(self, frequencies=_thin(self.frequencies, self.scale),
                       seeds=_thin(self.seeds, self.scale), scale=1.0)


def _thin(items: tuple, scale: float) -> tuple:
    if not items:
        return items
    n = max(1, int(round(len(items) * scale)))
    idx = np.unique(np.linspace(0, len(items) - 1, n).round().astype(int))
    return tuple(items[i] for i in idx)


# paper settings for each experiment; anything else falls back to the dataclass defaults
DEFAULTS = {
    "sine": dict(raw_lag=50, abba_lag=5, patience=50, k=200, tol=0.1, n_samples=1000,
                 train_modes=("stateful", "stateless"), seeds=tuple(range(5)),
                 frequencies=tuple(range(1, 101))),
    "trend": dict(raw_lag=20, abba_lag=20, patience=10, k=200, n_samples=200, max_len=5,
                  seeds=tuple(range(10))),
    "shape": dict(raw_lag=50, abba_lag=5, patience=10, k=200, n_samples=1000),
    "bench": dict(raw_lag=10, abba_lag=10, patience=100, dropout=0.5, k=50),
    "forecast": dict(holdout=False),
}


def default_config(kind: str, **overrides) -> ExperimentConfig:
    if kind not in DEFAULTS:
        raise ValueError(f"experiment kind must be one of {KINDS}")
    return ExperimentConfig(kind=kind, **{**DEFAULTS[kind], **overrides})


def _coerce(name: str, text: str):
    ftype = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    text = text.strip()
    if ftype.startswith("tuple"):
        return tuple(_expand(text, str if "str" in ftype else int))
    if "None" in ftype and text.lower() in ("", "none"):
        return None
    if ftype.startswith("int"):
        return int(text)
    if ftype.startswith("float"):
        return float(text)
    if ftype.startswith("bool"):
        return text.lower() in ("1", "true", "yes", "on")
    return text


def _expand(text: str, cast):
    """Comma-separated items; integer items also accept ``a-b`` ranges."""
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        span = re.fullmatch(r"(-?\d+)-(-?\d+)", tok) if cast is int else None
        if span:
            out.extend(range(int(span[1]), int(span[2]) + 1))
        else:
            out.append(cast(tok))
    return out


def load_config(path, kind: str | None = None, **overrides) -> ExperimentConfig:
    """Read an INI file with one ``[experiment]`` section whose keys are config fields."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read config {path}")
    if not parser.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    section = dict(parser["experiment"])
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(section) - names
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    values = {key: _coerce(key, val) for key, val in section.items()}
    kind = kind or values.pop("kind", None)
    values.pop("kind", None)
    if kind is None:
        raise ValueError(f"{path}: no experiment kind given")
    return default_config(kind, **{**values, **overrides})


# ---------------------------------------------------------------------------
# data


def sine_wave(n: int, length: int = 1000, horizon: int = 0) -> np.ndarray:
    """``sin(2 pi i n / length)`` for ``i = 1 .. length + horizon``."""
    i = np.arange(1, length + horizon + 1)
    return np.sin(2 * np.pi * i * n / length)


def ramp(length: int = 200, horizon: int = 0, top: float = 0.5) -> np.ndarray:
    """Linear series from 0 to ``top`` over ``length`` samples, extended at the same slope."""
    return top / (length - 1) * np.arange(length + horizon)


def two_level_series(length: int, seed: int = 0, dwell=(20, 60),
                     low=LOW_BAND, high=HIGH_BAND) -> np.ndarray:
    """Square wave alternating between two bands with uniform noise inside each band."""
    rng = np.random.default_rng(seed)
    out: list[float] = []
    upper = False
    while len(out) < length:
        band = high if upper else low
        out.extend(rng.uniform(*band, int(rng.integers(dwell[0], dwell[1] + 1))))
        upper = not upper
    return np.asarray(out[:length])


def reference_sine(length: int = 2000, periods: int = 7, tol: float = 0.1,
                   max_k: int = 10) -> abba.SymbolicRepresentation:
    """ABBA string of a z-normalised sine with ``periods`` full oscillations."""
    t = np.sin(np.linspace(0.0, 2 * np.pi * periods, length))
    return abba.transform(znormalize(t)[0], tol=tol, max_k=max_k)


def periodic_tail(string: str, max_period: int = 4, skip_head: int = 1,
                  skip_tail: int = 1) -> int | None:
    """Smallest period ``<= max_period`` of the string without its start-up and closing symbols."""
    core = string[skip_head : len(string) - skip_tail]
    for p in range(1, max_period + 1):
        if len(core) > p and all(core[i] == core[i + p] for i in range(len(core) - p)):
            return p
    return None


def widen(band, factor: float = 1.1):
    mid, half = (band[0] + band[1]) / 2, (band[1] - band[0]) / 2 * factor
    return mid - half, mid + half


def band_fraction(values, bands) -> float:
    values = np.asarray(values)
    inside = np.zeros(values.shape, dtype=bool)
    for lo, hi in bands:
        inside |= (values >= lo) & (values <= hi)
    return float(inside.mean())


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunRecord:
    experiment: str
    series: str
    model: str
    train_mode: str
    seed: int
    lag: int
    k: int
    forecast: np.ndarray
    truth: np.ndarray | None = None
    scores: SimilarityReport | None = None
    timings: dict = field(default_factory=dict)
    epochs: int = 0
    best_epoch: int | None = None
    loss_history: list = field(default_factory=list)
    symbols: str | None = None
    extra: dict = field(default_factory=dict)
    error: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def total_seconds(self) -> float:
        return float(sum(self.timings.values()))


@dataclass(frozen=True)
class Task:
    cfg: ExperimentConfig
    series_name: str
    train: np.ndarray
    truth: np.ndarray | None
    model: str
    mode: str
    seed: int


def run_task(task: Task) -> RunRecord:
    cfg = task.cfg
    tcfg = cfg.train_config(task.model, task.mode, task.seed)
    rec = RunRecord(cfg.kind, task.series_name, task.model, task.mode, task.seed,
                    tcfg.lag, cfg.k, np.empty(0), task.truth,
                    config=dataclasses.asdict(cfg))
    try:
        if task.model == "raw":
            fc = raw_pipeline(task.train, tcfg, cfg.k, mode=cfg.forecast_mode)
        else:
            fc = abba_pipeline(task.train, cfg.abba_params, tcfg, cfg.k)
            rec.symbols = fc.symbols
            rec.extra["string_length"] = len(fc.representation)
        rec.forecast = np.asarray(fc.values, dtype=np.float64)
        rec.timings = dict(fc.timings)
        rec.loss_history = list(fc.loss_history)
        rec.best_epoch = fc.best_epoch
        rec.epochs = len(fc.loss_history)
        if task.truth is not None and cfg.k >= 2:
            rec.scores = report(rec.forecast, task.truth)
        _annotate(rec, task)
    except Exception as exc:  # a failed run is reported, not fatal to the batch
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.extra["traceback"] = traceback.format_exc(limit=3)
    return rec


def _annotate(rec: RunRecord, task: Task) -> None:
    if rec.experiment == "trend":
        top = float(np.max(task.train))
        rec.extra["final_value"] = float(rec.forecast[-1])
        rec.extra["train_max"] = top
    elif rec.experiment == "shape":
        # bands realised in the training data, split at the midpoint of the range
        mid = (task.train.min() + task.train.max()) / 2
        lower, upper = task.train[task.train < mid], task.train[task.train >= mid]
        realised = [(lower.min(), lower.max()), (upper.min(), upper.max())]
        rec.extra["band_fraction"] = band_fraction(rec.forecast, [widen(LOW_BAND), widen(HIGH_BAND)])
        rec.extra["train_band_fraction"] = band_fraction(rec.forecast, [widen(b) for b in realised])


def sine_tasks(cfg: ExperimentConfig) -> list[Task]:
    tasks = []
    for n in cfg.frequencies:
        full = sine_wave(n, cfg.n_samples, cfg.k)
        train, truth = full[: cfg.n_samples], full[cfg.n_samples :]
        for model in cfg.models:
            for mode in cfg.train_modes:
                for seed in cfg.seeds:
                    tasks.append(Task(cfg, f"sine_n{n}", train, truth, model, mode, seed))
    return tasks


def trend_tasks(cfg: ExperimentConfig) -> list[Task]:
    full = ramp(cfg.n_samples, cfg.k)
    train, truth = full[: cfg.n_samples], full[cfg.n_samples :]
    return [Task(cfg, "ramp", train, truth, model, mode, seed)
            for model in cfg.models for mode in cfg.train_modes for seed in cfg.seeds]


def shape_tasks(cfg: ExperimentConfig) -> list[Task]:
    if cfg.data:
        full = load_csv(cfg.data)
        name = Path(cfg.data).stem
    else:
        full = two_level_series(cfg.n_samples + cfg.k, seed=0)
        name = "two_level"
    if full.size > cfg.k + 1:
        train, truth = full[: full.size - cfg.k], full[full.size - cfg.k :]
    else:
        raise ValueError("shape series too short for the forecast horizon")
    return [Task(cfg, name, train, truth, model, mode, seed)
            for model in cfg.models for mode in cfg.train_modes for seed in cfg.seeds]


def admissible(series: np.ndarray, cfg: ExperimentConfig) -> bool:
    """Batch filter: long enough raw training part and ABBA string."""
    train = series[: series.size - cfg.k]
    if train.size < max(cfg.min_train_length, cfg.raw_lag + 1):
        return False
    p = cfg.abba_params
    rep = abba.transform(znormalize(train)[0], p.tol, p.max_k, p.scaling, max_len=p.max_len)
    # the pipeline trains on all but the final symbol
    return len(rep) >= max(cfg.min_string_length, cfg.abba_lag + 2)


def bench_tasks(cfg: ExperimentConfig) -> list[Task]:
    if not cfg.data:
        raise ValueError("bench needs a UCR directory (data = ...)")
    series = [(name, s) for name, s in first_series_per_class(cfg.data) if admissible(s, cfg)]
    series = list(_thin(tuple(series), cfg.scale)) if cfg.scale < 1.0 else series
    tasks = []
    for name, s in series:
        train, truth = s[: s.size - cfg.k], s[s.size - cfg.k :]
        for model in cfg.models:
            for mode in cfg.train_modes:
                for seed in cfg.seeds:
                    tasks.append(Task(cfg, name, train, truth, model, mode, seed))
    return tasks


def forecast_tasks(cfg: ExperimentConfig) -> list[Task]:
    if not cfg.data:
        raise ValueError("forecast needs a CSV series (data = ...)")
    s = load_csv(cfg.data)
    if cfg.holdout:
        train, truth = s[: s.size - cfg.k], s[s.size - cfg.k :]
    else:
        train, truth = s, None
    return [Task(cfg, Path(cfg.data).stem, train, truth, model, mode, seed)
            for model in cfg.models for mode in cfg.train_modes for seed in cfg.seeds]


TASK_BUILDERS = {"sine": sine_tasks, "trend": trend_tasks, "shape": shape_tasks,
                 "bench": bench_tasks, "forecast": forecast_tasks}


def run_experiment(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list[RunRecord]:
    """Expand ``cfg`` into tasks and run them, in order, optionally across processes."""
    cfg = cfg.scaled() if cfg.kind != "bench" else cfg
    tasks = TASK_BUILDERS[cfg.kind](cfg)
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(run_task, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = run_task(task)
            records.append(rec)
            if progress:
                progress(rec)
    return records


def _run_kind(kind: str, cfg: ExperimentConfig, **kw) -> list[RunRecord]:
    if cfg.kind != kind:
        raise ValueError(f"expected a {kind!r} config, got {cfg.kind!r}")
    return run_experiment(cfg, **kw)


def sine_sweep(cfg: ExperimentConfig, **kw) -> list[RunRecord]:
    return _run_kind("sine", cfg, **kw)


def trend_experiment(cfg: ExperimentConfig, **kw) -> list[RunRecord]:
    return _run_kind("trend", cfg, **kw)


def shape_experiment(cfg: ExperimentConfig, **kw) -> list[RunRecord]:
    return _run_kind("shape", cfg, **kw)


def batch_benchmark(cfg: ExperimentConfig, **kw) -> list[RunRecord]:
    return _run_kind("bench", cfg, **kw)
