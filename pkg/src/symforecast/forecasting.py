"""Training sets, stateful/stateless training and multi-step forecasting.

Sequences are either raw float values (scalar inputs, linear head, MSE) or
symbol indices (one-hot inputs, softmax head, cross entropy).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from symforecast import abba
from symforecast.neural import (
    Adam,
    LstmStackParams,
    backward_window,
    init_params,
    loss_mse,
    loss_xent,
    mse_grad,
    window_forward,
    xent_grad,
)
from symforecast.series import as_series, denormalize, znormalize

MODES = ("stateful", "stateless")


@dataclass(frozen=True)
class TrainingPair:
    input: np.ndarray
    output: np.ndarray | float | int
    origin_index: int  # 1-based position of the first input value


@dataclass(frozen=True)
class TrainConfig:
    lag: int = 10
    cells: int = 50
    layers: int = 2
    patience: int = 50
    mode: str = "stateful"
    dropout: float = 0.0
    seed: int = 0
    max_epochs: int = 10000
    lr: float = 1e-3
    min_delta: float = 1e-6

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.lag < 1 or self.cells < 1 or self.layers < 1 or self.patience < 1:
            raise ValueError("lag, cells, layers and patience must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class TrainResult:
    params: LstmStackParams
    loss_history: list[float]
    best_epoch: int  # 1-based
    epochs: int


@dataclass
class ForecastResult:
    values: np.ndarray
    mode: str
    symbols: str | None = None
    timings: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)
    best_epoch: int | None = None
    representation: abba.SymbolicRepresentation | None = None

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# training sets


def build_windows(sequence, lag: int, horizon: int = 1) -> list[TrainingPair]:
    """Sliding windows of ``lag`` inputs followed by ``horizon`` outputs.

    With ``horizon == 1`` the output is the single next item, giving
    ``N - lag`` pairs.
    """
    seq = np.asarray(sequence)
    n = len(seq)
    if lag < 1 or horizon < 1:
        raise ValueError("lag and horizon must be positive")
    if n < lag + horizon:
        raise ValueError("lag too large for series")
    pairs = []
    for i in range(n - lag - horizon + 1):
        out = seq[i + lag] if horizon == 1 else seq[i + lag : i + lag + horizon]
        pairs.append(TrainingPair(seq[i : i + lag], out, i + 1))
    return pairs


def group_stateful(pairs: Sequence[TrainingPair], lag: int) -> list[list[TrainingPair]]:
    """Split pairs into ``lag`` chronological groups of windows ``lag`` apart."""
    groups: list[list[TrainingPair]] = [[] for _ in range(lag)]
    for pair in sorted(pairs, key=lambda p: p.origin_index):
        groups[(pair.origin_index - 1) % lag].append(pair)
    return [g for g in groups if g]


# ---------------------------------------------------------------------------
# models


@dataclass
class TrainedModel:
    """Trained parameters plus what is needed to feed and read them."""

    params: LstmStackParams
    lag: int
    stateful: bool
    n_symbols: int | None = None  # None for raw values

    @property
    def symbolic(self) -> bool:
        return self.n_symbols is not None

    def encode(self, seq) -> np.ndarray:
        seq = np.asarray(seq)
        if self.symbolic:
            return np.eye(self.n_symbols)[seq.astype(np.int64)]
        return seq.astype(np.float64).reshape(len(seq), -1)

    def decode(self, output):
        if self.symbolic:
            return int(np.argmax(output))
        return float(output[0]) if output.size == 1 else np.asarray(output, dtype=np.float64)


def _one_hot(idx: np.ndarray, k: int) -> np.ndarray:
    return np.eye(k)[idx]


def train(sequence, config: TrainConfig, n_symbols: int | None = None,
          horizon: int = 1, target_index: int | None = None) -> TrainResult:
    """Fit a stacked LSTM to one sequence with Adam, batch size one and early stopping.

    ``n_symbols`` switches to symbolic training on integer symbol indices.
    ``horizon > 1`` trains a direct many-to-many model with ``horizon``
    outputs, unless ``target_index`` picks one of those outputs (multi-model
    forecasting). Training stops once the mean epoch loss has failed to
    improve by more than ``min_delta`` for ``patience`` epochs; parameters are
    then restored to the best epoch.
    """
    seq = np.asarray(sequence)
    symbolic = n_symbols is not None
    if symbolic:
        seq = seq.astype(np.int64)
        if seq.min(initial=0) < 0 or seq.max(initial=0) >= n_symbols:
            raise ValueError("symbol index out of range")
        X_all = _one_hot(seq, n_symbols)
        if horizon != 1:
            raise ValueError("symbolic models forecast one symbol at a time")
    else:
        seq = as_series(seq)
        X_all = seq[:, None]
    lag = config.lag
    if len(seq) < lag + horizon:
        raise ValueError("insufficient data: sequence must be longer than lag + horizon - 1")

    pairs = build_windows(np.arange(len(seq)), lag, horizon)
    starts = np.array([p.origin_index - 1 for p in pairs])
    if horizon == 1:
        targets = seq[starts + lag]
    else:
        targets = np.stack([seq[s + lag : s + lag + horizon] for s in starts])
        if target_index is not None:
            targets = targets[:, target_index]
    out_dim = n_symbols if symbolic else (horizon if target_index is None else 1)
    params = init_params(X_all.shape[1], [config.cells] * config.layers, out_dim,
                         "softmax" if symbolic else "linear", seed=config.seed)
    rng = np.random.default_rng([config.seed, 1])
    opt = Adam(params.theta.size, lr=config.lr)
    grads = params.like()
    stateful = config.mode == "stateful"
    if stateful:
        groups = [list(range(g, len(pairs), lag)) for g in range(min(lag, len(pairs)))]
    else:
        groups = [[j] for j in range(len(pairs))]

    history: list[float] = []
    best_loss, best_theta, best_epoch, wait = np.inf, params.theta.copy(), 0, 0
    epoch = 0
    while epoch < config.max_epochs:
        epoch += 1
        total = 0.0
        for g in rng.permutation(len(groups)):
            states = params.zero_states()
            for j in groups[g]:
                s = starts[j]
                finals, out, cache = window_forward(
                    params, states, X_all[s : s + lag], config.dropout,
                    rng if config.dropout > 0 else None)
                y = targets[j]
                if symbolic:
                    total += loss_xent(out, int(y))
                    d_out = xent_grad(out, int(y))
                else:
                    total += loss_mse(out, y)
                    d_out = mse_grad(out, y)
                grads.theta.fill(0.0)
                backward_window(params, cache, d_out, grads)
                opt.step(params.theta, grads.theta)
                if stateful:
                    states = finals
        loss = total / len(pairs)
        history.append(loss)
        if loss < best_loss - config.min_delta:
            best_loss, best_epoch, wait = loss, epoch, 0
            best_theta[:] = params.theta
        else:
            wait += 1
            if wait >= config.patience:
                break
    params.theta[:] = best_theta
    return TrainResult(params, history, best_epoch, epoch)


def fit_model(sequence, config: TrainConfig, n_symbols: int | None = None,
              horizon: int = 1, target_index: int | None = None):
    result = train(sequence, config, n_symbols, horizon, target_index)
    model = TrainedModel(result.params, config.lag, config.mode == "stateful", n_symbols)
    return model, result


# ---------------------------------------------------------------------------
# forecasting


def _warm_states(model: TrainedModel, history: np.ndarray):
    """Stream the history through a stateful model, keeping lag-window alignment."""
    offset = (len(history) - model.lag) % model.lag
    states, out, _ = window_forward(model.params, model.params.zero_states(),
                                    model.encode(history[offset:]))
    return states, out


def iterated_forecast(model: TrainedModel, history, k: int) -> ForecastResult:
    """``k`` one-step forecasts, each fed back as the newest input."""
    if k < 1:
        raise ValueError("k must be at least 1")
    hist = np.asarray(history)
    if len(hist) < model.lag:
        raise ValueError("history shorter than lag")
    preds = []
    if model.stateful:
        states, out = _warm_states(model, hist)
        for step in range(k):
            nxt = model.decode(out)
            preds.append(nxt)
            if step + 1 < k:
                states, out, _ = window_forward(model.params, states, model.encode([nxt]))
    else:
        window = list(hist[-model.lag :])
        for _ in range(k):
            _, out, _ = window_forward(model.params, model.params.zero_states(),
                                       model.encode(window))
            nxt = model.decode(out)
            preds.append(nxt)
            window = window[1:] + [nxt]
    return ForecastResult(np.asarray(preds), "iterated")


def _last_output(model: TrainedModel, hist: np.ndarray):
    if model.stateful:
        return _warm_states(model, hist)[1]
    _, out, _ = window_forward(model.params, model.params.zero_states(),
                               model.encode(hist[-model.lag :]))
    return out


def direct_forecast(model: TrainedModel, history, k: int) -> ForecastResult:
    if model.symbolic:
        raise ValueError("direct forecasting is only defined for raw-value models")
    if model.params.output_dim != k:
        raise ValueError(f"model was trained for k={model.params.output_dim}, not {k}")
    out = _last_output(model, np.asarray(history, dtype=np.float64))
    return ForecastResult(np.asarray(out, dtype=np.float64).copy(), "direct")


def multi_forecast(models: Sequence[TrainedModel], history) -> ForecastResult:
    hist = np.asarray(history, dtype=np.float64)
    vals = [float(_last_output(m, hist)[0]) for m in models]
    return ForecastResult(np.asarray(vals), "multi")


def fit_direct(series, config: TrainConfig, k: int) -> TrainedModel:
    return fit_model(series, config, horizon=k)[0]


def fit_multi(series, config: TrainConfig, k: int) -> list[TrainedModel]:
    return [fit_model(series, config, horizon=k, target_index=j)[0] for j in range(k)]


# ---------------------------------------------------------------------------
# pipelines


def raw_pipeline(series, config: TrainConfig, k: int, mode: str = "iterated") -> ForecastResult:
    """z-normalise, train on values, forecast ``k`` steps, undo the normalisation."""
    t0 = time.perf_counter()
    z, norm = znormalize(series)
    t1 = time.perf_counter()
    if mode == "iterated":
        model, res = fit_model(z, config)
        t2 = time.perf_counter()
        fc = iterated_forecast(model, z, k)
    elif mode == "direct":
        model, res = fit_model(z, config, horizon=k)
        t2 = time.perf_counter()
        fc = direct_forecast(model, z, k)
    elif mode == "multi":
        fitted = [fit_model(z, config, horizon=k, target_index=j) for j in range(k)]
        res = fitted[0][1]
        t2 = time.perf_counter()
        fc = multi_forecast([m for m, _ in fitted], z)
    else:
        raise ValueError(f"unknown forecast mode {mode!r}")
    t3 = time.perf_counter()
    fc.values = denormalize(fc.values, norm)
    fc.timings = {"build": t1 - t0, "train": t2 - t1, "forecast": t3 - t2}
    fc.loss_history = res.loss_history
    fc.best_epoch = res.best_epoch
    return fc


def forecast_symbols(model: TrainedModel, rep: abba.SymbolicRepresentation, history: str,
                     k: int) -> str:
    """Forecast just enough symbols after ``history`` for their patches to cover ``k`` steps."""
    hist = np.array([rep.symbol_index(s) for s in history])
    steps = {s: len(p) - 1 for s, p in rep.patches.items()}
    n_max = -(-k // min(steps.values()))
    fc = iterated_forecast(model, hist, n_max)
    symbols = "".join(abba.ALPHABET[i] for i in fc.values.astype(int))
    covered = np.cumsum([steps[s] for s in symbols])
    return symbols[: int(np.searchsorted(covered, k)) + 1]


def abba_pipeline(series, abba_params: abba.AbbaParams, config: TrainConfig, k: int) -> ForecastResult:
    """ABBA-encode the z-normalised series, train on one-hot symbols, forecast, patch back.

    The final compressed piece is cut short by the end of the data rather than
    by the compression criterion, so it is left out of training and the
    forecast restarts from the last complete breakpoint. Forecast values that
    fall inside the observed range are discarded.
    """
    t0 = time.perf_counter()
    z, norm = znormalize(series)
    rep = abba.transform(z, abba_params.tol, abba_params.max_k, abba_params.scaling,
                         seed=abba_params.seed, max_len=abba_params.max_len)
    history = rep.string[:-1]
    if len(history) < config.lag + 1:
        raise ValueError("series too short after compression")
    resume = int(rep.chain.breakpoints[-2])
    overlap = z.size - 1 - resume
    t1 = time.perf_counter()
    seq = np.array([rep.symbol_index(s) for s in history])
    model, res = fit_model(seq, config, n_symbols=rep.k)
    t2 = time.perf_counter()
    symbols = forecast_symbols(model, rep, history, k + overlap)
    values = abba.stitch_patches(symbols, rep.patches, float(z[resume]))
    values = values[1 + overlap : 1 + overlap + k]
    t3 = time.perf_counter()
    return ForecastResult(
        denormalize(values, norm), "iterated", symbols=symbols,
        timings={"build": t1 - t0, "train": t2 - t1, "forecast": t3 - t2},
        loss_history=res.loss_history, best_epoch=res.best_epoch, representation=rep,
    )


def with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return replace(config, seed=seed)
