"""Forecast accuracy measures."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from symforecast.series import difference


def _pair(a, b, same_length=True):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if same_length and a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def euclidean(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def dtw(a, b) -> float:
    """Unconstrained dynamic time warping, squared local cost, square root of the total."""
    a, b = _pair(a, b, same_length=False)
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw needs nonempty sequences")
    cost = (a[:, None] - b[None, :]) ** 2
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    # sweep row by row; the within-row dependency is a running minimum
    for i in range(1, n + 1):
        diag_up = np.minimum(acc[i - 1, :-1], acc[i - 1, 1:]) + cost[i - 1]
        row = acc[i]
        for j in range(1, m + 1):
            left = row[j - 1] + cost[i - 1, j - 1]
            row[j] = diag_up[j - 1] if diag_up[j - 1] < left else left
    return float(np.sqrt(acc[n, m]))


def smape(forecast, actual) -> float:
    """Symmetric MAPE on the 0-200 scale; terms with a zero denominator count as zero."""
    f, a = _pair(forecast, actual)
    if f.size == 0:
        raise ValueError("smape needs at least one value")
    den = np.abs(a) + np.abs(f)
    num = np.abs(f - a)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(200.0 * terms.sum() / f.size)


@dataclass(frozen=True)
class SimilarityReport:
    euclidean: float
    dtw: float
    euclidean_diff: float
    dtw_diff: float
    smape: float

    def as_dict(self) -> dict:
        return asdict(self)


def report(forecast, actual) -> SimilarityReport:
    f, a = _pair(forecast, actual)
    if f.size < 2:
        raise ValueError("report needs at least two values")
    df, da = difference(f), difference(a)
    return SimilarityReport(
        euclidean=euclidean(f, a),
        dtw=dtw(f, a),
        euclidean_diff=euclidean(df, da),
        dtw_diff=dtw(df, da),
        smape=smape(f, a),
    )
