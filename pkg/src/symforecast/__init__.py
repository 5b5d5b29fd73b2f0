"""Symbolic (ABBA) and raw-value LSTM time-series forecasting."""

from symforecast.series import (
    NormalizationParams,
    as_series,
    denormalize,
    difference,
    resample_linear,
    undifference,
    znormalize,
)

__all__ = [
    "NormalizationParams",
    "as_series",
    "denormalize",
    "difference",
    "resample_linear",
    "undifference",
    "znormalize",
]

__version__ = "0.1.0"
