"""Time-series primitives: validation, z-normalisation, differencing, resampling.

A series is a one-dimensional float64 numpy array. Functions never mutate their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NormalizationParams:
    mean: float
    std: float


def as_series(values, min_length: int = 1) -> np.ndarray:
    """Return ``values`` as a finite 1-d float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d series, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"series needs at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains non-finite samples")
    return arr


def znormalize(values) -> tuple[np.ndarray, NormalizationParams]:
    """Shift to zero mean and scale to unit population standard deviation.

    A constant series maps to zeros and records ``std = 1`` so that
    :func:`denormalize` stays an exact inverse.
    """
    x = as_series(values)
    mean = float(np.mean(x))
    std = float(np.std(x))
    # rounding leaves a tiny nonzero std on constant input
    if std <= 8 * np.finfo(float).eps * float(np.max(np.abs(x))) or not np.isfinite(std):
        std = 1.0
        return np.zeros_like(x), NormalizationParams(mean, std)
    return (x - mean) / std, NormalizationParams(mean, std)


def denormalize(values, params: NormalizationParams) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * params.std + params.mean


def difference(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series too short to difference")
    return np.diff(x)


def undifference(diffs, first: float) -> np.ndarray:
    """Inverse of :func:`difference` given the first sample."""
    d = np.asarray(diffs, dtype=np.float64)
    return np.concatenate(([first], first + np.cumsum(d)))


def resample_linear(segment, target_len: int) -> np.ndarray:
    """Linearly resample ``segment`` onto ``target_len`` uniformly spaced index positions.

    Endpoints are reproduced exactly.
    """
    seg = np.asarray(segment, dtype=np.float64)
    if seg.ndim != 1 or seg.size < 2:
        raise ValueError("segment needs at least 2 samples")
    if target_len < 2:
        raise ValueError("target_len must be at least 2")
    if target_len == seg.size:
        return seg.copy()
    grid = np.linspace(0.0, seg.size - 1, target_len)
    out = np.interp(grid, np.arange(seg.size), seg)
    out[0], out[-1] = seg[0], seg[-1]
    return out
