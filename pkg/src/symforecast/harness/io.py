"""Readers for UCR tab-separated archives and single-column CSV files."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def _parse_float(token: str, path, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: cannot parse {token!r} as a number") from None


def load_ucr(path) -> list[tuple[str, np.ndarray]]:
    """Rows of ``label<TAB>x1<TAB>x2...``; trailing NaN padding is dropped."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t") if "\t" in line else line.split(",")
            if len(fields) < 2:
                raise ValueError(f"{path}:{lineno}: expected a label followed by samples")
            label = fields[0].strip()
            values = [_parse_float(tok, path, lineno) for tok in fields[1:]]
            while values and math.isnan(values[-1]):
                values.pop()
            if not values or any(not math.isfinite(v) for v in values):
                raise ValueError(f"{path}:{lineno}: row has no usable samples")
            if label.replace(".", "", 1).lstrip("-").isdigit():
                label = str(int(float(label)))
            rows.append((label, np.asarray(values)))
    if not rows:
        raise ValueError(f"{path}: no rows")
    return rows


def load_csv(path) -> np.ndarray:
    """First column of a CSV file, skipping a non-numeric header line."""
    path = Path(path)
    values = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            token = row[0].strip()
            if lineno == 1 and not values:
                try:
                    float(token)
                except ValueError:
                    continue
            values.append(_parse_float(token, path, lineno))
    if not values:
        raise ValueError(f"{path}: no values")
    out = np.asarray(values)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path}: non-finite values")
    return out


def first_series_per_class(directory) -> list[tuple[str, np.ndarray]]:
    """One series per dataset folder: the first row of ``<name>_TRAIN.tsv``."""
    directory = Path(directory)
    found = sorted(directory.glob("*/*_TRAIN.tsv")) or sorted(directory.glob("*_TRAIN.tsv"))
    if not found:
        raise FileNotFoundError(f"no *_TRAIN.tsv files under {directory}")
    return [(p.stem.removesuffix("_TRAIN"), load_ucr(p)[0][1]) for p in found]
