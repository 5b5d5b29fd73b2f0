"""ABBA symbolic representation with patched reconstruction.

Forward direction::

    series --compress--> PolygonalChain --digitize--> SymbolicRepresentation

Backward direction, polygonal::

    string --inverse_digitize--> chain (real lengths) --quantize--> --inverse_compress--> series

Backward direction, patched: every symbol is replaced by the point-wise mean
shape ("patch") of the raw segments assigned to its cluster, and the patches are
stitched end to end.
"""

from __future__ import annotations

import json
import string as _string
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from symforecast.kmeans import kmeans
from symforecast.series import as_series, resample_linear

ALPHABET = _string.ascii_lowercase
_EPS = np.finfo(float).eps


class Piece(NamedTuple):
    len: float
    inc: float


@dataclass(frozen=True)
class PolygonalChain:
    """Start value plus ``(len, inc)`` pieces; lengths may be real before quantisation."""

    start_value: float
    lengths: np.ndarray
    incs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=np.float64))
        object.__setattr__(self, "incs", np.asarray(self.incs, dtype=np.float64))
        if self.lengths.shape != self.incs.shape or self.lengths.ndim != 1:
            raise ValueError("lengths and incs must be 1-d arrays of equal size")

    @classmethod
    def from_pieces(cls, start_value: float, pieces) -> "PolygonalChain":
        pieces = list(pieces)
        return cls(start_value, [p[0] for p in pieces], [p[1] for p in pieces])

    @property
    def pieces(self) -> list[Piece]:
        return [Piece(float(a), float(b)) for a, b in zip(self.lengths, self.incs)]

    @property
    def breakpoints(self) -> np.ndarray:
        """0-based indices i_0 = 0 < i_1 < ... < i_m."""
        return np.concatenate(([0.0], np.cumsum(self.lengths)))

    @property
    def breakpoint_values(self) -> np.ndarray:
        return self.start_value + np.concatenate(([0.0], np.cumsum(self.incs)))

    def __len__(self) -> int:
        return self.lengths.size


@dataclass(frozen=True)
class ClusterModel:
    """Cluster index of every piece and unscaled ``(mean_len, mean_inc)`` centers.

    Cluster ``j`` is encoded by ``ALPHABET[j]``.
    """

    assignments: np.ndarray
    centers: np.ndarray
    scaling: float = 0.0

    @property
    def k(self) -> int:
        return self.centers.shape[0]


@dataclass
class SymbolicRepresentation:
    string: str
    start_value: float
    cluster_model: ClusterModel
    patches: dict[str, np.ndarray] | None = field(default=None)
    chain: PolygonalChain | None = field(default=None, repr=False)

    @property
    def alphabet(self) -> str:
        return ALPHABET[: self.cluster_model.k]

    @property
    def k(self) -> int:
        return self.cluster_model.k

    def __len__(self) -> int:
        return len(self.string)

    def symbol_index(self, symbol: str) -> int:
        idx = ALPHABET.find(symbol)
        if idx < 0 or idx >= self.k:
            raise KeyError(f"symbol not in alphabet: {symbol!r}")
        return idx

    def to_dict(self) -> dict:
        return {
            "string": self.string,
            "start_value": self.start_value,
            "scaling": self.cluster_model.scaling,
            "assignments": self.cluster_model.assignments.tolist(),
            "centers": self.cluster_model.centers.tolist(),
            "patches": None
            if self.patches is None
            else {s: p.tolist() for s, p in self.patches.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SymbolicRepresentation":
        model = ClusterModel(
            np.asarray(doc["assignments"], dtype=np.int64),
            np.asarray(doc["centers"], dtype=np.float64).reshape(-1, 2),
            float(doc.get("scaling", 0.0)),
        )
        patches = doc.get("patches")
        if patches is not None:
            patches = {s: np.asarray(p, dtype=np.float64) for s, p in patches.items()}
        return cls(doc["string"], float(doc["start_value"]), model, patches)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SymbolicRepresentation":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AbbaParams:
    tol: float = 0.05
    max_k: int = 10
    scaling: float = 0.0
    max_len: int | None = None
    seed: int = 0


def chord_error(values: np.ndarray) -> float:
    """Sum of squared deviations of ``values`` from the chord through its endpoints."""
    n = values.size - 1
    if n < 1:
        return 0.0
    line = values[0] + (values[-1] - values[0]) * (np.arange(n + 1) / n)
    err = values - line
    return float(err @ err)


def compress(series, tol: float, max_len: int | None = None) -> PolygonalChain:
    """Greedy left-to-right piecewise-linear compression.

    A piece spanning ``len`` steps is accepted while the squared deviation from
    its endpoint chord, summed over the piece, is at most ``(len - 1) * tol**2``.
    ``max_len`` optionally caps piece length.
    """
    t = as_series(series, min_length=2)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_len is not None and max_len < 1:
        raise ValueError("max_len must be at least 1")
    tol2 = tol * tol
    n = t.size
    lengths, incs = [], []
    start, end = 0, 1
    while end < n:
        steps = end - start
        ok = steps == 1 or (
            chord_error(t[start : end + 1]) <= tol2 * (steps - 1) + _EPS
            and (max_len is None or steps <= max_len)
        )
        if ok:
            end += 1
            continue
        lengths.append(end - 1 - start)
        incs.append(t[end - 1] - t[start])
        start = end - 1
    lengths.append(end - 1 - start)
    incs.append(t[end - 1] - t[start])
    return PolygonalChain(float(t[0]), lengths, incs)


def _inc_sse(incs: np.ndarray, labels: np.ndarray, k: int) -> float:
    sse = 0.0
    for j in range(k):
        v = incs[labels == j]
        if v.size:
            sse += float(np.sum((v - v.mean()) ** 2))
    return sse


def digitize(
    chain: PolygonalChain,
    tol: float,
    max_k: int,
    scaling: float = 0.0,
    seed: int = 0,
) -> SymbolicRepresentation:
    """Cluster pieces and map each cluster to a letter.

    The alphabet size is the smallest ``k <= max_k`` whose within-cluster sum of
    squared increment deviations is at most ``m * tol**2 / 4``. Letters are
    handed out by decreasing cluster size, ties broken by first appearance.
    """
    if max_k > len(ALPHABET):
        raise ValueError("alphabet exhausted: max_k must be at most 26")
    if max_k < 1:
        raise ValueError("max_k must be at least 1")
    m = len(chain)
    if m == 0:
        raise ValueError("cannot digitize an empty chain")
    data = np.column_stack([chain.lengths, chain.incs])
    std = data.std(axis=0)
    std[std == 0.0] = 1.0
    X = data / std * np.array([scaling, 1.0])

    bound = 0.25 * m * tol * tol
    labels = None
    for k in range(1, min(max_k, m) + 1):
        labels, _, _ = kmeans(X, k, seed=seed)
        if _inc_sse(chain.incs, labels, k) <= bound + _EPS:
            break

    # relabel: biggest cluster first, ties by first appearance
    present = list(dict.fromkeys(labels.tolist()))
    counts = {c: int(np.sum(labels == c)) for c in present}
    order = sorted(present, key=lambda c: (-counts[c], present.index(c)))
    remap = {old: new for new, old in enumerate(order)}
    assignments = np.array([remap[c] for c in labels.tolist()], dtype=np.int64)
    k_used = len(order)
    centers = np.array([data[assignments == j].mean(axis=0) for j in range(k_used)])
    model = ClusterModel(assignments, centers, float(scaling))
    symbols = "".join(ALPHABET[j] for j in assignments)
    return SymbolicRepresentation(symbols, chain.start_value, model)


def inverse_digitize(rep: SymbolicRepresentation, symbols: str | None = None,
                     start_value: float | None = None) -> PolygonalChain:
    symbols = rep.string if symbols is None else symbols
    start = rep.start_value if start_value is None else start_value
    idx = [rep.symbol_index(s) for s in symbols]
    centers = rep.cluster_model.centers
    if not idx:
        return PolygonalChain(start, [], [])
    return PolygonalChain(start, centers[idx, 0], centers[idx, 1])


def quantize(chain: PolygonalChain) -> PolygonalChain:
    """Realign accumulated lengths to the integer grid, carrying rounding error forward."""
    cum = np.cumsum(chain.lengths)
    out = np.empty(len(chain))
    prev = 0
    for j, c in enumerate(cum):
        # round half up; keep every piece at least one step long
        target = max(int(np.floor(c + 0.5)), prev + 1)
        out[j] = target - prev
        prev = target
    return PolygonalChain(chain.start_value, out, chain.incs.copy())


def inverse_compress(chain: PolygonalChain) -> np.ndarray:
    """Stitch the linear pieces of an integer-length chain into a series."""
    lengths = chain.lengths
    if np.any(lengths != np.round(lengths)) or np.any(lengths < 1):
        raise ValueError("inverse_compress needs integer lengths >= 1")
    out = [np.array([chain.start_value])]
    level = chain.start_value
    for n, inc in zip(lengths.astype(np.int64), chain.incs):
        out.append(level + inc * np.arange(1, n + 1) / n)
        level = level + inc
    return np.concatenate(out)


def build_patches(chain: PolygonalChain, source, model: ClusterModel) -> dict[str, np.ndarray]:
    """Point-wise mean shape of each cluster's raw segments.

    Members are shifted to start at zero and linearly resampled to
    ``round(mean length) + 1`` samples before averaging.
    """
    t = as_series(source)
    bps = chain.breakpoints.astype(np.int64)
    if bps[-1] != t.size - 1:
        raise ValueError("chain does not span the source series")
    patches = {}
    for j in range(model.k):
        members = np.flatnonzero(model.assignments == j)
        if members.size == 0:
            continue
        mean_len = float(np.mean(chain.lengths[members]))
        steps = max(int(np.floor(mean_len + 0.5)), 1)
        acc = np.zeros(steps + 1)
        for p in members:
            seg = t[bps[p] : bps[p + 1] + 1]
            acc += resample_linear(seg - seg[0], steps + 1)
        patches[ALPHABET[j]] = acc / members.size
    return patches


def stitch_patches(symbols: str, patches: dict[str, np.ndarray], start_value: float) -> np.ndarray:
    out = [np.array([start_value])]
    level = start_value
    for s in symbols:
        try:
            patch = patches[s]
        except KeyError:
            raise KeyError(f"no patch for symbol {s!r}") from None
        shifted = patch - patch[0] + level
        out.append(shifted[1:])
        level = shifted[-1]
    return np.concatenate(out)


def patched_reconstruct(rep: SymbolicRepresentation, symbols: str | None = None,
                        start_value: float | None = None) -> np.ndarray:
    if rep.patches is None:
        raise ValueError("representation has no patches; build them first")
    symbols = rep.string if symbols is None else symbols
    start = rep.start_value if start_value is None else start_value
    return stitch_patches(symbols, rep.patches, start)


def transform(series, tol: float = 0.05, max_k: int = 10, scaling: float = 0.0,
              seed: int = 0, max_len: int | None = None) -> SymbolicRepresentation:
    t = as_series(series, min_length=2)
    chain = compress(t, tol, max_len=max_len)
    rep = digitize(chain, tol, max_k, scaling=scaling, seed=seed)
    rep.patches = build_patches(chain, t, rep.cluster_model)
    rep.chain = chain
    return rep


def inverse_transform(rep: SymbolicRepresentation, mode: str = "patched") -> np.ndarray:
    if mode == "patched":
        return patched_reconstruct(rep)
    if mode == "polygonal":
        return inverse_compress(quantize(inverse_digitize(rep)))
    raise ValueError(f"unknown reconstruction mode {mode!r}")
