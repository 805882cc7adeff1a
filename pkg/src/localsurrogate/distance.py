"""Mixed-type distance between rows.

Numeric features contribute their L1 distance (in standardized units),
binary features the Hamming distance, and categorical features a
co-occurrence based value distance: two labels of attribute A_i are close
when they induce similar conditional distributions over the other
(categorical and binary) attributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DataError, DataPoint, Dataset


@dataclass(frozen=True)
class CoOccurrenceModel:
    """Conditional label distributions and the derived value distances.

    ``conditionals[i]`` is a list with one ``(K_i, L_j)`` matrix per context
    attribute j; row x holds P(A_j = v | A_i = x). ``value_distance[i]`` is
    the ``(K_i, K_i)`` matrix of averaged distances used by the metric.
    """

    categories: tuple[tuple[str, ...], ...]
    conditionals: tuple[tuple[np.ndarray, ...], ...]
    value_distance: tuple[np.ndarray, ...]

    def code(self, attr: int, label: str) -> int:
        try:
            return self.categories[attr].index(label)
        except ValueError:
            raise DataError(f"unseen label {label!r} for categorical attribute {attr}") from None


def omega_mask(p_x: np.ndarray, p_y: np.ndarray) -> np.ndarray:
    """Values at least as likely under x as under y.

    This set maximizes P(omega | x) + P(not omega | y) over all subsets.
    """
    return p_x >= p_y


def pairwise_delta(p_x: np.ndarray, p_y: np.ndarray) -> float:
    """delta^{ij}(x, y) for two conditional distributions over A_j."""
    omega = omega_mask(p_x, p_y)
    return float(p_x[omega].sum() + p_y[~omega].sum() - 1.0)


def _context_columns(ds: Dataset) -> list[tuple[np.ndarray, int]]:
    ctx = [(ds.codes[:, j], len(cats)) for j, cats in enumerate(ds.categories)]
    ctx += [(ds.binary[:, j].astype(np.int64), 2) for j in range(ds.binary.shape[1])]
    return ctx


def build_cooccurrence(ds: Dataset) -> CoOccurrenceModel:
    """Estimate the conditional tables from raw frequencies (no smoothing)."""
    ctx = _context_columns(ds)
    conds, dists = [], []
    for i, cats in enumerate(ds.categories):
        k = len(cats)
        codes_i = ds.codes[:, i]
        counts_i = np.bincount(codes_i, minlength=k).astype(np.float64)
        tables = []
        for j, (codes_j, n_j) in enumerate(ctx):
            if j == i:
                continue
            joint = np.zeros((k, n_j))
            np.add.at(joint, (codes_i, codes_j), 1.0)
            tables.append(joint / counts_i[:, None])
        d = np.zeros((k, k))
        if tables:
            for a in range(k):
                for b in range(a + 1, k):
                    v = sum(pairwise_delta(t[a], t[b]) for t in tables) / len(tables)
                    d[a, b] = d[b, a] = min(max(v, 0.0), 1.0)
        else:
            # no context attribute at all: plain mismatch distance
            d = 1.0 - np.eye(k)
        d.setflags(write=False)
        conds.append(tuple(tables))
        dists.append(d)
    return CoOccurrenceModel(ds.categories, tuple(conds), tuple(dists))


def cooccurrence_model(ds: Dataset) -> CoOccurrenceModel:
    """Cached :func:`build_cooccurrence` for ``ds``."""
    model = ds._cache.get("cooccurrence")
    if model is None:
        model = build_cooccurrence(ds)
        ds._cache["cooccurrence"] = model
    return model


def numeric_distance(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def binary_distance(a: int, b: int) -> int:
    """Hamming distance of two bits: 0 when equal, 1 otherwise."""
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError(f"binary inputs expected, got {a!r}, {b!r}")
    return int(a != b)


def categorical_value_distance(model: CoOccurrenceModel, attr: int, x: str, y: str) -> float:
    return float(model.value_distance[attr][model.code(attr, x), model.code(attr, y)])


@dataclass(frozen=True)
class DistanceVector:
    """Distances from one query to every row, sorted ascending (ties by row)."""

    order: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.order)

    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.order, self.distances[self.order])]

    def nearest(self, k: int) -> np.ndarray:
        return self.order[:k]


def _point_codes(ds: Dataset, model: CoOccurrenceModel, x: DataPoint) -> np.ndarray:
    return np.array([model.code(j, v) for j, v in enumerate(x.categorical)], dtype=np.int64)


def _check(ds: Dataset, x: DataPoint) -> None:
    s = ds.schema
    if (len(x.numeric), len(x.categorical), len(x.binary)) != (s.m_n, s.m_c, s.m_b):
        raise DataError("point does not conform to the dataset schema")


def _distances_to_rows(ds: Dataset, model: CoOccurrenceModel, x: DataPoint,
                       rows: np.ndarray | slice) -> np.ndarray:
    _check(ds, x)
    num = ds.numeric[rows]
    d = np.abs(num - np.asarray(x.numeric, dtype=np.float64)).sum(axis=1)
    codes = ds.codes[rows]
    xc = _point_codes(ds, model, x)
    for j in range(codes.shape[1]):
        d = d + model.value_distance[j][codes[:, j], xc[j]]
    if ds.binary.shape[1]:
        bits = np.asarray(x.binary, dtype=np.int64)
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("binary features must be 0 or 1")
        d = d + (ds.binary[rows] != bits).sum(axis=1)
    return d


def generalized_distance(ds: Dataset, model: CoOccurrenceModel, x1: DataPoint, x2: DataPoint) -> float:
    _check(ds, x1)
    _check(ds, x2)
    d = numeric_distance(x1.numeric, x2.numeric)
    for j, (a, b) in enumerate(zip(x1.categorical, x2.categorical)):
        d += categorical_value_distance(model, j, a, b)
    # bits are summed first so the total matches the row-vectorized path exactly
    d += sum(binary_distance(a, b) for a, b in zip(x1.binary, x2.binary))
    return d


def compute_distances(ds: Dataset, model: CoOccurrenceModel, x: DataPoint) -> DistanceVector:
    """Linear scan over every row of ``ds``."""
    d = _distances_to_rows(ds, model, x, slice(None))
    order = np.argsort(d, kind="stable")
    d.setflags(write=False)
    order.setflags(write=False)
    return DistanceVector(order, d)
