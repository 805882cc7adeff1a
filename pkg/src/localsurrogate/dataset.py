"""Tabular data loading, standardization and one-hot encoding.

A :class:`Dataset` is the only training substrate used by the explainer:
numeric columns are standardized once (population std) and every other
module works on the standardized values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"
KINDS = (NUMERIC, CATEGORICAL, BINARY)


class DataError(ValueError):
    """Raised for malformed input data or schemas."""


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[tuple[str, str], ...]
    target: str

    def __post_init__(self):
        object.__setattr__(self, "features", tuple((str(n), str(k)) for n, k in self.features))
        names = [n for n, _ in self.features]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate feature names in schema: {names}")
        if self.target in names:
            raise DataError(f"target {self.target!r} is also listed as a feature")
        for name, kind in self.features:
            if kind not in KINDS:
                raise DataError(f"feature {name!r}: unknown kind {kind!r}")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.features]

    def names_of(self, kind: str) -> list[str]:
        return [n for n, k in self.features if k == kind]

    def kind_of(self, name: str) -> str:
        for n, k in self.features:
            if n == name:
                return k
        raise KeyError(name)

    @property
    def m_n(self) -> int:
        return len(self.names_of(NUMERIC))

    @property
    def m_c(self) -> int:
        return len(self.names_of(CATEGORICAL))

    @property
    def m_b(self) -> int:
        return len(self.names_of(BINARY))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "features": [{"name": n, "kind": k} for n, k in self.features],
        }


def load_schema(path: str | Path) -> FeatureSchema:
    """Read a YAML (or JSON) schema file with ``target`` and ``features``."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"cannot parse schema file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "target" not in doc or "features" not in doc:
        raise DataError(f"schema file {path} needs 'target' and 'features' keys")
    feats = []
    for entry in doc["features"]:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise DataError(f"schema feature entries need 'name' and 'kind': {entry!r}")
        feats.append((entry["name"], entry["kind"]))
    return FeatureSchema(tuple(feats), str(doc["target"]))


@dataclass(frozen=True)
class DataPoint:
    """One row; numeric values are in standardized units."""

    numeric: tuple[float, ...]
    categorical: tuple[str, ...]
    binary: tuple[int, ...]


@dataclass(frozen=True)
class EncodedMatrix:
    columns: tuple[str, ...]
    values: np.ndarray
    origin: tuple[str, ...]

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != len(self.columns):
            raise DataError("encoded values do not match column names")
        if len(self.origin) != len(self.columns):
            raise DataError("origin map must cover every encoded column")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def rows(self, idx) -> "EncodedMatrix":
        return EncodedMatrix(self.columns, self.values[idx], self.origin)

    def select(self, keep: Sequence[int]) -> "EncodedMatrix":
        keep = list(keep)
        return EncodedMatrix(
            tuple(self.columns[j] for j in keep),
            self.values[:, keep],
            tuple(self.origin[j] for j in keep),
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable standardized table.

    ``numeric`` holds standardized values (rows x m_n), ``categorical`` the
    raw labels (rows x m_c, dtype object), ``binary`` 0/1 ints (rows x m_b).
    ``categories`` lists each categorical feature's labels in order of first
    appearance; that order fixes both the integer codes and the one-hot columns.
    """

    schema: FeatureSchema
    numeric: np.ndarray
    categorical: np.ndarray
    binary: np.ndarray
    targets: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    categories: tuple[tuple[str, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.targets)
        if n < 1:
            raise DataError("dataset is empty")
        s = self.schema
        for arr, m, what in ((self.numeric, s.m_n, "numeric"),
                             (self.categorical, s.m_c, "categorical"),
                             (self.binary, s.m_b, "binary")):
            if arr.shape != (n, m):
                raise DataError(f"{what} block has shape {arr.shape}, expected {(n, m)}")
        for name in ("numeric", "categorical", "binary", "targets", "means", "stds"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        codes = np.empty((n, s.m_c), dtype=np.int64)
        for j, cats in enumerate(self.categories):
            lookup = {c: i for i, c in enumerate(cats)}
            codes[:, j] = [lookup[v] for v in self.categorical[:, j]]
        object.__setattr__(self, "codes", _frozen(codes))

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def constant_columns(self) -> list[str]:
        """Numeric features with zero variance (standardized to all zeros)."""
        return [n for n, sd in zip(self.schema.names_of(NUMERIC), self.stds) if sd == 0]

    def point(self, i: int) -> DataPoint:
        if not 0 <= i < len(self):
            raise IndexError(f"row index {i} out of range for {len(self)} rows")
        return DataPoint(
            tuple(float(v) for v in self.numeric[i]),
            tuple(str(v) for v in self.categorical[i]),
            tuple(int(v) for v in self.binary[i]),
        )

    def standardize(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        safe = np.where(self.stds > 0, self.stds, 1.0)
        return np.where(self.stds > 0, (raw - self.means) / safe, 0.0)

    def unstandardize(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.stds + self.means

    def make_point(self, values: Mapping[str, object]) -> DataPoint:
        """Build a point from raw (unstandardized) feature values."""
        s = self.schema
        missing = [n for n in s.names if n not in values]
        if missing:
            raise DataError(f"point is missing features: {missing}")
        extra = [k for k in values if k not in s.names]
        if extra:
            raise DataError(f"point has unknown features: {extra}")
        raw = []
        for name in s.names_of(NUMERIC):
            raw.append(_parse_float(values[name], name))
        num = self.standardize(np.array(raw, dtype=np.float64)) if raw else np.zeros(0)
        cat = []
        for j, name in enumerate(s.names_of(CATEGORICAL)):
            label = str(values[name])
            if label not in self.categories[j]:
                raise DataError(f"feature {name!r}: unseen category {label!r}")
            cat.append(label)
        binv = [_parse_binary(values[name], name) for name in s.names_of(BINARY)]
        return DataPoint(tuple(float(v) for v in num), tuple(cat), tuple(binv))

    def raw_value(self, p: DataPoint, feature: str):
        """Value of ``feature`` in ``p`` in original units."""
        kind = self.schema.kind_of(feature)
        pos = self.schema.names_of(kind).index(feature)
        if kind == NUMERIC:
            return float(self.unstandardize(np.array(p.numeric))[pos]) if self.stds[pos] > 0 \
                else float(self.means[pos])
        if kind == CATEGORICAL:
            return p.categorical[pos]
        return p.binary[pos]

    def check_point(self, p: DataPoint) -> None:
        s = self.schema
        if (len(p.numeric), len(p.categorical), len(p.binary)) != (s.m_n, s.m_c, s.m_b):
            raise DataError("point does not conform to the dataset schema")
        for j, label in enumerate(p.categorical):
            if label not in self.categories[j]:
                raise DataError(f"feature {s.names_of(CATEGORICAL)[j]!r}: unseen category {label!r}")
        if any(b not in (0, 1) for b in p.binary):
            raise DataError("binary features must be 0 or 1")

    def with_targets(self, targets: Sequence[float]) -> "Dataset":
        """Same rows, different target column (features and caches shared)."""
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != self.targets.shape:
            raise DataError("replacement targets must match the row count")
        ds = Dataset(self.schema, self.numeric, self.categorical, self.binary, t,
                     self.means, self.stds, self.categories)
        for key in ("cooccurrence", "encoded"):
            if key in self._cache:
                ds._cache[key] = self._cache[key]
        return ds


def _parse_float(value, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"column {name!r}: cannot parse {value!r} as a number") from None
    if not math.isfinite(out):
        raise DataError(f"column {name!r}: non-finite value {value!r}")
    return out


def _parse_binary(value, name: str) -> int:
    v = _parse_float(value, name)
    if v not in (0.0, 1.0):
        raise DataError(f"binary column {name!r}: value {value!r} is not 0 or 1")
    return int(v)


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]], target: str) -> FeatureSchema:
    feats = []
    for j, name in enumerate(header):
        if name == target:
            continue
        col = [r[j] for r in rows]
        distinct = set(col)
        if all(_is_number(v) for v in col):
            values = {float(v) for v in distinct}
            kind = BINARY if values == {0.0, 1.0} else NUMERIC
        else:
            kind = CATEGORICAL
        feats.append((name, kind))
    return FeatureSchema(tuple(feats), target)


def from_columns(schema: FeatureSchema, columns: Mapping[str, Sequence]) -> Dataset:
    """Build a standardized Dataset from raw column values keyed by name."""
    if schema.target not in columns:
        raise DataError(f"unknown target column {schema.target!r}")
    for name in schema.names:
        if name not in columns:
            raise DataError(f"schema feature {name!r} not found in data")
    y = np.array([_parse_float(v, schema.target) for v in columns[schema.target]], dtype=np.float64)
    n = len(y)
    if n == 0:
        raise DataError("dataset is empty")

    num_names = schema.names_of(NUMERIC)
    raw = np.empty((n, len(num_names)))
    for j, name in enumerate(num_names):
        raw[:, j] = [_parse_float(v, name) for v in columns[name]]
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)  # population std (ddof=0)
    safe = np.where(stds > 0, stds, 1.0)
    numeric = np.where(stds > 0, (raw - means) / safe, 0.0)

    cat_names = schema.names_of(CATEGORICAL)
    cat = np.empty((n, len(cat_names)), dtype=object)
    categories = []
    for j, name in enumerate(cat_names):
        labels = [str(v) for v in columns[name]]
        if any(v == "" for v in labels):
            raise DataError(f"column {name!r}: missing value")
        cat[:, j] = labels
        categories.append(tuple(dict.fromkeys(labels)))

    bin_names = schema.names_of(BINARY)
    binary = np.empty((n, len(bin_names)), dtype=np.int64)
    for j, name in enumerate(bin_names):
        binary[:, j] = [_parse_binary(v, name) for v in columns[name]]

    return Dataset(schema, numeric, cat, binary, y, means, stds, tuple(categories))


def load_csv(path: str | Path, schema: FeatureSchema | None = None, target: str | None = None) -> Dataset:
    """Load an RFC-4180 CSV file with a header row.

    Without a schema the column kinds are inferred and ``target`` must name the
    target column. A ``target`` given together with a schema overrides the
    schema's target.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        except csv.Error as exc:
            raise DataError(f"{path}: {exc}") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        try:
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(
                        f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
                if any(v.strip() == "" for v in row):
                    raise DataError(f"{path}: line {lineno} has a missing value")
                rows.append([v.strip() for v in row])
        except csv.Error as exc:
            raise DataError(f"{path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: dataset is empty")

    if schema is None:
        if target is None:
            raise DataError("a target column is required when no schema is given")
        if target not in header:
            raise DataError(f"unknown target column {target!r}")
        schema = infer_schema(header, rows, target)
    elif target is not None and target != schema.target:
        feats = tuple((n, k) for n, k in schema.features if n != target)
        schema = FeatureSchema(feats, target)
    if schema.target not in header:
        raise DataError(f"unknown target column {schema.target!r}")

    columns = {name: [r[j] for r in rows] for j, name in enumerate(header)}
    return from_columns(schema, columns)


def encoded_columns(ds: Dataset) -> tuple[tuple[str, ...], tuple[str, ...]]:
    names, origin = [], []
    cat_pos = {n: j for j, n in enumerate(ds.schema.names_of(CATEGORICAL))}
    for name, kind in ds.schema.features:
        if kind == CATEGORICAL:
            for c in ds.categories[cat_pos[name]]:
                names.append(f"{name}={c}")
                origin.append(name)
        else:
            names.append(name)
            origin.append(name)
    return tuple(names), tuple(origin)


def encode(ds: Dataset) -> EncodedMatrix:
    """One column per numeric/binary feature and per category, in schema order."""
    cached = ds._cache.get("encoded")
    if cached is not None:
        return cached
    names, origin = encoded_columns(ds)
    out = np.empty((len(ds), len(names)))
    s = ds.schema
    num_pos = {n: j for j, n in enumerate(s.names_of(NUMERIC))}
    cat_pos = {n: j for j, n in enumerate(s.names_of(CATEGORICAL))}
    bin_pos = {n: j for j, n in enumerate(s.names_of(BINARY))}
    col = 0
    for name, kind in s.features:
        if kind == NUMERIC:
            out[:, col] = ds.numeric[:, num_pos[name]]
            col += 1
        elif kind == BINARY:
            out[:, col] = ds.binary[:, bin_pos[name]]
            col += 1
        else:
            j = cat_pos[name]
            k = len(ds.categories[j])
            out[:, col:col + k] = ds.codes[:, j][:, None] == np.arange(k)[None, :]
            col += k
    m = EncodedMatrix(names, out, origin)
    ds._cache["encoded"] = m
    return m


def encode_point(ds: Dataset, p: DataPoint) -> np.ndarray:
    """Encode a single point with the dataset's column layout."""
    s = ds.schema
    num_pos = {n: j for j, n in enumerate(s.names_of(NUMERIC))}
    cat_pos = {n: j for j, n in enumerate(s.names_of(CATEGORICAL))}
    bin_pos = {n: j for j, n in enumerate(s.names_of(BINARY))}
    out = []
    for name, kind in s.features:
        if kind == NUMERIC:
            out.append(p.numeric[num_pos[name]])
        elif kind == BINARY:
            out.append(float(p.binary[bin_pos[name]]))
        else:
            j = cat_pos[name]
            out.extend(1.0 if c == p.categorical[j] else 0.0 for c in ds.categories[j])
    return np.array(out, dtype=np.float64)


def set_feature(ds: Dataset, p: DataPoint, feature: str, value) -> DataPoint:
    """Copy of ``p`` with one source feature replaced (value in internal units)."""
    kind = ds.schema.kind_of(feature)
    pos = ds.schema.names_of(kind).index(feature)
    parts = {NUMERIC: list(p.numeric), CATEGORICAL: list(p.categorical), BINARY: list(p.binary)}
    parts[kind][pos] = value
    return DataPoint(tuple(parts[NUMERIC]), tuple(parts[CATEGORICAL]), tuple(parts[BINARY]))


def feature_value(ds: Dataset, p: DataPoint, feature: str):
    """Value of ``feature`` in ``p`` in internal units (standardized numeric)."""
    kind = ds.schema.kind_of(feature)
    pos = ds.schema.names_of(kind).index(feature)
    return {NUMERIC: p.numeric, CATEGORICAL: p.categorical, BINARY: p.binary}[kind][pos]
