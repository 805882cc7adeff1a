"""Seeded synthetic generators with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import BINARY, CATEGORICAL, NUMERIC, Dataset, FeatureSchema, from_columns


@dataclass(frozen=True)
class Synthetic:
    dataset: Dataset
    true_coef: dict[str, float]  # in standardized units of the encoded columns
    noise_std: float
    regime: np.ndarray | None = None


def _numeric_schema(p: int, target: str = "y") -> FeatureSchema:
    return FeatureSchema(tuple((f"x{j + 1}", NUMERIC) for j in range(p)), target)


def _build(X: np.ndarray, y: np.ndarray, schema: FeatureSchema) -> Dataset:
    cols = {name: X[:, j] for j, name in enumerate(schema.names)}
    cols[schema.target] = y
    return from_columns(schema, cols)


def sparse_linear(n: int = 1000, p: int = 10, active: int = 3, noise_ratio: float = 0.05,
                  seed: int = 0) -> Synthetic:
    """y = X b + e with ``active`` nonzero b and noise std = noise_ratio * std(Xb).

    Features are drawn standard normal, so standardized and raw units nearly
    coincide; the returned coefficients are rescaled to the standardized units.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    b = np.zeros(p)
    b[:active] = rng.choice([-1.0, 1.0], active) * rng.uniform(1.0, 3.0, active)
    signal = X @ b
    noise_std = noise_ratio * float(signal.std())
    y = 10.0 + signal + noise_std * rng.standard_normal(n)
    schema = _numeric_schema(p)
    ds = _build(X, y, schema)
    true = {name: float(b[j] * ds.stds[j]) for j, name in enumerate(schema.names) if b[j] != 0}
    return Synthetic(ds, true, noise_std)


def exact_linear(n: int = 200, coef=(3.0, -1.0), intercept: float = 0.0, seed: int = 0) -> Synthetic:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, len(coef)))
    y = intercept + X @ np.asarray(coef)
    schema = FeatureSchema(tuple((chr(ord("a") + j), NUMERIC) for j in range(len(coef))), "y")
    ds = _build(X, y, schema)
    true = {name: float(coef[j] * ds.stds[j]) for j, name in enumerate(schema.names)}
    return Synthetic(ds, true, 0.0)


def two_regime(n: int = 1000, noise_std: float = 0.5, gap: float = 4.0, seed: int = 0) -> Synthetic:
    """Two linear regimes tagged by an observed binary ``segment`` attribute.

    x1 is bimodal (centers +-gap) and follows the segment; x2 and x3 are
    standard normal. Segment 1 has y = 5 + 2 x1 + x2, segment 0 has
    y = -5 - x1 + 3 x3, so slopes and support differ across regimes.
    """
    rng = np.random.default_rng(seed)
    regime = np.arange(n) % 2
    rng.shuffle(regime)
    x1 = np.where(regime == 1, gap, -gap) + rng.standard_normal(n)
    Z = rng.standard_normal((n, 2))
    y = np.where(regime == 1, 5.0 + 2.0 * x1 + Z[:, 0], -5.0 - x1 + 3.0 * Z[:, 1])
    y = y + noise_std * rng.standard_normal(n)
    schema = FeatureSchema((("x1", NUMERIC), ("x2", NUMERIC), ("x3", NUMERIC),
                            ("segment", BINARY)), "y")
    ds = from_columns(schema, {"x1": x1, "x2": Z[:, 0], "x3": Z[:, 1],
                               "segment": regime, "y": y})
    return Synthetic(ds, {}, noise_std, regime)


def mixed_sample(n: int = 300, seed: int = 7) -> tuple[FeatureSchema, dict[str, list]]:
    """Small mixed-type table: raw columns for the bundled sample CSV."""
    rng = np.random.default_rng(seed)
    seconds = np.round(rng.gamma(4.0, 250.0, n), 1)
    age = rng.integers(18, 70, n)
    sms = rng.poisson(30, n)
    plan = rng.choice(["basic", "plus", "premium"], n, p=[0.5, 0.3, 0.2])
    region = np.where(plan == "premium", rng.choice(["north", "south"], n, p=[0.8, 0.2]),
                      rng.choice(["north", "south", "east"], n))
    complaint = (rng.random(n) < np.where(plan == "basic", 0.3, 0.1)).astype(int)
    uplift = {"basic": 0.0, "plus": 40.0, "premium": 120.0}
    revenue = (60.0 + 0.12 * seconds - 0.8 * age + 2.5 * sms
               + np.array([uplift[p] for p in plan]) - 35.0 * complaint
               + rng.normal(0, 10.0, n))
    schema = FeatureSchema((("seconds", NUMERIC), ("age", NUMERIC), ("sms", NUMERIC),
                            ("plan", CATEGORICAL), ("region", CATEGORICAL),
                            ("complaint", BINARY)), "revenue")
    cols = {"seconds": seconds.tolist(), "age": age.tolist(), "sms": sms.tolist(),
            "plan": plan.tolist(), "region": region.tolist(), "complaint": complaint.tolist(),
            "revenue": np.round(revenue, 2).tolist()}
    return schema, cols
