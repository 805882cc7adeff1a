"""Counterfactuals: move a point toward a reference target value.

Candidates are rows whose target lies within epsilon of the reference. Each
candidate is explained; the features its surrogate uses are copied into the
query point, and the modification with the lowest
``d(x, x_i) + d(x, x') / |changes|`` wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataPoint, Dataset, encode, encode_point, feature_value, set_feature
from .distance import compute_distances, cooccurrence_model, generalized_distance
from .explainer import Explanation, explain_row
from .parallel import pmap

DEFAULT_EPSILON_PERCENT = 5.0


class CounterfactualError(ValueError):
    pass


@dataclass(frozen=True)
class CounterfactualQuery:
    point: DataPoint
    reference_value: float
    epsilon: float
    max_candidates: int | None = None
    epsilon_from_range: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be at least 1")


def make_query(ds: Dataset, point: DataPoint | int, reference_value: float,
               epsilon_percent: float = DEFAULT_EPSILON_PERCENT,
               max_candidates: int | None = None) -> CounterfactualQuery:
    """Query with epsilon = epsilon_percent of |reference_value|.

    A zero reference falls back to the same percentage of the target range.
    """
    if epsilon_percent <= 0:
        raise ValueError("epsilon percent must be positive")
    if isinstance(point, (int, np.integer)):
        point = ds.point(int(point))
    ds.check_point(point)
    eps = abs(reference_value) * epsilon_percent / 100.0
    from_range = False
    if eps == 0.0:
        eps = float(ds.targets.max() - ds.targets.min()) * epsilon_percent / 100.0
        from_range = True
        if eps == 0.0:
            raise CounterfactualError("constant target: cannot derive a positive epsilon")
    return CounterfactualQuery(point, float(reference_value), eps, max_candidates, from_range)


@dataclass(frozen=True)
class Change:
    feature: str
    old: object
    new: object


@dataclass(frozen=True)
class CounterfactualExplanation:
    original: DataPoint
    modified: DataPoint
    changes: tuple[Change, ...]
    candidate_row: int
    candidate_explanation: Explanation
    candidate_distance: float
    modified_distance: float
    objective: float
    predicted_at_modified: float
    query: CounterfactualQuery

    def to_dict(self, ds: Dataset) -> dict:
        return {
            "reference_value": self.query.reference_value,
            "epsilon": self.query.epsilon,
            "epsilon_from_range": self.query.epsilon_from_range,
            "candidate_row": self.candidate_row,
            "changes": [
                {"feature": c.feature,
                 "old": ds.raw_value(self.original, c.feature),
                 "new": ds.raw_value(self.modified, c.feature)}
                for c in self.changes
            ],
            "objective": self.objective,
            "predicted_at_modified": self.predicted_at_modified,
        }


def objective(candidate_distance: float, modified_distance: float, n_changes: int) -> float:
    return candidate_distance + modified_distance / n_changes


def find_candidates(ds: Dataset, q: CounterfactualQuery) -> list[int]:
    """Rows with target in [ref - eps, ref + eps], nearest to the query first."""
    lo, hi = q.reference_value - q.epsilon, q.reference_value + q.epsilon
    in_band = (ds.targets >= lo) & (ds.targets <= hi)
    if not in_band.any():
        raise CounterfactualError(
            f"no candidate within epsilon={q.epsilon:g} of {q.reference_value:g}; "
            f"try a larger epsilon")
    d = compute_distances(ds, cooccurrence_model(ds), q.point)
    rows = [int(i) for i in d.order if in_band[i]]
    if q.max_candidates is not None:
        rows = rows[:q.max_candidates]
    return rows


def apply_explanation(ds: Dataset, x: DataPoint, source: DataPoint,
                      e: Explanation) -> tuple[DataPoint, tuple[Change, ...]]:
    """Copy into ``x`` every source feature behind the explanation's terms."""
    origin = dict(zip(encode(ds).columns, encode(ds).origin))
    used = {origin[t.feature] for t in e.terms}
    features = [f for f in ds.schema.names if f in used]
    out = x
    changes = []
    for f in features:
        old, new = feature_value(ds, x, f), feature_value(ds, source, f)
        if old != new:
            out = set_feature(ds, out, f, new)
            changes.append(Change(f, old, new))
    return out, tuple(changes)


def _evaluate_candidate(ds: Dataset, q: CounterfactualQuery, row: int, confidence: float,
                        step_percent: float):
    e = explain_row(ds, row, confidence, step_percent)
    modified, changes = apply_explanation(ds, q.point, ds.point(row), e)
    if not changes:
        return None
    model = cooccurrence_model(ds)
    d_cand = generalized_distance(ds, model, q.point, ds.point(row))
    d_mod = generalized_distance(ds, model, q.point, modified)
    pred = e.model.predict_one(encode_point(ds, modified))
    return CounterfactualExplanation(
        original=q.point, modified=modified, changes=changes, candidate_row=row,
        candidate_explanation=e, candidate_distance=d_cand, modified_distance=d_mod,
        objective=objective(d_cand, d_mod, len(changes)),
        predicted_at_modified=pred, query=q)


def select_best(results: list[CounterfactualExplanation]) -> CounterfactualExplanation:
    """Lowest objective; ties by candidate distance, then row index."""
    return min(results, key=lambda r: (r.objective, r.candidate_distance, r.candidate_row))


def counterfactual(ds: Dataset, q: CounterfactualQuery, confidence: float = 0.95,
                   step_percent: float = 1.0, threads: int = 1) -> CounterfactualExplanation:
    rows = find_candidates(ds, q)
    results = pmap(lambda r: _evaluate_candidate(ds, q, r, confidence, step_percent), rows, threads)
    results = [r for r in results if r is not None]
    if not results:
        raise CounterfactualError(
            "every candidate leaves the point unchanged: the reference is reachable "
            "without change, which is inconsistent")
    return select_best(results)


@dataclass(frozen=True)
class CounterfactualReport:
    predicted_at_modified: float
    reference_value: float
    deviation: float
    within_epsilon: bool

    def to_dict(self) -> dict:
        return {
            "predicted_at_modified": self.predicted_at_modified,
            "reference_value": self.reference_value,
            "deviation": self.deviation,
            "within_epsilon": self.within_epsilon,
        }


def verify_counterfactual(ds: Dataset, ce: CounterfactualExplanation,
                          q: CounterfactualQuery) -> CounterfactualReport:
    pred = ce.candidate_explanation.model.predict_one(encode_point(ds, ce.modified))
    dev = abs(pred - q.reference_value)
    return CounterfactualReport(pred, q.reference_value, dev, dev <= q.epsilon)
