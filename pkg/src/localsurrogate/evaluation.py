"""Quantitative checks of explanation quality over a test split.

fidelity      RMSE of each point's own surrogate prediction vs its target
generality    neighborhood size beyond the point itself, as % of the table
simplicity    number of terms per explanation
robustness    1 - explanation distance to the k nearest test points
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .counterfactual import CounterfactualError, counterfactual, make_query
from .dataset import Dataset, encode
from .distance import compute_distances, cooccurrence_model
from .explainer import Explanation, explain_many
from .parallel import pmap

DEFAULT_KNN = 10
TEST_FRACTION = 0.2
CF_SHIFT = 0.3


def default_test_indices(n_rows: int) -> list[int]:
    """Trailing 20% of the rows (at least one)."""
    k = max(1, int(round(n_rows * TEST_FRACTION)))
    return list(range(n_rows - k, n_rows))


def explanation_distance(b1: dict[str, float], b2: dict[str, float]) -> float:
    """Mean of |b1 - b2| / (|b1| + |b2|) over the union of features.

    A feature missing from one explanation has coefficient 0 there; a 0/0
    term counts as 0, and two empty explanations are at distance 0.
    """
    feats = list(dict.fromkeys(list(b1) + list(b2)))
    if not feats:
        return 0.0
    total = 0.0
    for f in feats:
        a, b = b1.get(f, 0.0), b2.get(f, 0.0)
        den = abs(a) + abs(b)
        if den > 0:
            total += abs(a - b) / den
    return total / len(feats)


@dataclass
class EvaluationReport:
    n_rows: int
    n_test: int
    fidelity_rmse: float
    generality_percent: float
    simplicity_mean: float
    robustness_mean: float
    knn: int
    counterfactual_rmse: float | None = None
    counterfactual_solved: int = 0
    counterfactual_skipped: int = 0
    topk_recovery: float | None = None
    topk: int | None = None
    per_point: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_test": self.n_test,
            "fidelity_rmse": self.fidelity_rmse,
            "generality_percent": self.generality_percent,
            "simplicity_mean": self.simplicity_mean,
            "robustness_mean": self.robustness_mean,
            "knn": self.knn,
            "counterfactual_rmse": self.counterfactual_rmse,
            "counterfactual_solved": self.counterfactual_solved,
            "counterfactual_skipped": self.counterfactual_skipped,
            "topk_recovery": self.topk_recovery,
            "topk": self.topk,
            "per_point": self.per_point,
        }

    def render_text(self) -> str:
        rows = [
            ("Fidelity (RMSE)", f"{self.fidelity_rmse:.4f}"),
            ("Generality (%)", f"{self.generality_percent:.2f}"),
            ("Simplicity (# features)", f"{self.simplicity_mean:.2f}"),
            (f"Robustness (k={self.knn})", f"{self.robustness_mean:.4f}"),
        ]
        if self.counterfactual_rmse is not None or self.counterfactual_skipped:
            cf = "n/a" if self.counterfactual_rmse is None else f"{self.counterfactual_rmse:.4f}"
            rows.append(("Counterfactual (RMSE)",
                         f"{cf} ({self.counterfactual_solved} solved, "
                         f"{self.counterfactual_skipped} skipped)"))
        if self.topk_recovery is not None:
            rows.append((f"Top-{self.topk} recovery (%)", f"{self.topk_recovery:.2f}"))
        width = max(len(r[0]) for r in rows)
        out = [f"evaluation over {self.n_test} test points of {self.n_rows} rows",
               f"{'Metric':<{width}}  Value", f"{'-' * width}  {'-' * 10}"]
        out += [f"{name:<{width}}  {val}" for name, val in rows]
        return "\n".join(out) + "\n"


def _check_test(ds: Dataset, test_idx: Sequence[int]) -> list[int]:
    idx = [int(i) for i in test_idx]
    if not idx:
        raise ValueError("the test set is empty")
    bad = [i for i in idx if not 0 <= i < len(ds)]
    if bad:
        raise IndexError(f"test indices out of range: {bad[:5]}")
    return idx


def fidelity(ds: Dataset, test_idx: Sequence[int], explanations: Sequence[Explanation] | None = None,
             **kw) -> float:
    idx = _check_test(ds, test_idx)
    exps = explanations if explanations is not None else explain_many(ds, idx, **kw)
    err = np.array([e.predicted - ds.targets[i] for e, i in zip(exps, idx)])
    return float(np.sqrt(np.mean(err ** 2)))


def generality(ds: Dataset, test_idx: Sequence[int], explanations: Sequence[Explanation] | None = None,
               **kw) -> float:
    idx = _check_test(ds, test_idx)
    exps = explanations if explanations is not None else explain_many(ds, idx, **kw)
    return float(np.mean([100.0 * (e.neighborhood_size - 1) / len(ds) for e in exps]))


def simplicity(ds: Dataset, test_idx: Sequence[int], explanations: Sequence[Explanation] | None = None,
               **kw) -> float:
    idx = _check_test(ds, test_idx)
    exps = explanations if explanations is not None else explain_many(ds, idx, **kw)
    return float(np.mean([len(e.terms) for e in exps]))


def nearest_test_points(ds: Dataset, test_idx: Sequence[int], k: int) -> list[list[int]]:
    """For each test point, its k nearest other test points (ties by row index)."""
    model = cooccurrence_model(ds)
    in_test = np.zeros(len(ds), dtype=bool)
    in_test[list(test_idx)] = True
    out = []
    for i in test_idx:
        order = compute_distances(ds, model, ds.point(i)).order
        out.append([int(j) for j in order[in_test[order]] if j != i][:k])
    return out


def robustness_scores(ds: Dataset, test_idx: Sequence[int], k: int = DEFAULT_KNN,
                      explanations: Sequence[Explanation] | None = None, **kw) -> list[float]:
    idx = _check_test(ds, test_idx)
    if len(idx) < k + 1:
        raise ValueError(f"robustness with k={k} needs at least {k + 1} test points, got {len(idx)}")
    exps = explanations if explanations is not None else explain_many(ds, idx, **kw)
    by_row = {i: e for i, e in zip(idx, exps)}
    scores = []
    for i, nbrs in zip(idx, nearest_test_points(ds, idx, k)):
        own = by_row[i].coefficients
        scores.append(float(np.mean([1.0 - explanation_distance(own, by_row[j].coefficients)
                                     for j in nbrs])))
    return scores


def robustness(ds: Dataset, test_idx: Sequence[int], k: int = DEFAULT_KNN,
               explanations: Sequence[Explanation] | None = None, **kw) -> float:
    return float(np.mean(robustness_scores(ds, test_idx, k, explanations, **kw)))


@dataclass(frozen=True)
class CounterfactualOutcome:
    row: int
    reference_value: float
    predicted: float | None
    skipped: str | None = None


def counterfactual_outcomes(ds: Dataset, test_idx: Sequence[int], confidence: float = 0.95,
                            step_percent: float = 1.0, max_candidates: int | None = None,
                            threads: int = 1) -> list[CounterfactualOutcome]:
    """Targets shifted by +-30% of the target range; unreachable bands are skipped."""
    idx = _check_test(ds, test_idx)
    span = float(ds.targets.max() - ds.targets.min())
    jobs = [(i, float(ds.targets[i]) + sign * CF_SHIFT * span) for i in idx for sign in (1.0, -1.0)]

    def run(job):
        i, ref = job
        try:
            q = make_query(ds, i, ref, max_candidates=max_candidates)
            ce = counterfactual(ds, q, confidence, step_percent)
        except CounterfactualError as exc:
            return CounterfactualOutcome(i, ref, None, str(exc))
        return CounterfactualOutcome(i, ref, ce.predicted_at_modified)

    return pmap(run, jobs, threads)


def counterfactual_fidelity(ds: Dataset, test_idx: Sequence[int], **kw) -> float | None:
    """RMSE of predicted_at_modified vs the reference; None if nothing was solvable."""
    outcomes = counterfactual_outcomes(ds, test_idx, **kw)
    err = [o.predicted - o.reference_value for o in outcomes if o.predicted is not None]
    return float(np.sqrt(np.mean(np.square(err)))) if err else None


def global_ols(ds: Dataset) -> tuple[float, np.ndarray]:
    m = encode(ds)
    A = np.column_stack([np.ones(len(ds)), m.values])
    coef = np.linalg.lstsq(A, ds.targets, rcond=None)[0]
    return float(coef[0]), coef[1:]


def topk_recovery(ds: Dataset, k: int = 5, test_idx: Sequence[int] | None = None,
                  confidence: float = 0.95, step_percent: float = 1.0, threads: int = 1) -> float:
    """Percentage of a global OLS model's top-k columns found in the local explanations.

    The explained values are the OLS predictions, so the OLS model plays the
    role of a fully interpretable black box.
    """
    m = encode(ds)
    if m.shape[1] < k:
        raise ValueError(f"top-{k} recovery needs at least {k} encoded columns, got {m.shape[1]}")
    intercept, coef = global_ols(ds)
    top = [m.columns[j] for j in sorted(range(len(coef)), key=lambda j: (-abs(coef[j]), j))[:k]]
    surrogate_ds = ds.with_targets(intercept + m.values @ coef)
    idx = _check_test(ds, default_test_indices(len(ds)) if test_idx is None else test_idx)
    exps = explain_many(surrogate_ds, idx, confidence, step_percent, threads)
    hits = [sum(1 for c in top if c in e.coefficients) / k for e in exps]
    return 100.0 * float(np.mean(hits))


def evaluate(ds: Dataset, test_idx: Sequence[int] | None = None, k: int = DEFAULT_KNN,
             confidence: float = 0.95, step_percent: float = 1.0, threads: int = 1,
             with_counterfactual: bool = False, max_candidates: int | None = None,
             topk: int | None = None) -> EvaluationReport:
    idx = _check_test(ds, default_test_indices(len(ds)) if test_idx is None else test_idx)
    exps = explain_many(ds, idx, confidence, step_percent, threads)
    rob = robustness_scores(ds, idx, k, exps)
    per_point = [
        {"row": i, "target": float(ds.targets[i]), "predicted": e.predicted,
         "neighborhood_size": e.neighborhood_size, "n_terms": len(e.terms),
         "r_lower": e.r_lower, "robustness": r}
        for i, e, r in zip(idx, exps, rob)
    ]
    report = EvaluationReport(
        n_rows=len(ds), n_test=len(idx),
        fidelity_rmse=fidelity(ds, idx, exps),
        generality_percent=generality(ds, idx, exps),
        simplicity_mean=simplicity(ds, idx, exps),
        robustness_mean=float(np.mean(rob)),
        knn=k, per_point=per_point,
    )
    if with_counterfactual:
        outcomes = counterfactual_outcomes(ds, idx, confidence, step_percent, max_candidates, threads)
        err = [o.predicted - o.reference_value for o in outcomes if o.predicted is not None]
        report.counterfactual_solved = len(err)
        report.counterfactual_skipped = len(outcomes) - len(err)
        report.counterfactual_rmse = float(math.sqrt(np.mean(np.square(err)))) if err else None
    if topk is not None:
        report.topk = topk
        report.topk_recovery = topk_recovery(ds, topk, idx, confidence, step_percent, threads)
    return report
