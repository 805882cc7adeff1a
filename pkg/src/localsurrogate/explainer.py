"""Neighborhood search and the user-facing explanation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import CD_MAX_SWEEPS, score_prefixes
from .agreement import AgreementScore, score_from_moments
from .dataset import DataPoint, Dataset, encode, encode_point
from .distance import DistanceVector, compute_distances, cooccurrence_model
from .parallel import pmap
from .surrogate import FitError, SurrogateModel, train_local_surrogate

MIN_FIT_ROWS = 5
BAR_WIDTH = 40


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborhoodScan:
    sizes: tuple[int, ...]
    scores: tuple[AgreementScore, ...]
    best_size: int
    best_model: SurrogateModel
    skipped_sizes: tuple[int, ...] = ()

    @property
    def best_score(self) -> AgreementScore:
        return self.scores[self.sizes.index(self.best_size)]


@dataclass(frozen=True)
class Term:
    feature: str
    coefficient: float
    value: float

    @property
    def contribution(self) -> float:
        return self.coefficient * self.value + 0.0


@dataclass(frozen=True)
class Explanation:
    point_id: int | str
    base_value: float
    terms: tuple[Term, ...]
    predicted: float
    neighborhood_size: int
    r_lower: float
    confidence: float
    model: SurrogateModel
    neighborhood: tuple[int, ...]

    @property
    def coefficients(self) -> dict[str, float]:
        return {t.feature: t.coefficient for t in self.terms}

    def to_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "base_value": self.base_value,
            "terms": [
                {"feature": t.feature, "coefficient": t.coefficient,
                 "value": t.value, "contribution": t.contribution}
                for t in self.terms
            ],
            "predicted": self.predicted,
            "neighborhood_size": self.neighborhood_size,
            "r_lower": self.r_lower,
            "confidence": self.confidence,
        }


def start_size(n_rows: int, n_columns: int) -> int:
    """Two rows per encoded column, but never below the 5-fold CV floor."""
    return max(MIN_FIT_ROWS, min(2 * n_columns, n_rows))


def step_from_percent(n_rows: int, step_percent: float) -> int:
    return max(1, int(round(n_rows * step_percent / 100.0)))


def candidate_sizes(n_rows: int, n_columns: int, step: int) -> list[int]:
    if step < 1:
        raise ValueError("step must be a positive integer")
    if n_rows < MIN_FIT_ROWS:
        raise ExplainError(f"need at least {MIN_FIT_ROWS} rows to fit a surrogate, got {n_rows}")
    sizes = list(range(start_size(n_rows, n_columns), n_rows + 1, step))
    if sizes[-1] != n_rows:
        sizes.append(n_rows)
    return sizes


def _better(score: AgreementScore, best: AgreementScore | None) -> bool:
    # a degenerate neighborhood never beats a non-degenerate one
    if best is None:
        return True
    if score.degenerate != best.degenerate:
        return best.degenerate
    return score.r_lower > best.r_lower


def optimal_neighborhood_search(ds: Dataset, d: DistanceVector, step: int = 1,
                                confidence: float = 0.95) -> NeighborhoodScan:
    """Fit a surrogate on each nearest-i prefix and keep the best r_lower.

    Ties keep the smallest neighborhood. Sizes whose Lasso fit hits the sweep
    cap (near-singular folds in tiny neighborhoods) are skipped and listed in
    ``skipped_sizes``.
    """
    m = encode(ds)
    order = np.asarray(d.order)
    X = np.ascontiguousarray(m.values[order])
    y = np.ascontiguousarray(ds.targets[order])
    planned = candidate_sizes(len(ds), m.shape[1], step)
    moments, status = score_prefixes(X, y, np.asarray(planned, dtype=np.int64))
    sizes = [size for size, st in zip(planned, status) if st == 0]
    if not sizes:
        raise FitError(f"coordinate descent did not converge in {CD_MAX_SWEEPS} sweeps "
                       f"for any neighborhood size")
    scores = [score_from_moments(size, *row, confidence)
              for size, row, st in zip(planned, moments, status) if st == 0]
    best_i, best = 0, None
    for i, score in enumerate(scores):
        if _better(score, best):
            best_i, best = i, score
    best_size = sizes[best_i]
    model = train_local_surrogate(m.rows(order[:best_size]), y[:best_size])
    skipped = tuple(size for size, st in zip(planned, status) if st != 0)
    return NeighborhoodScan(tuple(sizes), tuple(scores), best_size, model, skipped)


def _resolve(ds: Dataset, x: DataPoint | int) -> tuple[DataPoint, int | str]:
    if isinstance(x, (int, np.integer)):
        i = int(x)
        if not 0 <= i < len(ds):
            raise ExplainError(f"row index {i} out of range (dataset has {len(ds)} rows)")
        return ds.point(i), i
    ds.check_point(x)
    return x, "external"


def explain(ds: Dataset, x: DataPoint | int, confidence: float = 0.95,
            step_percent: float = 1.0, point_id: int | str | None = None) -> Explanation:
    """Explain the target value of row ``x`` (or of an external point)."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    if not 0.0 < step_percent <= 100.0:
        raise ValueError(f"step percent must lie in (0, 100], got {step_percent}")
    point, pid = _resolve(ds, x)
    d = compute_distances(ds, cooccurrence_model(ds), point)
    scan = optimal_neighborhood_search(ds, d, step_from_percent(len(ds), step_percent), confidence)
    return _build(ds, point, pid if point_id is None else point_id, scan, d, confidence)


def _build(ds: Dataset, point: DataPoint, pid, scan: NeighborhoodScan, d: DistanceVector,
           confidence: float) -> Explanation:
    model = scan.best_model
    xv = encode_point(ds, point)
    pos = {c: j for j, c in enumerate(model.columns)}
    terms = tuple(Term(c, b, float(xv[pos[c]])) for c, b in model.coefficients.items())
    return Explanation(
        point_id=pid,
        base_value=model.intercept,
        terms=terms,
        predicted=model.predict_one(xv),
        neighborhood_size=scan.best_size,
        r_lower=scan.best_score.r_lower,
        confidence=confidence,
        model=model,
        neighborhood=tuple(int(i) for i in d.order[:scan.best_size]),
    )


def _fmt(v: float) -> str:
    return f"{v + 0.0:+.4f}"  # + 0.0 turns -0.0 into 0.0


def render_text(e: Explanation) -> str:
    """Plain-text bar chart; bars are scaled to the largest |contribution|."""
    ranked = sorted(enumerate(e.terms), key=lambda it: (-abs(it[1].contribution), it[0]))
    width = max([len(t.feature) for t in e.terms] + [len("base value")])
    top = max([abs(t.contribution) for t in e.terms] + [0.0])
    lines = [f"explanation for point {e.point_id}",
             f"{'base value':<{width}}  {_fmt(e.base_value):>14}"]
    for _, t in ranked:
        n = int(round(BAR_WIDTH * abs(t.contribution) / top)) if top > 0 else 0
        bar = ("+" if t.contribution >= 0 else "-") * n
        lines.append(f"{t.feature:<{width}}  {_fmt(t.contribution):>14}  "
                     f"({_fmt(t.coefficient)} x {_fmt(t.value)})  |{bar}")
    lines.append(f"{'total':<{width}}  {_fmt(e.predicted):>14}")
    lines.append(f"applies to {e.neighborhood_size} neighbors "
                 f"(r_lower {e.r_lower:.4f} at {e.confidence:.0%} confidence)")
    return "\n".join(lines) + "\n"


def render_explanation(e: Explanation, fmt: str = "text"):
    if fmt == "text":
        return render_text(e)
    if fmt == "structured":
        return e.to_dict()
    raise ValueError(f"unknown format {fmt!r}")


def explain_row(ds: Dataset, i: int, confidence: float = 0.95,
                step_percent: float = 1.0) -> Explanation:
    """Memoized :func:`explain` for a row of ``ds`` (results are deterministic)."""
    memo = ds._cache.setdefault("explanations", {})
    key = (int(i), float(confidence), float(step_percent))
    e = memo.get(key)
    if e is None:
        e = memo[key] = explain(ds, int(i), confidence, step_percent)
    return e


def explain_many(ds: Dataset, rows: Sequence[int], confidence: float = 0.95,
                 step_percent: float = 1.0, threads: int = 1) -> list[Explanation]:
    """Explain several rows; output order follows ``rows`` for any thread count."""
    return pmap(lambda i: explain_row(ds, i, confidence, step_percent), list(rows), threads)
