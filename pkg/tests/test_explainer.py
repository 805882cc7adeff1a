import json

import numpy as np
import pytest

from localsurrogate.dataset import CATEGORICAL, NUMERIC, FeatureSchema, encode, encode_point, from_columns
from localsurrogate.distance import compute_distances, cooccurrence_model
from localsurrogate.explainer import (Explanation, ExplainError, Term, candidate_sizes, explain,
                                      explain_many, optimal_neighborhood_search, render_explanation,
                                      render_text, start_size, step_from_percent)
from localsurrogate.surrogate import SurrogateModel

from conftest import random_mixed
from oracles import exhaustive_scan_oracle


def numeric_table(X, y):
    X = np.asarray(X, dtype=float)
    names = [chr(ord("a") + j) for j in range(X.shape[1])]
    cols = {n: X[:, j] for j, n in enumerate(names)}
    cols["y"] = y
    return from_columns(FeatureSchema(tuple((n, NUMERIC) for n in names), "y"), cols)


def churn_explanation():
    """Churn-style example: rounded coefficients and raw feature values."""
    coef = {"seconds": 190.27, "age": -102.91, "freqSMS": 480.08, "distNums": -17.71}
    values = {"seconds": 2.18, "age": -0.11, "freqSMS": -0.65, "distNums": 0.90}
    cols = tuple(coef)
    model = SurrogateModel(458.47, coef, cols, 0.0, 0.0, (), 477)
    terms = tuple(Term(c, coef[c], values[c]) for c in cols)
    predicted = model.predict_one(np.array([values[c] for c in cols]))
    return Explanation("churn", 458.47, terms, predicted, 477, 0.9, 0.95, model, tuple(range(477)))


class TestSizes:
    def test_start_size(self):
        assert start_size(1000, 9) == 18
        assert start_size(1000, 1) == 5
        assert start_size(12, 10) == 12

    def test_step_from_percent(self):
        assert step_from_percent(1000, 1) == 10
        assert step_from_percent(50, 1) == 1
        assert step_from_percent(300, 100) == 300

    def test_candidate_sizes_include_total(self):
        sizes = candidate_sizes(103, 2, 10)
        assert sizes[0] == 5 and sizes[-1] == 103
        assert sizes == sorted(set(sizes))

    def test_too_small(self):
        with pytest.raises(ExplainError):
            candidate_sizes(4, 1, 1)


class TestNeighborhoodSearch:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 120))
        X = rng.normal(size=(n, 3))
        # piecewise signal so the best neighborhood is not always the full table
        y = np.where(X[:, 0] > 0, 2 * X[:, 0] + X[:, 1], -X[:, 2]) + rng.normal(scale=0.3, size=n)
        ds = numeric_table(X, y)
        q = int(rng.integers(0, n))
        scan = optimal_neighborhood_search(ds, compute_distances(ds, cooccurrence_model(ds), ds.point(q)), 1)
        size, score = exhaustive_scan_oracle(ds, q)
        assert scan.best_size == size
        assert scan.best_score.r_lower == pytest.approx(score, abs=1e-9)

    def test_best_is_max_with_smallest_tie(self):
        ds = random_mixed(80, seed=3)
        scan = optimal_neighborhood_search(ds, compute_distances(ds, cooccurrence_model(ds), ds.point(0)), 1)
        vals = [s.r_lower for s in scan.scores]
        assert scan.best_size == scan.sizes[vals.index(max(vals))]
        assert list(scan.sizes) == sorted(scan.sizes)
        assert scan.sizes[-1] == len(ds)

    def test_linear_data_uses_whole_table(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(150, 2))
        y = 3 * X[:, 0] - X[:, 1] + 1e-6 * rng.normal(size=150)
        ds = numeric_table(X, y)
        for q in (0, 40, 149):
            e = explain(ds, q)
            assert e.neighborhood_size == len(ds)
            assert e.r_lower > 1 - 1e-9

    def test_two_regimes(self):
        rng = np.random.default_rng(5)
        n_a = 60
        xa = rng.uniform(-3, -1, n_a)
        xb = rng.uniform(1, 3, 140)
        x = np.concatenate([xa, xb])
        y = np.concatenate([4 * xa + 1, -2 * xb + 20]) + rng.normal(scale=0.05, size=200)
        ds = numeric_table(x[:, None], y)
        e = explain(ds, 10, step_percent=0.5)
        assert e.neighborhood_size <= n_a + 5
        assert e.coefficients["a"] / ds.stds[0] == pytest.approx(4.0, rel=0.02)

    def test_contains_query(self):
        ds = random_mixed(60, seed=6)
        for q in (0, 17, 59):
            e = explain(ds, q)
            assert q in e.neighborhood


class TestExplain:
    def test_exact_linear_recovery(self):
        rng = np.random.default_rng(7)
        a, b = rng.normal(size=200), rng.normal(size=200)
        # pre-standardize so the coefficients read in the original units
        a, b = (a - a.mean()) / a.std(), (b - b.mean()) / b.std()
        ds = numeric_table(np.column_stack([a, b]), 3 * a - b)
        for q in (0, 99, 150):
            e = explain(ds, q)
            assert e.coefficients == {"a": pytest.approx(3.0, abs=1e-4), "b": pytest.approx(-1.0, abs=1e-4)}

    def test_constant_target(self):
        ds = numeric_table(np.random.default_rng(8).normal(size=(40, 2)), np.full(40, 12.5))
        e = explain(ds, 3)
        assert e.terms == () and e.predicted == 12.5

    def test_additivity(self):
        ds = random_mixed(120, seed=9, cat_sizes=(3, 2), n_bin=1)
        m = encode(ds)
        for q in (0, 33, 119):
            e = explain(ds, q)
            assert e.predicted == pytest.approx(e.base_value + sum(t.contribution for t in e.terms), abs=1e-9)
            pos = {c: j for j, c in enumerate(m.columns)}
            for i in e.neighborhood:
                manual = e.base_value + sum(t.coefficient * m.values[i, pos[t.feature]] for t in e.terms)
                assert e.model.predict_one(m.values[i]) == pytest.approx(manual, abs=1e-9)

    def test_terms_are_nonzero_coefficients(self):
        ds = random_mixed(100, seed=10)
        e = explain(ds, 5)
        assert len(e.terms) == len(e.model.coefficients)
        assert all(t.coefficient != 0 for t in e.terms)

    def test_external_point(self):
        ds = random_mixed(80, seed=11)
        p = ds.point(4)
        e1, e2 = explain(ds, p), explain(ds, 4)
        assert e1.point_id == "external"
        assert e1.predicted == e2.predicted and e1.neighborhood_size == e2.neighborhood_size

    def test_deterministic_and_thread_free(self):
        ds = random_mixed(90, seed=12)
        runs = [[json.dumps(e.to_dict()) for e in explain_many(ds, range(0, 90, 9), threads=t)]
                for t in (1, 4)]
        fresh = [json.dumps(explain(ds, i).to_dict()) for i in range(0, 90, 9)]
        assert runs[0] == runs[1] == fresh

    @pytest.mark.parametrize("kw", [{"confidence": 1.0}, {"confidence": 0.0}, {"step_percent": 0},
                                    {"step_percent": 101}])
    def test_invalid_options(self, kw):
        with pytest.raises(ValueError):
            explain(random_mixed(20, seed=1), 0, **kw)

    def test_bad_index(self):
        with pytest.raises(ExplainError, match="17"):
            explain(random_mixed(10, seed=1), 17)


class TestChurnExample:
    def test_additivity_of_rounded_coefficients(self):
        e = churn_explanation()
        total = e.base_value + sum(t.contribution for t in e.terms)
        assert total == pytest.approx(556.59, abs=0.01)
        assert abs(total - 550.86) <= 6
        assert abs(total - 551.08) <= 6
        assert e.neighborhood_size - 1 == 476

    def test_bars(self):
        text = render_text(churn_explanation())
        bars = [line for line in text.splitlines() if "|" in line]
        assert len(bars) == 4
        assert bars[0].startswith("seconds") and bars[0].endswith("+" * 40)
        assert bars[1].startswith("freqSMS") and bars[1].rstrip().endswith("-")
        assert "applies to 477 neighbors" in text


class TestRender:
    def test_zero_terms(self):
        ds = numeric_table(np.random.default_rng(8).normal(size=(20, 1)), np.full(20, 2.0))
        lines = render_text(explain(ds, 0)).splitlines()
        assert lines[1].startswith("base value") and lines[2].startswith("total")
        assert len(lines) == 4

    def test_tie_keeps_schema_order(self):
        model = SurrogateModel(1.0, {"x": 2.0, "z": -1.0}, ("x", "z"), 0.0, 0.0, (), 10)
        e = Explanation(0, 1.0, (Term("x", 2.0, 1.0), Term("z", -1.0, -2.0)), 5.0, 10, 0.5, 0.95,
                        model, tuple(range(10)))
        bars = [line for line in render_text(e).splitlines() if "|" in line]
        assert bars[0].startswith("x") and bars[1].startswith("z")

    def test_structured_schema(self):
        doc = render_explanation(explain(random_mixed(50, seed=2), 1), "structured")
        assert set(doc) == {"point_id", "base_value", "terms", "predicted", "neighborhood_size",
                            "r_lower", "confidence"}
        for t in doc["terms"]:
            assert set(t) == {"feature", "coefficient", "value", "contribution"}
        json.dumps(doc)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_explanation(churn_explanation(), "html")

    def test_no_negative_zero(self):
        model = SurrogateModel(0.0, {"x": -2.0}, ("x",), 0.0, 0.0, (), 5)
        e = Explanation(0, 0.0, (Term("x", -2.0, 0.0),), 0.0, 5, 0.5, 0.95, model, tuple(range(5)))
        assert "-0.0000" not in render_text(e)
        assert json.dumps(e.to_dict()).count("-0.0") == 0
