import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from localsurrogate.agreement import delta_mu, r_lower_bound, t_quantile, universal_r

from oracles import mu_double_sum, r_lower_oracle


def t_quantile_mpmath(df, confidence):
    """Two-sided t critical value by 30-digit quadrature of the t density."""
    mpmath.mp.dps = 30
    nu = mpmath.mpf(df)
    log_norm = mpmath.loggamma((nu + 1) / 2) - mpmath.loggamma(nu / 2) - mpmath.log(nu * mpmath.pi) / 2

    def pdf(t):
        return mpmath.exp(log_norm - (nu + 1) / 2 * mpmath.log1p(t * t / nu))

    def two_sided(t):
        return 2 * mpmath.quad(pdf, [0, t])

    return float(mpmath.findroot(lambda t: two_sided(t) - confidence, (mpmath.mpf("0.5"), mpmath.mpf(100)),
                                 solver="illinois"))


vectors = arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3))


class TestDeltaMu:
    def test_perfect(self):
        assert delta_mu([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])[0] == 0.0

    def test_mean_predictor(self):
        y = np.array([1.0, 4.0, 2.0, 9.0])
        d, mu = delta_mu(y, np.full(4, y.mean()))
        assert d == pytest.approx(y.var(), abs=1e-12)
        assert mu == pytest.approx(y.var(), abs=1e-12)

    def test_hand_case(self):
        d, mu = delta_mu([0.0, 2.0], [2.0, 0.0])
        assert (d, mu) == (4.0, 2.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            delta_mu([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            delta_mu([], [])

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_against_definitions(self, data):
        y = data.draw(vectors)
        yhat = data.draw(arrays(np.float64, len(y), elements=st.floats(-1e3, 1e3)))
        d, mu = delta_mu(y, yhat)
        scale = 1.0 + float(np.max(np.abs(y)) ** 2 + np.max(np.abs(yhat)) ** 2)
        assert d == pytest.approx(float(np.mean((yhat - y) ** 2)), abs=1e-12 * scale)
        assert mu == pytest.approx(mu_double_sum(y, yhat), abs=1e-11 * scale)


class TestUniversalR:
    def test_perfect(self):
        assert universal_r([1.0, 3.0, 2.0], [1.0, 3.0, 2.0]) == 1.0

    def test_mean_predictor(self):
        y = np.array([3.0, -1.0, 4.0, 1.5])
        assert universal_r(y, np.full(4, y.mean())) == pytest.approx(0.0, abs=1e-12)

    def test_hand_case(self):
        assert universal_r([0.0, 2.0], [2.0, 0.0]) == -1.0

    def test_degenerate(self):
        assert universal_r([2.0, 2.0, 2.0], [2.0, 2.0, 2.0]) == 0.0

    @settings(max_examples=200, deadline=None)
    @given(st.data(), st.floats(-50, 50).filter(lambda a: abs(a) > 1e-2), st.floats(-100, 100))
    def test_affine_invariance(self, data, a, b):
        y = data.draw(arrays(np.float64, st.integers(2, 30), elements=st.floats(-10, 10)))
        yhat = data.draw(arrays(np.float64, len(y), elements=st.floats(-10, 10)))
        assume(np.var(y) + np.var(yhat) > 1e-3)
        assert universal_r(a * y + b, a * yhat + b) == pytest.approx(universal_r(y, yhat), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_at_most_one(self, data):
        y = data.draw(vectors)
        yhat = data.draw(arrays(np.float64, len(y), elements=st.floats(-1e3, 1e3)))
        assert universal_r(y, yhat) <= 1.0


class TestTQuantile:
    @pytest.mark.parametrize("df,confidence", [(1, 0.95), (2, 0.9), (5, 0.95), (10, 0.95),
                                               (30, 0.99), (100, 0.8), (10 ** 6, 0.95)])
    def test_against_mpmath(self, df, confidence):
        assert t_quantile(df, confidence) == pytest.approx(t_quantile_mpmath(df, confidence), abs=1e-8)

    def test_table_values(self):
        assert t_quantile(10, 0.95) == pytest.approx(2.228139, abs=1e-5)
        assert t_quantile(1, 0.95) == pytest.approx(math.tan(math.pi * 0.475), abs=1e-3)
        assert t_quantile(10 ** 6, 0.95) == pytest.approx(1.95996, abs=1e-3)

    def test_monotone(self):
        confs = [0.6, 0.8, 0.9, 0.95, 0.99]
        for df in (1, 3, 10, 50):
            vals = [t_quantile(df, c) for c in confs]
            assert all(a < b for a, b in zip(vals, vals[1:]))
        for c in (0.6, 0.95):
            vals = [t_quantile(df, c) for df in (1, 2, 5, 20, 100, 10 ** 4)]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("df,confidence", [(0, 0.95), (2.5, 0.95), (5, 0.0), (5, 1.0)])
    def test_invalid(self, df, confidence):
        with pytest.raises(ValueError):
            t_quantile(df, confidence)


class TestRLowerBound:
    def test_perfect(self):
        s = r_lower_bound([0.0, 1.0, 3.0], [0.0, 1.0, 3.0])
        assert (s.delta, s.sigma, s.r, s.r_lower) == (0.0, 0.0, 1.0, 1.0)

    def test_constant_residuals(self):
        y = np.array([1.0, 2.0, 4.0, 8.0])
        s = r_lower_bound(y, y + 0.5)
        assert s.sigma == 0.0
        assert s.r_lower == s.r

    def test_hand_example(self):
        y, yhat = [0.0, 1.0, 2.0, 3.0], [0.1, 0.9, 2.2, 2.8]
        s = r_lower_bound(y, yhat, 0.95)
        # spreadsheet-style recomputation
        sq = [0.01, 0.01, 0.04, 0.04]
        delta = sum(sq) / 4
        sigma = math.sqrt(sum((v - delta) ** 2 for v in sq) / 3)
        moe = 3.182446305284263 * sigma / 2
        mu = mu_double_sum(y, yhat)
        assert s.delta == pytest.approx(delta, abs=1e-15)
        assert s.sigma == pytest.approx(sigma, abs=1e-15)
        assert s.r_lower == pytest.approx(1 - (delta + moe) / mu, abs=1e-12)
        assert s.r_lower == pytest.approx(r_lower_oracle(y, yhat, 0.95), abs=1e-12)

    def test_degenerate(self):
        s = r_lower_bound([3.0, 3.0, 3.0], [3.0, 3.0, 3.0])
        assert s.degenerate and s.r == 0.0 and s.r_lower == 0.0

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            r_lower_bound([1.0], [1.0])

    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_lower_bound_ordering(self, data):
        y = data.draw(arrays(np.float64, st.integers(2, 30), elements=st.floats(-100, 100)))
        yhat = data.draw(arrays(np.float64, len(y), elements=st.floats(-100, 100)))
        s = r_lower_bound(y, yhat)
        assume(not s.degenerate)
        assert s.r_lower <= s.r
        if s.moe_delta > 1e-12 * s.mu:
            assert s.r_lower < s.r
        assert s.r_lower == pytest.approx(r_lower_oracle(y, yhat, 0.95), abs=1e-9, rel=1e-9)
