"""Local linear surrogate: VIF filter, Lasso CV (one-SE rule), OLS refit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dataset import EncodedMatrix


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    chosen: int

    @property
    def lam(self) -> float:
        return float(self.lambdas[self.chosen])


@dataclass(frozen=True)
class SurrogateModel:
    intercept: float
    coefficients: dict[str, float]
    columns: tuple[str, ...]
    lam: float
    train_rmse: float
    removed_by_vif: tuple[str, ...]
    n_rows: int
    lasso_path: LassoPath | None = field(default=None, repr=False, compare=False)

    @property
    def selected_columns(self) -> list[str]:
        return list(self.coefficients)

    def coef_vector(self) -> np.ndarray:
        """Coefficients aligned with ``columns`` (zeros for unselected)."""
        pos = {c: j for j, c in enumerate(self.columns)}
        out = np.zeros(len(self.columns))
        for c, b in self.coefficients.items():
            out[pos[c]] = b
        return out

    def predict_one(self, x: np.ndarray) -> float:
        """intercept + sum of coefficient * value, summed in column order."""
        pos = {c: j for j, c in enumerate(self.columns)}
        total = self.intercept
        for c, b in self.coefficients.items():
            total += b * float(x[pos[c]])
        return total

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in np.asarray(X, dtype=np.float64)])

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": [{"column": c, "coefficient": b} for c, b in self.coefficients.items()],
            "lambda": self.lam,
            "neighborhood_size": self.n_rows,
        }


def _xy(m: EncodedMatrix, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(m.values, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ValueError(f"target length {y.shape} does not match {X.shape[0]} rows")
    return X, y


def vif_filter(m: EncodedMatrix) -> tuple[EncodedMatrix, list[str]]:
    """Drop collinear columns (VIF > 10) one at a time, highest VIF first."""
    X = np.ascontiguousarray(m.values, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("VIF needs at least two rows")
    kept, removed = K.vif_select(X)
    if not kept.any():
        raise FitError(f"VIF filter removed every column: {list(m.columns)}")
    return m.select(np.nonzero(kept)[0]), [m.columns[j] for j in removed]


def vif_scores(m: EncodedMatrix) -> np.ndarray:
    """VIF of every column against all the others (no removal)."""
    X = np.ascontiguousarray(m.values, dtype=np.float64)
    Xc = K.center(X, np.zeros(len(X)))[0]
    return K.vif_values(Xc.T @ Xc, K.constant_columns(X, Xc), np.ones(X.shape[1], dtype=np.bool_))


def lasso_fit(m: EncodedMatrix, y, lam: float) -> np.ndarray:
    """Minimize ||y - X b||^2 + lam ||b||_1 (intercept absorbed by centering)."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X, y = _xy(m, y)
    Xc, yc, _, _ = K.center(X, y)
    beta = np.zeros(X.shape[1])
    sweeps = K.cd_lasso(Xc.T @ Xc, Xc.T @ yc, float(lam), beta, K.CD_TOL, K.CD_MAX_SWEEPS)
    if sweeps < 0:
        raise FitError(f"coordinate descent did not converge in {K.CD_MAX_SWEEPS} sweeps")
    return beta


def lasso_lambda_max(m: EncodedMatrix, y) -> float:
    X, y = _xy(m, y)
    Xc, yc, _, _ = K.center(X, y)
    return float(K.lambda_max(Xc, yc))


def fold_slices(n: int, k: int = K.N_FOLDS) -> list[slice]:
    b = K.fold_bounds(n, k)
    return [slice(int(b[i]), int(b[i + 1])) for i in range(k)]


def lasso_cv(m: EncodedMatrix, y) -> LassoPath:
    X, y = _xy(m, y)
    if X.shape[0] < K.N_FOLDS:
        raise ValueError(f"5-fold CV needs at least 5 rows, got {X.shape[0]}")
    Xc, yc, _, _ = K.center(X, y)
    lam_max = K.lambda_max(Xc, yc)
    lambdas = K.lambda_grid(lam_max, K.N_LAMBDAS, K.LAMBDA_DECADES)
    errors, status = K.lasso_cv_errors(X, y, lambdas, K.CD_TOL, K.CD_MAX_SWEEPS)
    if status < 0:
        raise FitError(f"coordinate descent did not converge in {K.CD_MAX_SWEEPS} sweeps")
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(K.N_FOLDS)
    return LassoPath(lambdas, mean, se, int(K.one_se_choice(mean, se)))


def fit_arrays(X: np.ndarray, y: np.ndarray):
    """Raw kernel fit on contiguous float64 arrays; see ``_kernels.fit_surrogate``."""
    if X.shape[0] < K.N_FOLDS:
        raise ValueError(f"a local surrogate needs at least 5 rows, got {X.shape[0]}")
    out = K.fit_surrogate(X, y)
    if out[-1] < 0:
        raise FitError(f"coordinate descent did not converge in {K.CD_MAX_SWEEPS} sweeps")
    return out


def train_local_surrogate(m: EncodedMatrix, y) -> SurrogateModel:
    X, y = _xy(m, y)
    (kept, selected, coef, intercept, lambdas, cv_mean, cv_se, chosen,
     _lasso, removed, _status) = fit_arrays(X, y)
    coefficients = {m.columns[j]: float(coef[j]) for j in np.nonzero(selected)[0]}
    pred = intercept + X[:, selected] @ coef[selected]
    rmse = float(np.sqrt(np.mean((pred - y) ** 2)))
    path = LassoPath(lambdas, cv_mean, cv_se, int(chosen))
    return SurrogateModel(
        intercept=float(intercept),
        coefficients=coefficients,
        columns=tuple(m.columns),
        lam=path.lam,
        train_rmse=rmse,
        removed_by_vif=tuple(m.columns[j] for j in removed),
        n_rows=X.shape[0],
        lasso_path=path,
    )
