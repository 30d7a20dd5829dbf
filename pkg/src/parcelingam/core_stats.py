"""Centering, covariance and least-squares residual operators.

All operators take variables as rows (``d x n``) and use unbiased
(``n - 1``) sample moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateVariance, SingularCovariance

VARIANCE_TOL = 1e-12
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class DataMatrix:
    """Observations with variables as rows and samples as columns.

    ``variable_ids`` are stable integer labels that survive subsetting, so
    anything computed on a sub-matrix still refers to the original
    variables.
    """

    values: np.ndarray
    variable_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array (variables x samples)")
        ids = tuple(int(i) for i in self.variable_ids)
        if len(ids) != values.shape[0]:
            raise ValueError(
                f"{len(ids)} variable ids for {values.shape[0]} rows"
            )
        if len(set(ids)) != len(ids):
            raise ValueError("variable ids must be distinct")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_ids", ids)

    @classmethod
    def from_array(cls, values, variable_ids: Sequence[int] | None = None):
        values = np.asarray(values, dtype=float)
        if variable_ids is None:
            variable_ids = range(values.shape[0])
        return cls(values, tuple(variable_ids))

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def index_of(self, var_id: int) -> int:
        return self.variable_ids.index(var_id)

    def row(self, var_id: int) -> np.ndarray:
        return self.values[self.index_of(var_id)]

    def subset(self, ids: Sequence[int]) -> "DataMatrix":
        idx = [self.index_of(i) for i in ids]
        return DataMatrix(self.values[idx], tuple(ids))

    def with_values(self, values: np.ndarray) -> "DataMatrix":
        return DataMatrix(values, self.variable_ids)


def center(X: DataMatrix) -> DataMatrix:
    """Subtract each row's sample mean."""
    values = X.values - X.values.mean(axis=1, keepdims=True)
    return X.with_values(values)


def covariance(X: np.ndarray) -> np.ndarray:
    """Unbiased covariance of the rows of ``X``."""
    X = np.atleast_2d(X)
    Xc = X - X.mean(axis=1, keepdims=True)
    return Xc @ Xc.T / (X.shape[1] - 1)


def _regression_coefficient(x_i, x_j, tol):
    xi = x_i - x_i.mean()
    xj = x_j - x_j.mean()
    n = xj.shape[-1]
    var_j = xj @ xj / (n - 1)
    if var_j <= tol:
        raise DegenerateVariance(f"regressor variance {var_j:.3g} <= {tol:g}")
    return (xi @ xj / (n - 1)) / var_j


def simple_residual(x_i, x_j, tol: float = VARIANCE_TOL) -> np.ndarray:
    """Residual of ``x_i`` after simple regression on ``x_j``.

    ``r = x_i - cov(x_i, x_j) / var(x_j) * x_j``
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise ValueError("x_i and x_j must have the same length")
    return x_i - _regression_coefficient(x_i, x_j, tol) * x_j


def residual_matrix(X: np.ndarray, j: int, tol: float = VARIANCE_TOL) -> np.ndarray:
    """Simple-regression residuals of every row except ``j`` on row ``j``.

    Returns a ``(d - 1) x n`` array whose rows keep the original row order
    with row ``j`` removed.
    """
    X = np.asarray(X, dtype=float)
    x_j = X[j]
    others = np.delete(X, j, axis=0)
    # Row by row so each residual depends only on its own two inputs.
    out = np.empty_like(others)
    for k, row in enumerate(others):
        out[k] = row - _regression_coefficient(row, x_j, tol) * x_j
    return out


def _solve_least_squares(y, regressors, tol, condition_limit):
    # QR on the centered design; cond(Sigma) = cond(design)^2.
    A = regressors - regressors.mean(axis=1, keepdims=True)
    n = A.shape[1]
    if A.shape[0] >= n:
        raise SingularCovariance(
            f"{A.shape[0]} regressors need more than {n} samples"
        )
    variances = np.einsum("ij,ij->i", A, A) / (n - 1)
    if np.any(variances <= tol):
        raise DegenerateVariance("a regressor has (near) zero variance")
    Q, R = np.linalg.qr(A.T)
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 >= condition_limit:
        raise SingularCovariance("regressor covariance is ill-conditioned")
    yc = y - y.mean(axis=-1, keepdims=True)
    return np.linalg.solve(R, Q.T @ yc.T).T


def regression_coefficients(
    y,
    regressors,
    tol: float = VARIANCE_TOL,
    condition_limit: float = CONDITION_LIMIT,
) -> np.ndarray:
    """Least-squares coefficients of ``y`` on the rows of ``regressors``.

    ``y`` may be a vector or a matrix of several targets (rows); the result
    then has one coefficient row per target.
    """
    y = np.asarray(y, dtype=float)
    regressors = np.atleast_2d(np.asarray(regressors, dtype=float))
    return _solve_least_squares(y, regressors, tol, condition_limit)


def multiple_residual(
    x_j,
    X_rest,
    tol: float = VARIANCE_TOL,
    condition_limit: float = CONDITION_LIMIT,
) -> np.ndarray:
    """Residual of ``x_j`` after multiple regression on the rows of ``X_rest``.

    Equivalent to ``x_j - sigma^T Sigma^{-1} x_rest`` but solved through a
    QR decomposition rather than by inverting ``Sigma``. ``X_rest`` may be a
    :class:`DataMatrix` or a plain array.

    Raises:
        SingularCovariance: if the regressor covariance has condition number
            at or above ``condition_limit`` (collinear regressors).
        DegenerateVariance: if some regressor is constant.
    """
    x_j = np.asarray(x_j, dtype=float)
    rest = X_rest.values if isinstance(X_rest, DataMatrix) else X_rest
    rest = np.atleast_2d(np.asarray(rest, dtype=float))
    if rest.shape[0] == 0:
        return x_j.copy()
    beta = _solve_least_squares(x_j, rest, tol, condition_limit)
    return x_j - beta @ rest


def residualize_rows(
    Y,
    regressors,
    tol: float = VARIANCE_TOL,
    condition_limit: float = CONDITION_LIMIT,
) -> np.ndarray:
    """Multiple-regression residuals of each row of ``Y`` on ``regressors``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    regressors = np.atleast_2d(np.asarray(regressors, dtype=float))
    if regressors.shape[0] == 0:
        return Y.copy()
    beta = _solve_least_squares(Y, regressors, tol, condition_limit)
    return Y - beta @ regressors
