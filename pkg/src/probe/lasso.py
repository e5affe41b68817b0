"""In-repo lasso with cross-validated lambda path, plus ridge and a
one-step adaptive lasso.

Used both to initialize/order the one-at-a-time solver and as the
benchmark baselines. Coordinate descent runs on internally standardized
columns; returned coefficients are on the original predictor scale.
"""

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .kernels import lasso_cd_path

LAMBDA_MIN_RATIO = 1e-3
CD_TOL = 1e-7


@dataclass
class LassoFit:
    lambda_path: np.ndarray
    coef_path: np.ndarray        # original scale, M x L
    best_lambda: float
    best_coefs: np.ndarray       # original scale
    best_coefs_std: np.ndarray   # standardized scale, used for update ordering
    cv_mse: np.ndarray


def _standardize(data: Dataset):
    scale = np.sqrt(data.col_sq_norms / data.n)
    return data.x / scale, scale


def cv_fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic fold assignment from (n, folds, seed)."""
    rng = np.random.default_rng(seed)
    ids = np.empty(n, dtype=np.int64)
    ids[rng.permutation(n)] = np.arange(n) % folds
    return ids


def _cv_path_mse(xs, y, lams, folds, seed):
    n = y.shape[0]
    ids = cv_fold_ids(n, folds, seed)
    sse = np.zeros(lams.shape[0])
    for k in range(folds):
        te = ids == k
        tr = ~te
        if te.sum() < 1 or tr.sum() < 2:
            raise ValueError(f"fold {k} too small for cross-validation")
        x_tr = xs[tr]
        mu_x = x_tr.mean(axis=0)
        mu_y = y[tr].mean()
        x_tr = x_tr - mu_x
        csn = np.maximum(np.einsum("ij,ij->j", x_tr, x_tr), 1e-12)
        coefs = lasso_cd_path(x_tr, y[tr] - mu_y, csn, lams, tol=CD_TOL)
        pred = mu_y + (xs[te] - mu_x) @ coefs
        sse += ((y[te, None] - pred) ** 2).sum(axis=0)
    return sse / n


def lasso_path(data: Dataset, n_lambda: int = 100, folds: int = 10,
               seed: int = 0) -> LassoFit:
    """Lasso over a descending log-spaced lambda path with K-fold CV."""
    xs, scale = _standardize(data)
    y = data.y
    n = data.n
    lam_max = float(np.abs(xs.T @ y).max()) / n
    lams = np.geomspace(lam_max, lam_max * LAMBDA_MIN_RATIO, n_lambda)
    csn = np.full(data.m_count, float(n))
    coef_path_std = lasso_cd_path(xs, y, csn, lams, tol=CD_TOL)
    cv_mse = _cv_path_mse(xs, y, lams, folds, seed)
    best = int(np.argmin(cv_mse))
    best_std = coef_path_std[:, best].copy()
    return LassoFit(
        lambda_path=lams,
        coef_path=coef_path_std / scale[:, None],
        best_lambda=float(lams[best]),
        best_coefs=best_std / scale,
        best_coefs_std=best_std,
        cv_mse=cv_mse,
    )


def ordering_from_coefs(coefs: np.ndarray) -> np.ndarray:
    """Indices sorted by |coef| descending, ties broken by ascending index."""
    coefs = np.asarray(coefs)
    return np.lexsort((np.arange(coefs.shape[0]), -np.abs(coefs)))


def _ridge_dual_coefs(xs, y, lam):
    """Ridge solution via the n x n dual system (M >> n)."""
    n = xs.shape[0]
    k = xs @ xs.T
    a = k + lam * np.eye(n)
    try:
        alpha = np.linalg.solve(a, y)
    except np.linalg.LinAlgError:
        alpha = np.linalg.solve(a + 1e-8 * np.eye(n), y)
    return xs.T @ alpha


def ridge_fit(data: Dataset, lambda_grid=None, folds: int = 10,
              seed: int = 0) -> np.ndarray:
    """CV ridge regression; returns coefficients on the original scale."""
    xs, scale = _standardize(data)
    y = data.y
    n = data.n
    if lambda_grid is None:
        # dual eigenvalues average around M for unit-variance columns
        lambda_grid = data.m_count * np.geomspace(1e-4, 1e2, 30)
    ids = cv_fold_ids(n, folds, seed)
    sse = np.zeros(len(lambda_grid))
    for k in range(folds):
        te = ids == k
        tr = ~te
        x_tr = xs[tr]
        mu_x = x_tr.mean(axis=0)
        mu_y = y[tr].mean()
        x_tr = x_tr - mu_x
        gram = x_tr @ x_tr.T
        y_c = y[tr] - mu_y
        k_te = (xs[te] - mu_x) @ x_tr.T
        vals, vecs = np.linalg.eigh(gram)
        proj = vecs.T @ y_c
        for li, lam in enumerate(lambda_grid):
            alpha = vecs @ (proj / np.maximum(vals + lam, 1e-10))
            pred = mu_y + k_te @ alpha
            sse[li] += ((y[te] - pred) ** 2).sum()
    best_lam = float(lambda_grid[int(np.argmin(sse))])
    coefs_std = _ridge_dual_coefs(xs, y, best_lam)
    return coefs_std / scale


def adaptive_lasso(data: Dataset, folds: int = 10, seed: int = 0,
                   n_lambda: int = 100) -> np.ndarray:
    """One-step adaptive lasso with ridge-based penalty weights."""
    xs, scale = _standardize(data)
    ridge_std = np.abs(ridge_fit(data, folds=folds, seed=seed) * scale)
    ridge_std = np.maximum(ridge_std, 1e-8)
    xw = xs * ridge_std
    y = data.y
    n = data.n
    lam_max = float(np.abs(xw.T @ y).max()) / n
    lams = np.geomspace(lam_max, lam_max * LAMBDA_MIN_RATIO, n_lambda)
    csn = np.maximum(np.einsum("ij,ij->j", xw, xw), 1e-12)
    coef_path = lasso_cd_path(xw, y, csn, lams, tol=CD_TOL)
    cv_mse = _cv_path_mse(xw, y, lams, folds, seed)
    best = int(np.argmin(cv_mse))
    return coef_path[:, best] * ridge_std / scale
