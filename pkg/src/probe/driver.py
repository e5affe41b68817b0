"""Fitting loops for both solver variants.

One-at-a-time: lasso-ordered sequential coordinate sweeps (Gauss-Seidel
style). All-at-once: simultaneous leave-one-out coordinate solves (Jacobi
style). Both share the damped update schedule, the empirical-Bayes E-step,
and the max-standardized-change convergence statistic.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import (Dataset, FitConfig, FitResult, ProbeState, Variant,
                   WMoments, make_wmoments)
from .estep import compute_w_moments, run_estep
from .kernels import DET_GUARD, NO_SIGNAL_TOL, S2_FLOOR, oaat_sweep
from .lasso import lasso_path, ordering_from_coefs
from .mstep import update_alpha_aao, update_sigma2_aao
from .special import chisq1_quantile

V_FLOOR_REL = 1e-10


@dataclass
class ConvergenceRecord:
    t: int
    cc: float
    sigma2: float
    sum_p: float
    q: float


def learning_rate(t: int, exponent: float) -> float:
    """Step-size schedule (t+1)^(-exponent); t counts completed iterations."""
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    return float(t + 1) ** (-exponent)


def damp(prev_beta, new_beta, prev_s2, new_s2, q: float):
    """Convex mix for coefficients, precision-weighted mix for variances."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    beta = (1.0 - q) * prev_beta + q * new_beta
    s2 = 1.0 / ((1.0 - q) / prev_s2 + q / new_s2)
    return beta, s2


def convergence_stat(w_curr, w_prev, v_prev, n: int, v_floor: float) -> float:
    """log(n) times the largest squared standardized change in the latent fit."""
    delta = w_curr - w_prev
    denom = np.maximum(v_prev, v_floor)
    return float(np.log(n) * np.max(delta * delta / denom))


def _check_finite(arr: np.ndarray, t: int):
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"non-finite estimate at iteration {t + 1}, coordinate {bad}")


def finalize(state: ProbeState, data: Dataset, trace, variant: Variant,
             converged: bool, restarted: bool = False,
             null_model: bool = False) -> FitResult:
    """Assemble MAP estimates and posterior inverse-Gamma parameters.

    The simultaneous variant iterates in the expanded parameterization,
    where the latent fit matches the outcome only up to the expansion
    factor; the stored factor maps the coefficients and latent moments
    back to the identity scale here. The sequential variant remaps during
    its sweeps and carries factor 1.
    """
    a = state.alpha
    w = a * state.moments.w
    w2_sum = float(a * a * state.moments.v.sum() + w @ w)
    ig_b = float(data.y @ data.y) - 2.0 * float(data.y @ w) + w2_sum
    return FitResult(
        beta_map=a * state.beta,
        p_map=state.p,
        beta_bar=state.p * (a * state.beta),
        sigma2_map=state.sigma2,
        ig_a=data.n / 2.0,
        ig_b=ig_b,
        iterations=state.t,
        converged=converged,
        trace=list(trace),
        variant=variant,
        restarted=restarted,
        null_model=null_model,
        y_mean=data.y_mean,
        x_means=data.col_means,
    )


def fit_one_at_a_time(data: Dataset, config: Optional[FitConfig] = None,
                      order: Union[None, str, np.ndarray] = None) -> FitResult:
    """Sequential-sweep fit, initialized and ordered by the CV lasso.

    ``order`` overrides the lasso update order: "random" draws a seeded
    permutation, an integer array is used as-is.
    """
    if config is None:
        config = FitConfig(variant=Variant.ONE_AT_A_TIME)
    eps = config.epsilon if config.epsilon is not None else 1e-1
    lr_exp = config.lr_exponent if config.lr_exponent is not None else 0.5

    y = data.y
    n, m_count = data.n, data.m_count
    lasso_fit = lasso_path(data, folds=config.cv_folds, seed=config.seed)
    if order is None or (isinstance(order, str) and order == "lasso"):
        perm = ordering_from_coefs(lasso_fit.best_coefs_std)
    elif isinstance(order, str) and order == "random":
        perm = np.random.default_rng(config.seed).permutation(m_count)
    else:
        perm = np.asarray(order, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(m_count)):
            raise ValueError("order must be a permutation of 0..M-1")

    xo = np.asfortranarray(data.x[:, perm])
    xo_sq = xo * xo
    csn_o = np.ascontiguousarray(data.col_sq_norms[perm])
    beta = lasso_fit.best_coefs[perm].copy()
    p = np.ones(m_count)
    s2y = float(y.var(ddof=1))
    sigma2 = s2y
    v_floor = V_FLOOR_REL * s2y
    threshold = chisq1_quantile(eps)
    moments = compute_w_moments(xo, beta, p)
    s2 = None
    trace = []
    converged = False
    iterations = 0

    for t in range(config.max_iter):
        q = 1.0 if t == 0 else learning_rate(t, lr_exp)
        beta_hat, s2_hat, b_p = oaat_sweep(xo, y, csn_o, beta, p, sigma2,
                                           moments.w, moments.v)
        _check_finite(beta_hat, t)
        sigma2 = max(2.0 * b_p / (n - 1), 1e-12)
        if s2 is None or q >= 1.0:
            beta, s2 = beta_hat, s2_hat
        else:
            beta, s2 = damp(beta, beta_hat, s2, s2_hat, q)
        ef = run_estep(beta, s2, config.storey_lambda, config.bandwidth_multiplier)
        p = ef.p
        w_prev, v_prev = moments.w, moments.v
        moments = compute_w_moments(xo, beta, p, xo_sq)
        cc = convergence_stat(moments.w, w_prev, v_prev, n, v_floor)
        iterations = t + 1
        trace.append(ConvergenceRecord(iterations, cc, sigma2, float(p.sum()), q))
        if cc < threshold or p.max() == 0.0:
            converged = True
            break

    inv = np.empty(m_count, dtype=np.int64)
    inv[perm] = np.arange(m_count)
    state = ProbeState(beta=beta[inv], p=p[inv], s2=s2[inv], sigma2=sigma2,
                       alpha=1.0, t=iterations, moments=moments)
    return finalize(state, data, trace, Variant.ONE_AT_A_TIME, converged)


def fit_all_at_once(data: Dataset, config: Optional[FitConfig] = None,
                    init_scale: Optional[float] = None) -> FitResult:
    """Simultaneous-update fit from the null initialization.

    ``init_scale`` starts instead from beta = b*1, p = 1 (the alternative
    initialization; the expansion parameter makes results invariant to b).
    If all inclusion probabilities collapse to zero the fit restarts once
    with that alternative; a second collapse returns the null model.
    """
    if config is None:
        config = FitConfig(variant=Variant.ALL_AT_ONCE)
    eps = config.epsilon if config.epsilon is not None else 1e-3
    lr_exp = config.lr_exponent if config.lr_exponent is not None else 1.0

    x = data.x
    y = data.y
    n, m_count = data.n, data.m_count
    csn = data.col_sq_norms
    xty = x.T @ y
    s2y = float(y.var(ddof=1))
    v_floor = V_FLOOR_REL * s2y
    threshold = chisq1_quantile(eps)

    x_sq = x * x

    def init(scale):
        if scale is None:
            b0 = np.zeros(m_count)
            p0 = np.zeros(m_count)
        else:
            b0 = np.full(m_count, float(scale))
            p0 = np.ones(m_count)
        return b0, p0, compute_w_moments(x, b0, p0, x_sq)

    beta, p, moments = init(init_scale)
    sigma2 = s2y
    s2 = None
    restarted = False
    null_model = False
    steps_since_init = 0
    trace = []
    converged = False
    iterations = 0

    for t in range(config.max_iter):
        q = 1.0 if steps_since_init == 0 else learning_rate(steps_since_init, lr_exp)
        # the global expansion parameter enters only the sigma^2 update; the
        # per-coordinate solves are scale-invariant in the latent fit, so the
        # coefficients themselves are never rescaled between iterations
        alpha = update_alpha_aao(y, moments)
        sigma2 = update_sigma2_aao(y, moments, alpha, n)
        xtw = x.T @ moments.w
        wty = float(moments.w @ y)
        sum_v = float(moments.v.sum())
        wn2 = float(moments.w @ moments.w)
        pb = p * beta
        # leave-one-out cross products, all O(M) after two matrix products
        sxw = xtw - csn * pb
        swy = wty - pb * xty
        sum_v_m = sum_v - beta * beta * p * (1.0 - p) * csn
        wn2_m = wn2 - 2.0 * pb * xtw + pb * pb * csn
        sww2 = np.maximum(sum_v_m + wn2_m, 0.0)
        det = csn * sww2 - sxw * sxw  # each coordinate solved as if included
        ok = (sww2 >= NO_SIGNAL_TOL) & (np.abs(det) >= DET_GUARD * csn * sww2)
        det_safe = np.where(ok, det, 1.0)
        beta_hat = np.where(ok, (sww2 * xty - sxw * swy) / det_safe, xty / csn)
        s2_hat = np.maximum(np.where(ok, sigma2 * sww2 / det_safe, sigma2 / csn),
                            S2_FLOOR * sigma2 / csn)
        _check_finite(beta_hat, t)

        if s2 is None or q >= 1.0:
            beta, s2 = beta_hat, s2_hat
        else:
            beta, s2 = damp(beta, beta_hat, s2, s2_hat, q)
        ef = run_estep(beta, s2, config.storey_lambda, config.bandwidth_multiplier)
        p = ef.p
        w_prev, v_prev = moments.w, moments.v
        moments = compute_w_moments(x, beta, p, x_sq)
        cc = convergence_stat(moments.w, w_prev, v_prev, n, v_floor)
        iterations = t + 1
        steps_since_init += 1
        trace.append(ConvergenceRecord(iterations, cc, sigma2, float(p.sum()), q))

        if p.max() == 0.0:
            if not restarted:
                restarted = True
                beta, p, moments = init(1.0)
                sigma2 = s2y
                s2 = None
                steps_since_init = 0
                continue
            null_model = True
            beta = np.zeros(m_count)
            p = np.zeros(m_count)
            s2 = np.full(m_count, np.maximum(sigma2, 1e-12))
            sigma2 = float(y @ y) / (n - 1)
            moments = make_wmoments(np.zeros(n), np.zeros(n))
            converged = True
            break
        if cc < threshold:
            converged = True
            break

    alpha_final = update_alpha_aao(y, moments)
    state = ProbeState(beta=beta, p=p, s2=s2, sigma2=sigma2, alpha=alpha_final,
                       t=iterations, moments=moments)
    return finalize(state, data, trace, Variant.ALL_AT_ONCE, converged,
                    restarted=restarted, null_model=null_model)


def fit(data: Dataset, config: Optional[FitConfig] = None, **kwargs) -> FitResult:
    """Dispatch on the configured variant."""
    if config is None:
        config = FitConfig()
    if config.variant == Variant.ONE_AT_A_TIME:
        return fit_one_at_a_time(data, config, **kwargs)
    return fit_all_at_once(data, config, **kwargs)


def predict(result: FitResult, x_new: np.ndarray) -> np.ndarray:
    """Predict raw-scale outcomes from raw-scale predictors."""
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.ndim != 2 or x_new.shape[1] != result.beta_bar.shape[0]:
        raise ValueError(
            f"x_new must have {result.beta_bar.shape[0]} columns, got shape {x_new.shape}"
        )
    return result.y_mean + (x_new - result.x_means) @ result.beta_bar
