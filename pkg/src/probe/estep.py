"""Empirical-Bayes two-groups E-step.

Turns the current coefficient estimates and their approximate posterior
variances into inclusion probabilities: t-type statistics, Storey's null
proportion, a Gaussian KDE of the statistic distribution, and a local-FDR
style posterior with a monotonicity constraint in |T|.
"""

from dataclasses import dataclass

import numpy as np

from .data import WMoments, make_wmoments
from .kernels import kde_at_points
from .special import normal_cdf, normal_pdf

# exact O(M^2) KDE below this size; linear-binned approximation above
KDE_EXACT_MAX = 20000
KDE_BINS = 1024


@dataclass
class EStepFit:
    t_stats: np.ndarray
    p_values: np.ndarray
    pi0_hat: float
    bandwidth: float
    f_hat: np.ndarray
    p: np.ndarray


def compute_tstats(beta: np.ndarray, s2: np.ndarray) -> np.ndarray:
    s2 = np.asarray(s2, dtype=np.float64)
    if np.any(s2 <= 0.0):
        raise ValueError("posterior variances must be positive")
    return np.asarray(beta, dtype=np.float64) / np.sqrt(s2)


def two_sided_p_values(t_stats: np.ndarray) -> np.ndarray:
    return 2.0 * (1.0 - normal_cdf(np.abs(t_stats)))


def storey_pi0(p_values: np.ndarray, lam: float) -> float:
    """Storey's plug-in null proportion, clamped to [1/M, 1]."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must be in (0, 1)")
    p_values = np.asarray(p_values)
    m = p_values.shape[0]
    raw = np.count_nonzero(p_values >= lam) / (m * (1.0 - lam))
    return float(min(max(raw, 1.0 / m), 1.0))


def silverman_bandwidth(t_stats: np.ndarray, multiplier: float) -> float:
    """Rule-of-thumb bandwidth scaled by a fixed multiplier.

    Degenerate spread (constant statistics) falls back to a small positive
    scale so the KDE stays well defined.
    """
    t = np.asarray(t_stats, dtype=np.float64)
    m = t.shape[0]
    if m < 2:
        raise ValueError("at least two statistics required")
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    sd = float(t.std(ddof=1))
    q75, q25 = np.percentile(t, [75.0, 25.0])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0.0:
        spread = max(sd, 1e-3)
    return multiplier * 0.9 * spread * m ** (-0.2)


def _kde_binned(t: np.ndarray, h: float) -> np.ndarray:
    lo, hi = t.min(), t.max()
    pad = 1e-9 * max(hi - lo, 1.0)
    grid = np.linspace(lo - pad, hi + pad, KDE_BINS)
    step = grid[1] - grid[0]
    # linear binning: split each point's mass between bracketing grid nodes
    idx = np.clip(((t - grid[0]) / step).astype(np.int64), 0, KDE_BINS - 2)
    frac = (t - grid[idx]) / step
    counts = np.bincount(idx, weights=1.0 - frac, minlength=KDE_BINS)
    counts += np.bincount(idx + 1, weights=frac, minlength=KDE_BINS)
    z = (grid[:, None] - grid[None, :]) / h
    dens_grid = (np.exp(-0.5 * z * z) @ counts) / (t.shape[0] * h * np.sqrt(2 * np.pi))
    return np.interp(t, grid, dens_grid)


def kde_marginal(t_stats: np.ndarray, h: float) -> np.ndarray:
    """Gaussian KDE of the statistics evaluated at every statistic (self-term kept)."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    t = np.asarray(t_stats, dtype=np.float64)
    if t.shape[0] > KDE_EXACT_MAX:
        return _kde_binned(t, h)
    return kde_at_points(t, h)


def local_fdr_probs(t_stats: np.ndarray, pi0: float, f_hat: np.ndarray) -> np.ndarray:
    """Inclusion probabilities 1 - pi0 phi(T)/f(T), monotone in |T|.

    The raw probabilities 1 - min(pi0 phi(T)/f(T), 1) are swept in
    ascending |T| order with a running maximum, so inclusion never
    decreases as the statistic moves away from zero; tied |T| share the
    same value.
    """
    f_hat = np.asarray(f_hat, dtype=np.float64)
    if np.any(f_hat <= 0.0):
        raise ValueError("marginal density must be positive")
    raw = 1.0 - np.minimum(pi0 * normal_pdf(t_stats) / f_hat, 1.0)
    abs_t = np.abs(np.asarray(t_stats, dtype=np.float64))
    order = np.argsort(abs_t, kind="stable")
    p = np.empty_like(raw)
    running = 0.0
    m = raw.shape[0]
    i = 0
    while i < m:
        j = i
        while j < m and abs_t[order[j]] == abs_t[order[i]]:
            j += 1
        group = order[i:j]
        running = max(running, float(raw[group].max()))
        p[group] = running
        i = j
    return p


def compute_w_moments(x: np.ndarray, beta: np.ndarray, p: np.ndarray,
                      x_sq: np.ndarray = None) -> WMoments:
    """Full-sum moments of the latent predictor: one matrix product each.

    ``x_sq`` takes a precomputed elementwise square of ``x``; callers in the
    iteration loops pass it to avoid re-materializing the square every pass.
    """
    pb = p * beta
    w = x @ pb
    if x_sq is None:
        x_sq = x * x
    v = x_sq @ (beta * beta * p * (1.0 - p))
    return make_wmoments(w, v)


def run_estep(beta: np.ndarray, s2: np.ndarray, storey_lambda: float,
              bandwidth_multiplier: float) -> EStepFit:
    """Full E-step pipeline from (beta, S^2) to inclusion probabilities."""
    t = compute_tstats(beta, s2)
    pvals = two_sided_p_values(t)
    pi0 = storey_pi0(pvals, storey_lambda)
    h = silverman_bandwidth(t, bandwidth_multiplier)
    f_hat = kde_marginal(t, h)
    p = local_fdr_probs(t, pi0, f_hat)
    return EStepFit(t_stats=t, p_values=pvals, pi0_hat=pi0, bandwidth=h,
                    f_hat=f_hat, p=p)
