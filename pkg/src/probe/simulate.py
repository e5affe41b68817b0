"""Synthetic data generator: spatially structured sparse regression.

Predictors live on a square integer grid. Both the sparsity pattern and
the predictor rows are Gaussian random fields with squared-exponential
covariance, so signals arrive in spatial clusters and nearby columns are
correlated.
"""

import math
from dataclasses import dataclass
from enum import Enum
from threading import Lock
from typing import Dict, Tuple

import numpy as np

from .data import Dataset, prepare_dataset

JITTER_START = 1e-8
JITTER_MAX = 1e-4


class PredictorType(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class SimSpec:
    m_total: int
    pi_frac: float
    eta: float
    snr: float
    predictor_type: PredictorType = PredictorType.CONTINUOUS
    n: int = 400
    s0_gamma: float = 20.0
    s0_x: float = 10.0
    a_var: float = 0.75
    seed: int = 0

    def __post_init__(self):
        side = math.isqrt(self.m_total)
        if side * side != self.m_total:
            raise ValueError("m_total must be a perfect square")
        if not 0.0 < self.pi_frac < 1.0:
            raise ValueError("pi_frac must be in (0, 1)")
        if self.eta <= 0 or self.snr <= 0:
            raise ValueError("eta and snr must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def grid_side(self) -> int:
        return math.isqrt(self.m_total)

    @property
    def m1(self) -> int:
        return int(round(self.pi_frac * self.m_total))


@dataclass(frozen=True)
class SimTruth:
    gamma: np.ndarray
    beta: np.ndarray
    sigma2: float
    signal: np.ndarray


_chol_cache: Dict[Tuple[int, float], np.ndarray] = {}
_chol_lock = Lock()


def _grf_factor(grid_side: int, s0: float) -> np.ndarray:
    """Cholesky factor of the squared-exponential grid covariance, cached."""
    key = (grid_side, float(s0))
    with _chol_lock:
        cached = _chol_cache.get(key)
    if cached is not None:
        return cached
    coords = np.stack(np.meshgrid(np.arange(grid_side), np.arange(grid_side),
                                  indexing="ij"), axis=-1).reshape(-1, 2)
    diff = coords[:, None, :] - coords[None, :, :]
    cov = np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / (s0 * s0))
    jitter = JITTER_START
    m = cov.shape[0]
    while True:
        try:
            factor = np.linalg.cholesky(cov + jitter * np.eye(m))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX:
                raise ValueError(
                    f"covariance not positive definite at jitter {JITTER_MAX}")
    with _chol_lock:
        _chol_cache[key] = factor
    return factor


def grf_sample(grid_side: int, s0: float, rng: np.random.Generator,
               size: int = 1) -> np.ndarray:
    """Zero-mean field draws over the grid; rows are independent samples."""
    if grid_side * grid_side > 4096:
        raise ValueError("dense sampling supports at most 4096 grid points")
    factor = _grf_factor(grid_side, s0)
    m = grid_side * grid_side
    z = rng.standard_normal((size, m))
    out = z @ factor.T
    return out[0] if size == 1 else out


def gen_gamma(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    """Sparsity pattern: the m1 smallest values of one smooth field.

    Order-statistic thresholding keeps the active count exact; ties break
    toward the lower index.
    """
    field = grf_sample(spec.grid_side, spec.s0_gamma, rng)
    active = np.argsort(field, kind="stable")[:spec.m1]
    gamma = np.zeros(spec.m_total, dtype=np.int64)
    gamma[active] = 1
    return gamma


def gen_x(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    """Predictor matrix: independent field rows plus a per-row normal shift."""
    fields = grf_sample(spec.grid_side, spec.s0_x, rng, size=spec.n)
    a = rng.normal(0.0, math.sqrt(spec.a_var), size=spec.n)
    x = fields + a[:, None]
    if spec.predictor_type == PredictorType.BINARY:
        return (x < 0.0).astype(np.float64)
    return x


def gen_dataset(spec: SimSpec) -> Tuple[Dataset, SimTruth]:
    """Full generator: gamma, X, beta ~ U(0, 2 eta), noise calibrated to SNR.

    Draw order is fixed (gamma, X, beta, noise) so seeds reproduce bitwise.
    """
    rng = np.random.default_rng(spec.seed)
    gamma = gen_gamma(spec, rng)
    x = gen_x(spec, rng)
    beta = rng.uniform(0.0, 2.0 * spec.eta, size=spec.m_total)
    signal = x @ (gamma * beta)
    sig_var = float(signal.var(ddof=1))
    if sig_var <= 0.0:
        raise ValueError("signal has zero variance; cannot calibrate noise")
    sigma2 = sig_var / spec.snr
    y = signal + rng.normal(0.0, math.sqrt(sigma2), size=spec.n)
    data = prepare_dataset(y, x)
    return data, SimTruth(gamma=gamma, beta=beta, sigma2=sigma2, signal=signal)
