"""Core data types and dataset preparation.

The solvers assume the outcome and every predictor column have mean zero;
`prepare_dataset` enforces that once at ingestion and caches the column
squared norms used throughout the coordinate updates.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

# relative tolerance for the "column is constant" rejection
CONSTANT_COL_TOL = 1e-12

# variance entries in [-V_CLAMP_TOL, 0) are rounding noise and clamped to 0
V_CLAMP_TOL = 1e-12


class Variant(str, Enum):
    ONE_AT_A_TIME = "one_at_a_time"
    ALL_AT_ONCE = "all_at_once"


@dataclass(frozen=True)
class Dataset:
    """Centered regression data with cached per-column squared norms."""

    y: np.ndarray
    x: np.ndarray
    col_sq_norms: np.ndarray
    n: int
    m_count: int
    y_mean: float
    col_means: np.ndarray


@dataclass
class WMoments:
    """First moment and variance of the latent linear predictor.

    The second moment is reconstructed as ``v + w**2`` elementwise.
    """

    w: np.ndarray
    v: np.ndarray


@dataclass
class ProbeState:
    """Per-iteration parameter snapshot."""

    beta: np.ndarray
    p: np.ndarray
    s2: np.ndarray
    sigma2: float
    alpha: float
    t: int
    moments: WMoments


@dataclass(frozen=True)
class FitConfig:
    """Fit options; ``epsilon``/``lr_exponent`` default per variant."""

    variant: Variant = Variant.ALL_AT_ONCE
    epsilon: Optional[float] = None
    lr_exponent: Optional[float] = None
    storey_lambda: float = 0.1
    bandwidth_multiplier: float = 5.0
    max_iter: int = 1000
    seed: int = 0
    cv_folds: int = 10

    def __post_init__(self):
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if self.lr_exponent is not None and self.lr_exponent <= 0:
            raise ValueError("lr_exponent must be positive")
        if not 0.0 < self.storey_lambda < 1.0:
            raise ValueError("storey_lambda must be in (0, 1)")
        if self.bandwidth_multiplier <= 0:
            raise ValueError("bandwidth_multiplier must be positive")
        if self.max_iter < 1 or self.cv_folds < 1:
            raise ValueError("max_iter and cv_folds must be positive")

    @property
    def epsilon_resolved(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return 1e-3 if self.variant == Variant.ALL_AT_ONCE else 1e-1

    @property
    def lr_exponent_resolved(self) -> float:
        if self.lr_exponent is not None:
            return self.lr_exponent
        return 1.0 if self.variant == Variant.ALL_AT_ONCE else 0.5


@dataclass
class FitResult:
    """MAP estimates, posterior inverse-Gamma parameters, convergence trace."""

    beta_map: np.ndarray
    p_map: np.ndarray
    beta_bar: np.ndarray
    sigma2_map: float
    ig_a: float
    ig_b: float
    iterations: int
    converged: bool
    trace: list
    variant: Variant = Variant.ALL_AT_ONCE
    restarted: bool = False
    null_model: bool = False
    # centering offsets so predictions work on raw (uncentered) inputs
    y_mean: float = 0.0
    x_means: Optional[np.ndarray] = None


def _as_float_array(a, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def prepare_dataset(raw_y: Sequence[float], raw_x) -> "Dataset":
    """Center outcome and predictors, cache column norms, validate.

    Columns that are constant (squared norm below ``1e-12 * n`` after
    centering) are a hard error: silently dropping them would remap
    coefficient indices downstream.
    """
    y = _as_float_array(raw_y, "y", 1)
    x = _as_float_array(raw_x, "x", 2)
    n = y.shape[0]
    if x.shape[0] != n:
        raise ValueError(f"x has {x.shape[0]} rows but y has {n} entries")
    if n < 2:
        raise ValueError("at least 2 observations are required")
    if x.shape[1] < 1:
        raise ValueError("at least one predictor column is required")

    y_mean = float(y.mean())
    col_means = x.mean(axis=0)
    yc = y - y_mean
    xc = x - col_means
    col_sq_norms = np.einsum("ij,ij->j", xc, xc)

    constant = np.flatnonzero(col_sq_norms < CONSTANT_COL_TOL * n)
    if constant.size:
        raise ValueError(
            f"constant column(s) at index {constant.tolist()}: zero variance after centering"
        )
    return Dataset(
        y=yc,
        x=xc,
        col_sq_norms=col_sq_norms,
        n=n,
        m_count=x.shape[1],
        y_mean=y_mean,
        col_means=col_means,
    )


def clamp_variance(v: np.ndarray) -> np.ndarray:
    """Zero out tiny negative variance entries caused by rounding.

    Entries below ``-V_CLAMP_TOL`` signal real drift and raise.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < -V_CLAMP_TOL):
        raise ValueError("variance entries below clamping tolerance")
    return np.where(v < 0.0, 0.0, v)


def make_wmoments(w, v) -> WMoments:
    return WMoments(w=np.asarray(w, dtype=np.float64), v=clamp_variance(v))


def reconstruct_w2(moments: WMoments) -> np.ndarray:
    """Second moment of the latent predictor: ``v + w**2`` elementwise."""
    return moments.v + moments.w * moments.w
