"""Approximate posterior variances of the regression coefficients.

Combines the complete-data 2x2 variance with first-order Taylor
sensitivities to the uncertainty in both latent-predictor partitions.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .kernels import DET_GUARD, NO_SIGNAL_TOL, S2_FLOOR


@dataclass(frozen=True)
class PostVarInput:
    x_col: np.ndarray
    y_resid: np.ndarray
    w_plus: np.ndarray
    w_plus2_sum: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    p_m: float
    sigma2: float
    beta_m: float

    def x_sq_norm(self) -> float:
        return float(self.x_col @ self.x_col)


def complete_data_var(inp: PostVarInput) -> float:
    """(1,1) element of sigma^2 times the inverse 2x2 information matrix."""
    sxx = inp.x_sq_norm()
    sww2 = float(inp.w_plus2_sum)
    sxw = float(inp.x_col @ inp.w_plus)
    det = sxx * sww2 - sxw * sxw
    if sww2 < NO_SIGNAL_TOL or det < DET_GUARD * sxx * sww2:
        return inp.sigma2 / sxx
    return inp.sigma2 * sww2 / det


def taylor_sensitivities(inp: PostVarInput) -> Tuple[np.ndarray, np.ndarray]:
    """Derivatives of the coordinate argmax w.r.t. each latent partition entry.

    Returns zero vectors when the denominator H is below the relative guard
    (no signal left in the plus partition, where the correction is negligible).
    """
    sxx = inp.x_sq_norm()
    sxw = float(inp.x_col @ inp.w_plus)
    swy = float(inp.w_plus @ inp.y_resid)
    sxy = float(inp.x_col @ inp.y_resid)
    sw2 = float(inp.w_plus @ inp.w_plus)
    h_mat = sxx * sw2 - inp.p_m * sxw * sxw
    # an all-but-vanished plus partition (rounding residue) would make the
    # relative guard trivially satisfiable while H itself is garbage
    if sw2 < NO_SIGNAL_TOL or abs(h_mat) <= DET_GUARD * sxx * sw2:
        n = inp.x_col.shape[0]
        return np.zeros(n), np.zeros(n)
    h_vec = 2.0 * (inp.w_plus * sxx - inp.p_m * inp.x_col * sxw)
    b_plus = (2.0 * inp.w_plus * sxy - inp.y_resid * sxw - inp.x_col * swy
              - h_vec * inp.beta_m) / h_mat
    b_minus = (inp.x_col * inp.w_plus2_sum - inp.w_plus * sxw) / h_mat
    return b_plus, b_minus


def posterior_variance(inp: PostVarInput) -> float:
    """Complete-data variance plus squared-sensitivity-weighted partition variances."""
    b_plus, b_minus = taylor_sensitivities(inp)
    s2 = (complete_data_var(inp)
          + float(b_plus ** 2 @ inp.v_plus)
          + float(b_minus ** 2 @ inp.v_minus))
    return max(s2, S2_FLOOR * inp.sigma2 / inp.x_sq_norm())
