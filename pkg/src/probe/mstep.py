"""Closed-form PX-CM-step solvers and the expected-Q evaluator.

These are the reference implementations of the per-coordinate math; the
fused sweep in :mod:`probe.kernels` must agree with compositions of these
functions (covered by tests).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import WMoments
from .kernels import DET_GUARD, NO_SIGNAL_TOL, P_LIMIT_TOL

SIGMA2_FLOOR = 1e-12


class SolveBranch(Enum):
    REGULAR = "regular"
    P_LIMIT = "p_limit"
    NO_EXPANSION = "no_expansion"
    COLLINEAR = "collinear"


@dataclass(frozen=True)
class CoordSolveInput:
    x_col: np.ndarray
    y_resid: np.ndarray
    w_plus: np.ndarray
    w_plus2_sum: float
    p_m: float
    x_sq_norm: float

    def cross_products(self):
        sxw = float(self.x_col @ self.w_plus)
        swy = float(self.w_plus @ self.y_resid)
        sxy = float(self.x_col @ self.y_resid)
        return sxw, swy, sxy


@dataclass(frozen=True)
class CoordSolveOutput:
    beta_m: float
    alpha: float
    degenerate: SolveBranch


def solve_coordinate_px(inp: CoordSolveInput) -> CoordSolveOutput:
    """Jointly maximize the expected Q over (beta_m, alpha).

    Solves the 2x2 system
        [X'X, X'W+; p W+'X, 1'W+^2] (beta, alpha)' = (X'Yr, W+'Yr)'
    with analytic handling of the p -> 0 limit, the no-remaining-signal
    case, and near-singular systems.
    """
    sxx = float(inp.x_sq_norm)
    sww2 = float(inp.w_plus2_sum)
    pm = float(inp.p_m)
    sxw, swy, sxy = inp.cross_products()
    vals = (sxx, sww2, pm, sxw, swy, sxy)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError("non-finite inputs to coordinate solve")

    if sww2 < NO_SIGNAL_TOL:
        return CoordSolveOutput(sxy / sxx, 1.0, SolveBranch.NO_EXPANSION)
    if pm < P_LIMIT_TOL:
        alpha = swy / sww2
        return CoordSolveOutput((sxy - alpha * sxw) / sxx, alpha, SolveBranch.P_LIMIT)
    det = sxx * sww2 - pm * sxw * sxw
    if abs(det) < DET_GUARD * sxx * sww2:
        return CoordSolveOutput(sxy / sxx, swy / sww2, SolveBranch.COLLINEAR)
    beta_m = (sww2 * sxy - sxw * swy) / det
    alpha = (sxx * swy - pm * sxw * sxy) / det
    return CoordSolveOutput(beta_m, alpha, SolveBranch.REGULAR)


def q_function_value(beta_m: float, alpha: float, inp: CoordSolveInput) -> float:
    """Expected Q at (beta_m, alpha), up to terms constant in both; larger is better.

    This is the negated expected squared error of
    Yr - X gamma_m beta_m - alpha W+, dropping the ||Yr||^2 constant, so
    its argmax is exactly the 2x2 solution of :func:`solve_coordinate_px`.
    """
    sxw, swy, sxy = inp.cross_products()
    pm = inp.p_m
    return (2.0 * pm * beta_m * sxy + 2.0 * alpha * swy
            - 2.0 * pm * beta_m * alpha * sxw
            - pm * beta_m * beta_m * inp.x_sq_norm
            - alpha * alpha * inp.w_plus2_sum)


@dataclass
class SweepState:
    """In-progress one-at-a-time iteration state (columns in update order)."""

    x: np.ndarray
    beta: np.ndarray
    p: np.ndarray
    w_minus: np.ndarray
    v_minus: np.ndarray
    w_plus: np.ndarray
    v_plus: np.ndarray

    @classmethod
    def start(cls, x, beta, p, moments: WMoments) -> "SweepState":
        n = x.shape[0]
        x0 = x[:, 0]
        wp = moments.w - x0 * (p[0] * beta[0])
        vp = moments.v - x0 * x0 * (beta[0] ** 2 * p[0] * (1.0 - p[0]))
        np.maximum(vp, 0.0, out=vp)
        return cls(x=x, beta=beta.copy(), p=p, w_minus=np.zeros(n),
                   v_minus=np.zeros(n), w_plus=wp, v_plus=vp)

    def coord_input(self, y: np.ndarray, m: int, x_sq_norm: float) -> CoordSolveInput:
        return CoordSolveInput(
            x_col=self.x[:, m],
            y_resid=y - self.w_minus,
            w_plus=self.w_plus,
            w_plus2_sum=float(self.v_plus.sum() + self.w_plus @ self.w_plus),
            p_m=float(self.p[m]),
            x_sq_norm=x_sq_norm,
        )


def remap_and_advance(state: SweepState, m: int, out: CoordSolveOutput) -> SweepState:
    """Finalize coordinate m, rescale trailing coefficients, update moments online.

    Negative variance entries beyond rounding tolerance trigger an exact
    rebuild of the plus partition rather than an error.
    """
    x = state.x
    n, m_count = x.shape
    alpha = out.alpha
    state.beta[m] = out.beta_m
    state.beta[m + 1:] *= alpha

    xm = x[:, m]
    pm = state.p[m]
    state.w_minus += xm * (pm * out.beta_m)
    state.v_minus += xm * xm * (out.beta_m ** 2 * pm * (1.0 - pm))

    if m < m_count - 1:
        mp1 = m + 1
        xn = x[:, mp1]
        state.w_plus = alpha * state.w_plus - xn * (state.p[mp1] * state.beta[mp1])
        state.v_plus = (alpha * alpha * state.v_plus
                        - xn * xn * (state.beta[mp1] ** 2 * state.p[mp1]
                                     * (1.0 - state.p[mp1])))
        vp = state.v_plus
        vp[(vp < 0.0) & (vp >= -1e-12)] = 0.0
        if np.any(vp < 0.0):
            rest = slice(mp1 + 1, m_count)
            pb = state.p[rest] * state.beta[rest]
            state.w_plus = x[:, rest] @ pb
            state.v_plus = (x[:, rest] ** 2) @ (state.beta[rest] ** 2
                                                * state.p[rest]
                                                * (1.0 - state.p[rest]))
    else:
        state.w_plus = np.zeros(n)
        state.v_plus = np.zeros(n)
    return state


def update_sigma2_oaat(y: np.ndarray, w_minus: WMoments, x_last: np.ndarray,
                       beta_last: float, p_last: float) -> float:
    """sigma^2 update after the final coordinate of a one-at-a-time sweep."""
    n = y.shape[0]
    if n < 2:
        raise ValueError("n >= 2 required")
    sxx = float(x_last @ x_last)
    b_p = (float(y @ y)
           - 2.0 * float(y @ (w_minus.w + p_last * beta_last * x_last))
           + float(w_minus.v.sum() + w_minus.w @ w_minus.w)
           + p_last * sxx * beta_last * beta_last) / 2.0
    return max(2.0 * b_p / (n - 1), SIGMA2_FLOOR)


def update_alpha_aao(y: np.ndarray, moments: WMoments) -> float:
    """Global expansion-parameter update for the all-at-once variant."""
    denom = float(moments.v.sum() + moments.w @ moments.w)
    if denom < NO_SIGNAL_TOL:
        return 1.0
    return float(moments.w @ y) / denom


def update_sigma2_aao(y: np.ndarray, moments: WMoments, alpha: float, n: int) -> float:
    if n < 2:
        raise ValueError("n >= 2 required")
    w2_sum = float(moments.v.sum() + moments.w @ moments.w)
    b_p = (float(y @ y) - 2.0 * alpha * float(y @ moments.w)
           + alpha * alpha * w2_sum) / 2.0
    return max(2.0 * b_p / (n - 1), SIGMA2_FLOOR)
