"""Small special-functions kit: normal pdf/cdf, inverse normal, chi^2_1 quantile."""

import math

import numpy as np

from ._accel import maybe_njit

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@maybe_njit(cache=True)
def _cdf_kernel(z, out):
    for i in range(z.shape[0]):
        out[i] = 0.5 * math.erfc(-z[i] / _SQRT2)
    return out


def normal_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.exp(-0.5 * z * z) / _SQRT2PI
    return float(out) if out.ndim == 0 else out


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = _cdf_kernel(arr, np.empty_like(arr))
    return float(out[0]) if np.ndim(z) == 0 else out


# Acklam's rational approximation for the inverse normal CDF, refined below
# with one Newton step (relative error then near machine precision).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(q: float) -> float:
    if q < _P_LOW:
        u = math.sqrt(-2.0 * math.log(q))
        return (((((_C[0] * u + _C[1]) * u + _C[2]) * u + _C[3]) * u + _C[4]) * u + _C[5]) / \
               ((((_D[0] * u + _D[1]) * u + _D[2]) * u + _D[3]) * u + 1.0)
    if q > 1.0 - _P_LOW:
        u = math.sqrt(-2.0 * math.log(1.0 - q))
        return -(((((_C[0] * u + _C[1]) * u + _C[2]) * u + _C[3]) * u + _C[4]) * u + _C[5]) / \
               ((((_D[0] * u + _D[1]) * u + _D[2]) * u + _D[3]) * u + 1.0)
    u = q - 0.5
    r = u * u
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def inverse_normal_cdf(q: float) -> float:
    """Quantile of the standard normal, rational approximation + one Newton step."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile argument must be in (0, 1)")
    x = _acklam(q)
    # Newton refinement on Phi(x) - q = 0
    err = 0.5 * math.erfc(-x / _SQRT2) - q
    x -= err * _SQRT2PI * math.exp(0.5 * x * x)
    return x


def chisq1_quantile(eps: float) -> float:
    """eps quantile of chi-square with 1 df via the normal-quantile identity."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    z = inverse_normal_cdf((1.0 + eps) / 2.0)
    return z * z
