"""Hot numeric kernels with numba and pure-numpy implementations.

Each public function dispatches on the module-level numba toggle
(``PROBE_NUMBA=0`` selects the numpy path). Both paths implement identical
math; agreement is covered by tests and timed by ``benchmarks/kernel_bench.py``.
"""

import math

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_njit

# branch guards for the 2x2 coordinate solve (see mstep for the reference
# implementations these kernels must agree with)
P_LIMIT_TOL = 1e-10
NO_SIGNAL_TOL = 1e-12
DET_GUARD = 1e-12
S2_FLOOR = 1e-12

_SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# exact Gaussian KDE evaluated at the sample points (self-term included)
# ---------------------------------------------------------------------------

_LOG2E = 1.4426950408889634
_LN2 = 0.6931471805599453


@maybe_njit(cache=True, fastmath=True)
def _kde_sym_njit(t, h):
    # The kernel weight is computed as 2^k * exp(f) with an inlined
    # branch-free range reduction instead of calling libm, so LLVM can
    # vectorize the pair loop. The degree-11 polynomial keeps the result
    # within a few ulp of exp(). Exponent assembly goes through an int64
    # buffer viewed as float64.
    m = t.shape[0]
    u = t / (h * math.sqrt(2.0))
    out = np.full(m, 1.0)  # self terms: phi(0) scaling applied below
    pbuf = np.empty(m)
    ibuf = np.empty(m, dtype=np.int64)
    ebuf = ibuf.view(np.float64)
    for i in range(m):
        ui = u[i]
        for j in range(i + 1, m):
            z = ui - u[j]
            y = -(z * z) * _LOG2E          # exp(-z^2) = 2^y with y <= 0
            if y < -1000.0:                # keep the exponent bits in range;
                y = -1000.0                # 2^-1000 is zero for all purposes
            k = np.int64(y - 0.5)          # round to nearest (y never positive)
            f = (y - k) * _LN2             # |f| <= ln2/2
            p = 1.0 + f * (1.0 + f * (0.5 + f * (1.0 / 6 + f * (1.0 / 24
                + f * (1.0 / 120 + f * (1.0 / 720 + f * (1.0 / 5040
                + f * (1.0 / 40320 + f * (1.0 / 362880 + f * (1.0 / 3628800
                + f * (1.0 / 39916800)))))))))))
            pbuf[j] = p
            ibuf[j] = (k + 1023) << 52
        acc = 0.0
        for j in range(i + 1, m):
            e = ebuf[j] * pbuf[j]
            acc += e
            out[j] += e
        out[i] += acc
    return out / (m * h * _SQRT2PI)


def _kde_np_chunked(t, h, chunk=512):
    m = t.shape[0]
    out = np.empty(m)
    for s in range(0, m, chunk):
        z = (t[s:s + chunk, None] - t[None, :]) / h
        out[s:s + chunk] = np.exp(-0.5 * z * z).sum(axis=1)
    return out / (m * h * _SQRT2PI)


def kde_at_points(t_stats: np.ndarray, h: float) -> np.ndarray:
    t = np.ascontiguousarray(t_stats, dtype=np.float64)
    if NUMBA_ENABLED:
        return _kde_sym_njit(t, float(h))
    return _kde_np_chunked(t, float(h))


# ---------------------------------------------------------------------------
# one-at-a-time PX-CM sweep
# ---------------------------------------------------------------------------

def _oaat_sweep_impl(x, y, csn, beta_in, p, sigma2, w_full, v_full):
    """One full sweep of sequential coordinate solves with online moments.

    Returns (beta_new, s2_new, b_p) where b_p feeds the sigma^2 update.
    Columns of ``x`` must already be in update order.
    """
    n, m_count = x.shape
    beta = beta_in.copy()
    s2 = np.empty(m_count)

    w_minus = np.zeros(n)
    v_minus = np.zeros(n)
    yr = y.copy()

    xm0 = x[:, 0]
    wp = w_full - xm0 * (p[0] * beta[0])
    vp = v_full - xm0 * xm0 * (beta[0] * beta[0] * p[0] * (1.0 - p[0]))
    for i in range(n):
        if vp[i] < 0.0:
            vp[i] = 0.0

    b_p = 0.0
    for m in range(m_count):
        xm = x[:, m]
        pm = p[m]
        sxx = csn[m]
        sxw = 0.0
        swy = 0.0
        sxy = 0.0
        sv = 0.0
        sw2 = 0.0
        for i in range(n):
            sxw += xm[i] * wp[i]
            swy += wp[i] * yr[i]
            sxy += xm[i] * yr[i]
            sv += vp[i]
            sw2 += wp[i] * wp[i]
        sww2 = sv + sw2

        # 2x2 coordinate solve with degeneracy guards
        if sww2 < NO_SIGNAL_TOL:
            beta_m = sxy / sxx
            alpha = 1.0
        elif pm < P_LIMIT_TOL:
            alpha = swy / sww2
            beta_m = (sxy - alpha * sxw) / sxx
        else:
            det = sxx * sww2 - pm * sxw * sxw
            if abs(det) < DET_GUARD * sxx * sww2:
                beta_m = sxy / sxx
                alpha = swy / sww2
            else:
                beta_m = (sww2 * sxy - sxw * swy) / det
                alpha = (sxx * swy - pm * sxw * sxy) / det

        # posterior variance: complete-data 2x2 term plus Taylor corrections
        det14 = sxx * sww2 - sxw * sxw
        if sww2 < NO_SIGNAL_TOL or det14 < DET_GUARD * sxx * sww2:
            cdv = sigma2 / sxx
        else:
            cdv = sigma2 * sww2 / det14
        tay = 0.0
        hmat = sxx * sw2 - pm * sxw * sxw
        # skip the correction once the plus partition is rounding residue
        if sw2 >= NO_SIGNAL_TOL and abs(hmat) > DET_GUARD * sxx * sw2:
            for i in range(n):
                hi = 2.0 * (wp[i] * sxx - pm * xm[i] * sxw)
                bp_i = (2.0 * wp[i] * sxy - yr[i] * sxw - xm[i] * swy
                        - hi * beta_m) / hmat
                bm_i = (xm[i] * sww2 - wp[i] * sxw) / hmat
                tay += bp_i * bp_i * vp[i] + bm_i * bm_i * v_minus[i]
        s2_m = cdv + tay
        floor = S2_FLOOR * sigma2 / sxx
        if s2_m < floor:
            s2_m = floor
        s2[m] = s2_m

        if m == m_count - 1:
            yy = 0.0
            ywm = 0.0
            yxm = 0.0
            sv_minus = 0.0
            wm2 = 0.0
            for i in range(n):
                yy += y[i] * y[i]
                ywm += y[i] * w_minus[i]
                yxm += y[i] * xm[i]
                sv_minus += v_minus[i]
                wm2 += w_minus[i] * w_minus[i]
            b_p = (yy - 2.0 * (ywm + pm * beta_m * yxm)
                   + sv_minus + wm2 + pm * sxx * beta_m * beta_m) / 2.0

        beta[m] = beta_m
        # reverse mapping: rescale coordinates not yet finalized
        for k in range(m + 1, m_count):
            beta[k] *= alpha

        # advance moments: coordinate m joins the minus partition
        bm_scale = pm * beta_m
        vq = beta_m * beta_m * pm * (1.0 - pm)
        for i in range(n):
            c = xm[i] * bm_scale
            w_minus[i] += c
            yr[i] -= c
            v_minus[i] += xm[i] * xm[i] * vq
        if m < m_count - 1:
            mp1 = m + 1
            xn = x[:, mp1]
            bn = p[mp1] * beta[mp1]
            vn = beta[mp1] * beta[mp1] * p[mp1] * (1.0 - p[mp1])
            a2 = alpha * alpha
            drift = False
            for i in range(n):
                wp[i] = alpha * wp[i] - xn[i] * bn
                vp[i] = a2 * vp[i] - xn[i] * xn[i] * vn
                if vp[i] < 0.0:
                    if vp[i] >= -1e-12:
                        vp[i] = 0.0
                    else:
                        drift = True
            if drift:
                # accumulated rounding: rebuild the plus partition exactly
                for i in range(n):
                    wp[i] = 0.0
                    vp[i] = 0.0
                for k in range(mp1 + 1, m_count):
                    xk = x[:, k]
                    bk = p[k] * beta[k]
                    vk = beta[k] * beta[k] * p[k] * (1.0 - p[k])
                    for i in range(n):
                        wp[i] += xk[i] * bk
                        vp[i] += xk[i] * xk[i] * vk
    return beta, s2, b_p


_oaat_sweep_njit = maybe_njit(cache=True)(_oaat_sweep_impl)


def _oaat_sweep_numpy(x, y, csn, beta_in, p, sigma2, w_full, v_full):
    """Vectorized numpy twin of ``_oaat_sweep_impl``."""
    n, m_count = x.shape
    beta = beta_in.copy()
    s2 = np.empty(m_count)

    w_minus = np.zeros(n)
    v_minus = np.zeros(n)
    yr = y.copy()

    xm0 = x[:, 0]
    wp = w_full - xm0 * (p[0] * beta[0])
    vp = v_full - xm0 * xm0 * (beta[0] ** 2 * p[0] * (1.0 - p[0]))
    np.maximum(vp, 0.0, out=vp)

    b_p = 0.0
    for m in range(m_count):
        xm = x[:, m]
        pm = p[m]
        sxx = csn[m]
        sxw = float(xm @ wp)
        swy = float(wp @ yr)
        sxy = float(xm @ yr)
        sww2 = float(vp.sum() + wp @ wp)
        sw2 = float(wp @ wp)

        if sww2 < NO_SIGNAL_TOL:
            beta_m, alpha = sxy / sxx, 1.0
        elif pm < P_LIMIT_TOL:
            alpha = swy / sww2
            beta_m = (sxy - alpha * sxw) / sxx
        else:
            det = sxx * sww2 - pm * sxw * sxw
            if abs(det) < DET_GUARD * sxx * sww2:
                beta_m, alpha = sxy / sxx, swy / sww2
            else:
                beta_m = (sww2 * sxy - sxw * swy) / det
                alpha = (sxx * swy - pm * sxw * sxy) / det

        det14 = sxx * sww2 - sxw * sxw
        if sww2 < NO_SIGNAL_TOL or det14 < DET_GUARD * sxx * sww2:
            cdv = sigma2 / sxx
        else:
            cdv = sigma2 * sww2 / det14
        tay = 0.0
        hmat = sxx * sw2 - pm * sxw * sxw
        if sw2 >= NO_SIGNAL_TOL and abs(hmat) > DET_GUARD * sxx * sw2:
            hvec = 2.0 * (wp * sxx - pm * xm * sxw)
            b_plus = (2.0 * wp * sxy - yr * sxw - xm * swy - hvec * beta_m) / hmat
            b_minus = (xm * sww2 - wp * sxw) / hmat
            tay = float(b_plus ** 2 @ vp + b_minus ** 2 @ v_minus)
        s2[m] = max(cdv + tay, S2_FLOOR * sigma2 / sxx)

        if m == m_count - 1:
            b_p = (float(y @ y) - 2.0 * float(y @ (w_minus + pm * beta_m * xm))
                   + float(v_minus.sum() + w_minus @ w_minus)
                   + pm * sxx * beta_m * beta_m) / 2.0

        beta[m] = beta_m
        beta[m + 1:] *= alpha

        contrib = xm * (pm * beta_m)
        w_minus += contrib
        yr -= contrib
        v_minus += xm * xm * (beta_m ** 2 * pm * (1.0 - pm))
        if m < m_count - 1:
            mp1 = m + 1
            xn = x[:, mp1]
            wp = alpha * wp - xn * (p[mp1] * beta[mp1])
            vp = alpha * alpha * vp - xn * xn * (beta[mp1] ** 2 * p[mp1] * (1.0 - p[mp1]))
            small_neg = (vp < 0.0) & (vp >= -1e-12)
            vp[small_neg] = 0.0
            if np.any(vp < 0.0):
                rest = slice(mp1 + 1, m_count)
                wp = x[:, rest] @ (p[rest] * beta[rest])
                vp = (x[:, rest] ** 2) @ (beta[rest] ** 2 * p[rest] * (1.0 - p[rest]))
    return beta, s2, b_p


def oaat_sweep(x, y, csn, beta, p, sigma2, w_full, v_full):
    """Dispatch the one-at-a-time sweep to the numba or numpy path."""
    if NUMBA_ENABLED:
        return _oaat_sweep_njit(x, y, csn, beta, p, float(sigma2), w_full, v_full)
    return _oaat_sweep_numpy(x, y, csn, beta, p, float(sigma2), w_full, v_full)


# ---------------------------------------------------------------------------
# cyclic coordinate-descent lasso over a descending lambda path (warm starts)
# ---------------------------------------------------------------------------

def _lasso_cd_path_impl(xs, y, csn, lams, tol, max_pass):
    n, m_count = xs.shape
    n_lam = lams.shape[0]
    coefs = np.zeros((m_count, n_lam))
    beta = np.zeros(m_count)
    active = np.zeros(m_count, dtype=np.bool_)
    r = y.copy()
    for li in range(n_lam):
        lam_n = lams[li] * n
        # active-set cycling: converge on the nonzero set, then confirm
        # with a full pass over all coordinates
        full_pass = True
        for _ in range(max_pass):
            max_d = 0.0
            for m in range(m_count):
                if not (full_pass or active[m]):
                    continue
                bm = beta[m]
                rho = 0.0
                xm = xs[:, m]
                for i in range(n):
                    rho += xm[i] * r[i]
                rho += csn[m] * bm
                if rho > lam_n:
                    bn = (rho - lam_n) / csn[m]
                elif rho < -lam_n:
                    bn = (rho + lam_n) / csn[m]
                else:
                    bn = 0.0
                if bn != bm:
                    d = bm - bn
                    for i in range(n):
                        r[i] += xm[i] * d
                    beta[m] = bn
                    if abs(d) > max_d:
                        max_d = abs(d)
                active[m] = bn != 0.0
            if max_d < tol:
                if full_pass:
                    break
                full_pass = True
            else:
                full_pass = False
        coefs[:, li] = beta
    return coefs


_lasso_cd_path_njit = maybe_njit(cache=True)(_lasso_cd_path_impl)


def _lasso_cd_path_numpy(xs, y, csn, lams, tol, max_pass):
    n, m_count = xs.shape
    n_lam = lams.shape[0]
    coefs = np.zeros((m_count, n_lam))
    beta = np.zeros(m_count)
    active = np.zeros(m_count, dtype=bool)
    r = y.copy()
    for li in range(n_lam):
        lam_n = lams[li] * n
        full_pass = True
        for _ in range(max_pass):
            max_d = 0.0
            for m in range(m_count):
                if not (full_pass or active[m]):
                    continue
                bm = beta[m]
                xm = xs[:, m]
                rho = float(xm @ r) + csn[m] * bm
                bn = math.copysign(max(abs(rho) - lam_n, 0.0), rho) / csn[m]
                if bn != bm:
                    r += xm * (bm - bn)
                    beta[m] = bn
                    max_d = max(max_d, abs(bn - bm))
                active[m] = bn != 0.0
            if max_d < tol:
                if full_pass:
                    break
                full_pass = True
            else:
                full_pass = False
        coefs[:, li] = beta
    return coefs


def lasso_cd_path(xs, y, csn, lams, tol=1e-7, max_pass=1000):
    """Lasso coefficients at each lambda of a descending path."""
    xs = np.asfortranarray(xs, dtype=np.float64)
    lams = np.ascontiguousarray(lams, dtype=np.float64)
    if NUMBA_ENABLED:
        return _lasso_cd_path_njit(xs, y, csn, lams, float(tol), int(max_pass))
    return _lasso_cd_path_numpy(xs, y, csn, lams, float(tol), int(max_pass))
