import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import random_coord_instance
from probe.data import make_wmoments
from probe.mstep import (CoordSolveInput, SolveBranch, SweepState,
                         q_function_value, remap_and_advance,
                         solve_coordinate_px, update_alpha_aao,
                         update_sigma2_aao, update_sigma2_oaat)


def make_input(x, yr, w_plus, p, w2_sum=None):
    if w2_sum is None:
        w2_sum = float(w_plus @ w_plus)
    return CoordSolveInput(x_col=x, y_resid=yr, w_plus=w_plus,
                           w_plus2_sum=w2_sum, p_m=p,
                           x_sq_norm=float(x @ x))


def expected_sse(beta, alpha, inp):
    """Oracle: expected squared error of Yr - gamma*beta*X - alpha*W.

    Enumerates gamma in {0, 1}; the latent W enters through its mean vector
    and the total second moment. Independent of the closed-form solver.
    """
    total = 0.0
    for g, pg in ((1.0, inp.p_m), (0.0, 1.0 - inp.p_m)):
        r = inp.y_resid - g * beta * inp.x_col
        total += pg * (float(r @ r) - 2.0 * alpha * float(inp.w_plus @ r)
                       + alpha * alpha * inp.w_plus2_sum)
    return total


def numeric_argmax(inp):
    res = minimize(lambda v: expected_sse(v[0], v[1], inp), x0=np.zeros(2),
                   method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000,
                            "maxfev": 20000})
    return res.x


class TestSolveCoordinate:
    def test_no_expansion_branch(self, rng):
        x, yr, _, p = random_coord_instance(rng, n=8)
        inp = make_input(x, yr, np.zeros(8), p)
        out = solve_coordinate_px(inp)
        assert out.degenerate is SolveBranch.NO_EXPANSION
        assert out.alpha == 1.0
        assert out.beta_m == pytest.approx(float(x @ yr) / float(x @ x))

    def test_orthogonal_diagonal_system(self, rng):
        x = np.array([1.0, 1.0, 0.0, 0.0])
        w = np.array([0.0, 0.0, 1.0, -1.0])
        yr = rng.standard_normal(4)
        inp = make_input(x, yr, w, 1.0)
        out = solve_coordinate_px(inp)
        assert out.beta_m == pytest.approx(float(x @ yr) / 2.0)
        assert out.alpha == pytest.approx(float(w @ yr) / 2.0)

    def test_matches_numeric_argmax(self, rng):
        for _ in range(25):
            x, yr, w, p = random_coord_instance(rng)
            inp = make_input(x, yr, w, p)
            out = solve_coordinate_px(inp)
            b_opt, a_opt = numeric_argmax(inp)
            assert out.beta_m == pytest.approx(b_opt, abs=1e-6)
            assert out.alpha == pytest.approx(a_opt, abs=1e-6)

    def test_p_limit_matches_small_p(self, rng):
        for _ in range(10):
            x, yr, w, _ = random_coord_instance(rng)
            lim = solve_coordinate_px(make_input(x, yr, w, 1e-12))
            reg = solve_coordinate_px(make_input(x, yr, w, 1e-8))
            assert lim.degenerate is SolveBranch.P_LIMIT
            assert lim.beta_m == pytest.approx(reg.beta_m, abs=1e-5)
            assert lim.alpha == pytest.approx(reg.alpha, abs=1e-5)

    def test_collinear_guard(self, rng):
        # w_plus proportional to x with matching second moment: singular system
        x = rng.standard_normal(6)
        w = 2.0 * x
        yr = rng.standard_normal(6)
        inp = make_input(x, yr, w, 1.0)
        out = solve_coordinate_px(inp)
        assert out.degenerate is SolveBranch.COLLINEAR
        assert np.isfinite(out.beta_m) and np.isfinite(out.alpha)

    def test_rejects_non_finite(self):
        x = np.array([1.0, np.nan])
        with pytest.raises(ValueError, match="non-finite"):
            solve_coordinate_px(make_input(x, np.ones(2), np.ones(2), 0.5))


class TestQFunction:
    def test_zero_point(self, rng):
        x, yr, w, p = random_coord_instance(rng)
        assert q_function_value(0.0, 0.0, make_input(x, yr, w, p)) == 0.0

    def test_matches_negated_expected_sse(self, rng):
        # equal up to the constant ||Yr||^2 dropped from the evaluator
        for _ in range(10):
            x, yr, w, p = random_coord_instance(rng)
            inp = make_input(x, yr, w, p)
            b, a = rng.standard_normal(2)
            diff = q_function_value(b, a, inp) + expected_sse(b, a, inp)
            assert diff == pytest.approx(float(yr @ yr), rel=1e-10)

    def test_solution_is_local_max(self, rng):
        for _ in range(10):
            x, yr, w, p = random_coord_instance(rng)
            inp = make_input(x, yr, w, p)
            out = solve_coordinate_px(inp)
            q0 = q_function_value(out.beta_m, out.alpha, inp)
            for db, da in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
                assert q_function_value(out.beta_m + db, out.alpha + da, inp) <= q0 + 1e-12

    def test_gradient_vanishes_at_solution(self, rng):
        for _ in range(10):
            x, yr, w, p = random_coord_instance(rng)
            inp = make_input(x, yr, w, p)
            out = solve_coordinate_px(inp)
            d = 1e-5
            scale = max(abs(q_function_value(out.beta_m, out.alpha, inp)), 1.0)
            gb = (q_function_value(out.beta_m + d, out.alpha, inp)
                  - q_function_value(out.beta_m - d, out.alpha, inp)) / (2 * d)
            ga = (q_function_value(out.beta_m, out.alpha + d, inp)
                  - q_function_value(out.beta_m, out.alpha - d, inp)) / (2 * d)
            assert abs(gb) <= 1e-6 * scale
            assert abs(ga) <= 1e-6 * scale


def scratch_plus_moments(x, beta, p, upto):
    """From-scratch moments of the not-yet-updated partition (cols > upto)."""
    rest = slice(upto + 1, x.shape[1])
    w = x[:, rest] @ (p[rest] * beta[rest])
    v = (x[:, rest] ** 2) @ (beta[rest] ** 2 * p[rest] * (1.0 - p[rest]))
    return w, v


class TestRemapAndAdvance:
    def setup_sweep(self, rng, n=12, m=6):
        x = rng.standard_normal((n, m))
        beta = rng.standard_normal(m)
        p = rng.uniform(0.0, 1.0, m)
        from probe.estep import compute_w_moments
        moments = compute_w_moments(x, beta, p)
        return x, beta, p, SweepState.start(x, beta, p, moments)

    def test_identity_alpha_moves_one_term(self, rng):
        from probe.mstep import CoordSolveOutput
        x, beta, p, state = self.setup_sweep(rng)
        out = CoordSolveOutput(beta_m=beta[0], alpha=1.0,
                               degenerate=SolveBranch.REGULAR)
        state = remap_and_advance(state, 0, out)
        np.testing.assert_allclose(state.beta, beta, rtol=1e-12)
        np.testing.assert_allclose(state.w_minus, x[:, 0] * p[0] * beta[0])
        w_ref, v_ref = scratch_plus_moments(x, beta, p, 1)
        np.testing.assert_allclose(state.w_plus, w_ref, atol=1e-10)
        np.testing.assert_allclose(state.v_plus, v_ref, atol=1e-10)

    def test_zero_alpha_annihilates_trailing(self, rng):
        from probe.mstep import CoordSolveOutput
        x, beta, p, state = self.setup_sweep(rng)
        out = CoordSolveOutput(beta_m=1.3, alpha=0.0,
                               degenerate=SolveBranch.REGULAR)
        state = remap_and_advance(state, 0, out)
        assert np.all(state.beta[1:] == 0.0)
        w_ref, v_ref = scratch_plus_moments(x, state.beta, p, 1)
        np.testing.assert_allclose(state.w_plus, w_ref, atol=1e-12)
        np.testing.assert_allclose(state.v_plus, v_ref, atol=1e-12)

    def test_online_moments_match_scratch_mid_sweep(self, rng):
        x, beta, p, state = self.setup_sweep(rng, n=15, m=10)
        y = rng.standard_normal(15)
        for m in range(5):
            inp = state.coord_input(y, m, float(x[:, m] @ x[:, m]))
            out = solve_coordinate_px(inp)
            state = remap_and_advance(state, m, out)
        w_ref, v_ref = scratch_plus_moments(x, state.beta, p, 5)
        scale = max(np.abs(w_ref).max(), 1.0)
        np.testing.assert_allclose(state.w_plus, w_ref, atol=1e-8 * scale)
        np.testing.assert_allclose(state.v_plus, v_ref, atol=1e-8 * scale)
        w_minus_ref = x[:, :5] @ (p[:5] * state.beta[:5])
        np.testing.assert_allclose(state.w_minus, w_minus_ref, atol=1e-8 * scale)


class TestSigma2Updates:
    def test_oaat_perfect_fit_floors(self):
        y = np.array([1.0, -2.0, 0.5])
        wm = make_wmoments(y.copy(), np.zeros(3))
        x = np.array([1.0, 1.0, -2.0])
        assert update_sigma2_oaat(y, wm, x, 0.0, 1.0) == pytest.approx(1e-12)

    def test_oaat_null_model_gives_sample_variance(self, rng):
        y = rng.standard_normal(40)
        y = y - y.mean()
        wm = make_wmoments(np.zeros(40), np.zeros(40))
        x = rng.standard_normal(40)
        got = update_sigma2_oaat(y, wm, x, 0.0, 1.0)
        assert got == pytest.approx(float(y @ y) / 39)

    def test_oaat_matches_gamma_enumeration_orthogonal(self, rng):
        # oracle: E||Y - W - gamma*beta*X||^2 with gamma enumerated; the
        # closed form drops the X'W cross term, so W is built orthogonal to X
        for _ in range(20):
            n = int(rng.integers(5, 20))
            y = rng.standard_normal(n)
            x = rng.standard_normal(n)
            w = rng.standard_normal(n)
            w -= x * float(x @ w) / float(x @ x)
            v = rng.uniform(0.0, 0.5, n)
            beta, p = float(rng.standard_normal()), float(rng.uniform(0, 1))
            wm = make_wmoments(w, v)
            w2 = float(v.sum() + w @ w)
            exp_sse = 0.0
            for g, pg in ((1.0, p), (0.0, 1.0 - p)):
                r = y - g * beta * x
                exp_sse += pg * (float(r @ r) - 2.0 * float(w @ r) + w2)
            got = update_sigma2_oaat(y, wm, x, beta, p)
            assert got == pytest.approx(max(exp_sse / (n - 1), 1e-12), rel=1e-10)

    def test_aao_alpha_trivial_cases(self, rng):
        y = rng.standard_normal(10)
        assert update_alpha_aao(y, make_wmoments(y.copy(), np.zeros(10))) == pytest.approx(1.0)
        w_perp = rng.standard_normal(10)
        w_perp -= y * float(y @ w_perp) / float(y @ y)
        assert update_alpha_aao(y, make_wmoments(w_perp, np.zeros(10))) == pytest.approx(0.0, abs=1e-12)
        assert update_alpha_aao(y, make_wmoments(3.0 * y, np.zeros(10))) == pytest.approx(1 / 3)
        assert update_alpha_aao(y, make_wmoments(np.zeros(10), np.zeros(10))) == 1.0

    def test_aao_sigma2_alpha_zero_gives_sample_variance(self, rng):
        y = rng.standard_normal(25)
        wm = make_wmoments(rng.standard_normal(25), rng.uniform(0, 1, 25))
        assert update_sigma2_aao(y, wm, 0.0, 25) == pytest.approx(float(y @ y) / 24)

    def test_aao_sigma2_matches_enumeration(self, rng):
        # E||Y - alpha * X(gamma o beta)||^2 by exhaustive gamma enumeration
        from probe.estep import compute_w_moments
        for _ in range(5):
            n, m = 8, 6
            x = rng.standard_normal((n, m))
            y = rng.standard_normal(n)
            beta = rng.standard_normal(m)
            p = rng.uniform(0, 1, m)
            alpha = float(rng.uniform(-1, 2))
            exp_sse = 0.0
            for bits in range(2 ** m):
                g = np.array([(bits >> k) & 1 for k in range(m)], dtype=float)
                prob = float(np.prod(np.where(g == 1, p, 1 - p)))
                r = y - alpha * (x @ (g * beta))
                exp_sse += prob * float(r @ r)
            got = update_sigma2_aao(y, compute_w_moments(x, beta, p), alpha, n)
            assert got == pytest.approx(max(exp_sse / (n - 1), 1e-12), rel=1e-9)

    def test_scale_equivariance(self, rng):
        y = rng.standard_normal(15)
        w = rng.standard_normal(15)
        v = rng.uniform(0, 1, 15)
        x = rng.standard_normal(15)
        c = 3.7
        base = update_sigma2_oaat(y, make_wmoments(w, v), x, 0.4, 0.6)
        scaled = update_sigma2_oaat(c * y, make_wmoments(c * w, c * c * v), x,
                                    c * 0.4, 0.6)
        assert scaled == pytest.approx(c * c * base, rel=1e-12)
        base_a = update_sigma2_aao(y, make_wmoments(w, v), 0.8, 15)
        scaled_a = update_sigma2_aao(c * y, make_wmoments(c * w, c * c * v), 0.8, 15)
        assert scaled_a == pytest.approx(c * c * base_a, rel=1e-12)
