import numpy as np
import pytest

from probe.data import prepare_dataset
from probe.metrics import (cv_evaluate, fit_method, mad, rmse_coef,
                           rmse_signal, run_benchmark, write_report)
from probe.simulate import SimSpec, SimTruth, gen_dataset


def tiny_spec(**kw):
    base = dict(m_total=25, pi_frac=0.12, eta=0.8, snr=2.0, n=60, seed=9)
    base.update(kw)
    return SimSpec(**base)


def make_truth(rng, n=20, m=6):
    x = rng.standard_normal((n, m))
    gamma = np.zeros(m, dtype=np.int64)
    gamma[:2] = 1
    beta = rng.uniform(0.5, 1.5, m)
    signal = x @ (gamma * beta)
    return x, SimTruth(gamma=gamma, beta=beta, sigma2=1.0, signal=signal)


class TestPointMetrics:
    def test_perfect_estimate_is_zero(self, rng):
        x, truth = make_truth(rng)
        est = truth.gamma * truth.beta
        assert rmse_signal(est, truth, x) == 0.0
        assert rmse_coef(est, truth) == 0.0

    def test_zero_estimate(self, rng):
        x, truth = make_truth(rng)
        assert rmse_signal(np.zeros(6), truth, x) == pytest.approx(
            float(np.sqrt(np.mean(truth.signal ** 2))))

    def test_rmse_homogeneity(self, rng):
        x, truth = make_truth(rng)
        est = truth.gamma * truth.beta + 0.1
        base = rmse_coef(est, truth)
        scaled = rmse_coef(truth.gamma * truth.beta + 0.3, truth)
        assert scaled == pytest.approx(3.0 * base)

    def test_mad_sign_invariant(self, rng):
        e = rng.standard_normal(30)
        assert mad(e) == mad(-e)


class TestFitMethod:
    def test_unknown_method_errors(self, rng):
        x = rng.standard_normal((30, 5))
        y = rng.standard_normal(30)
        with pytest.raises(ValueError):
            fit_method(prepare_dataset(y, x), "boost")

    def test_baselines_report_support_indicator(self, rng):
        x = rng.standard_normal((50, 8))
        y = 2.0 * x[:, 0] + 0.2 * rng.standard_normal(50)
        mf = fit_method(prepare_dataset(y, x), "lasso")
        assert set(np.unique(mf.p_hat)) <= {0.0, 1.0}
        assert mf.p_hat[0] == 1.0


class TestCvEvaluate:
    def test_reports_all_folds(self, rng):
        data, _ = gen_dataset(tiny_spec())
        y = data.y + data.y_mean
        x = data.x + data.col_means
        out = cv_evaluate(y, x, "lasso", folds=5, seed=1)
        assert len(out["folds"]) == 5
        assert out["cv_mspe"] > 0.0
        assert out["cv_mad"] > 0.0

    def test_null_predictor_sanity(self, rng):
        # ridge on pure noise predicts near the mean; CV-MSPE tracks Var(Y)
        n = 100
        y = rng.standard_normal(n)
        x = rng.standard_normal((n, 5))
        out = cv_evaluate(y, x, "ridge", folds=5, seed=2)
        assert out["cv_mspe"] == pytest.approx(float(y.var()), rel=0.25)

    def test_rejects_single_fold(self, rng):
        with pytest.raises(ValueError):
            cv_evaluate(rng.standard_normal(20),
                        rng.standard_normal((20, 3)), "lasso", folds=1)


class TestRunBenchmark:
    def test_reproducible_and_self_rrmse_one(self):
        specs = [tiny_spec()]
        rep1 = run_benchmark(specs, methods=["probe_aao", "lasso"],
                             replicates=2, seed=5)
        rep2 = run_benchmark(specs, methods=["probe_aao", "lasso"],
                             replicates=2, seed=5)
        def strip_time(rows):
            return [{k: v for k, v in r.items() if k != "wall_time_s"}
                    for r in rows]

        assert strip_time(rep1.rows) == strip_time(rep2.rows)
        for agg in rep1.aggregates:
            if agg["method"] == "probe_aao":
                assert agg["rrmse_signal"] == 1.0
                assert agg["rrmse_coef"] == 1.0
            assert agg["failures"] == 0

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            run_benchmark([tiny_spec()], methods=["nope"], replicates=1)

    def test_write_report(self, tmp_path):
        rep = run_benchmark([tiny_spec()], methods=["lasso"], replicates=1,
                            seed=3)
        prefix = str(tmp_path / "report")
        write_report(rep, prefix)
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "report.json").exists()
