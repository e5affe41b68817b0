"""Evaluation metrics and the replicate benchmark orchestrator.

Compares both solver variants against the in-repo penalized baselines on
freshly simulated replicates, reporting signal/coefficient RMSE, relative
RMSE against the all-at-once solver, selection-size summaries, and an
update-order inclusion profile.
"""

import json
import time
from dataclasses import dataclass, replace, asdict
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .data import Dataset, FitConfig, FitResult, Variant, prepare_dataset
from .driver import fit_all_at_once, fit_one_at_a_time
from .lasso import adaptive_lasso, cv_fold_ids, lasso_path, ridge_fit
from .simulate import SimSpec, SimTruth, gen_dataset

METHODS = ("probe_aao", "probe_oaat", "lasso", "alasso", "ridge")
BASELINE_METHOD = "probe_aao"


def rmse_signal(estimate: np.ndarray, truth: SimTruth, x: np.ndarray) -> float:
    """Root mean squared error of the fitted signal X @ estimate."""
    resid = x @ estimate - truth.signal
    return float(np.sqrt(np.mean(resid * resid)))


def rmse_coef(estimate: np.ndarray, truth: SimTruth) -> float:
    err = estimate - truth.gamma * truth.beta
    return float(np.sqrt(np.mean(err * err)))


def mad(errors: np.ndarray) -> float:
    """Median absolute error."""
    return float(np.median(np.abs(errors)))


@dataclass
class MethodFit:
    coefs: np.ndarray        # sparse-coefficient estimate, original scale
    p_hat: np.ndarray        # inclusion probabilities (indicator for baselines)
    y_mean: float
    x_means: np.ndarray
    wall_time_s: float
    result: Optional[FitResult] = None

    def predict(self, x_new: np.ndarray) -> np.ndarray:
        return self.y_mean + (x_new - self.x_means) @ self.coefs


def fit_method(data: Dataset, method: str, seed: int = 0,
               config: Optional[FitConfig] = None,
               order=None) -> MethodFit:
    """Fit one named method; baselines report selection as nonzero support."""
    start = time.perf_counter()
    result = None
    if method == "probe_aao":
        cfg = config or FitConfig(variant=Variant.ALL_AT_ONCE, seed=seed)
        result = fit_all_at_once(data, cfg)
        coefs, p_hat = result.beta_bar, result.p_map
    elif method == "probe_oaat":
        cfg = config or FitConfig(variant=Variant.ONE_AT_A_TIME, seed=seed)
        result = fit_one_at_a_time(data, cfg, order=order)
        coefs, p_hat = result.beta_bar, result.p_map
    elif method == "lasso":
        coefs = lasso_path(data, seed=seed).best_coefs
        p_hat = (np.abs(coefs) > 0).astype(np.float64)
    elif method == "alasso":
        coefs = adaptive_lasso(data, seed=seed)
        p_hat = (np.abs(coefs) > 0).astype(np.float64)
    elif method == "ridge":
        coefs = ridge_fit(data, seed=seed)
        p_hat = (np.abs(coefs) > 0).astype(np.float64)
    else:
        raise ValueError(f"unknown method {method!r}")
    wall = time.perf_counter() - start
    return MethodFit(coefs=coefs, p_hat=p_hat, y_mean=data.y_mean,
                     x_means=data.col_means, wall_time_s=wall, result=result)


def cv_evaluate(y: np.ndarray, x: np.ndarray, method: str, folds: int = 10,
                seed: int = 0, config: Optional[FitConfig] = None) -> dict:
    """K-fold predictive evaluation with a full per-fold refit."""
    if folds < 2:
        raise ValueError("folds must be at least 2")
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    ids = cv_fold_ids(y.shape[0], folds, seed)
    fold_rows = []
    for k in range(folds):
        te = ids == k
        tr = ~te
        if te.sum() < 2 or tr.sum() < 2:
            raise ValueError(f"fold {k} has fewer than 2 observations")
        data_tr = prepare_dataset(y[tr], x[tr])
        mf = fit_method(data_tr, method, seed=seed, config=config)
        err = y[te] - mf.predict(x[te])
        fold_rows.append({"fold": k, "mspe": float(np.mean(err * err)),
                          "mad": mad(err)})
    return {
        "method": method,
        "folds": fold_rows,
        "cv_mspe": float(np.mean([r["mspe"] for r in fold_rows])),
        "cv_mad": float(np.mean([r["mad"] for r in fold_rows])),
    }


@dataclass
class BenchReport:
    rows: List[dict]         # one record per (setting, replicate, method)
    aggregates: List[dict]   # one record per (setting, method)
    order_profile: Optional[List[dict]] = None


def _replicate_seed(seed: int, setting_idx: int, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(setting_idx, rep))
    return int(ss.generate_state(1)[0])


def _setting_label(spec: SimSpec) -> str:
    return (f"M={spec.m_total},M1={spec.m1},eta={spec.eta},snr={spec.snr},"
            f"type={spec.predictor_type.value},n={spec.n}")


def _run_cell(spec: SimSpec, setting_idx: int, rep: int, methods, seed: int):
    rep_seed = _replicate_seed(seed, setting_idx, rep)
    rows = []
    try:
        data, truth = gen_dataset(replace(spec, seed=rep_seed))
    except Exception as exc:  # a bad draw fails every method in the cell
        for method in methods:
            rows.append({"setting": _setting_label(spec), "replicate": rep,
                         "method": method, "failed": True, "error": str(exc)})
        return rows
    x_raw = data.x + data.col_means
    for method in methods:
        base = {"setting": _setting_label(spec), "replicate": rep,
                "method": method, "failed": False, "error": ""}
        try:
            mf = fit_method(data, method, seed=rep_seed)
            est = mf.coefs
            base.update({
                "rmse_signal": rmse_signal(est, truth, x_raw),
                "rmse_coef": rmse_coef(est, truth),
                "mad": mad(est - truth.gamma * truth.beta),
                "m1_hat": float(mf.p_hat.sum()),
                "m1_hat_true": float(mf.p_hat[truth.gamma == 1].sum()),
                "wall_time_s": mf.wall_time_s,
            })
        except Exception as exc:
            base.update({"failed": True, "error": str(exc)})
        rows.append(base)
    return rows


def _aggregate(rows: List[dict]) -> List[dict]:
    df = pd.DataFrame(rows)
    out = []
    for (setting, method), grp in df.groupby(["setting", "method"], sort=True):
        ok = grp[~grp["failed"]]
        rec = {"setting": setting, "method": method,
               "replicates": int(len(grp)), "failures": int(grp["failed"].sum())}
        if len(ok):
            for col in ("rmse_signal", "rmse_coef", "mad", "m1_hat",
                        "m1_hat_true", "wall_time_s"):
                vals = ok[col].to_numpy()
                rec[f"{col}_mean"] = float(vals.mean())
                rec[f"{col}_min"] = float(vals.min())
                rec[f"{col}_max"] = float(vals.max())
            # aggregate RMSE is the root of the mean squared error over
            # replicates, so ratios match the relative-RMSE definition
            rec["agg_rmse_signal"] = float(
                np.sqrt(np.mean(ok["rmse_signal"].to_numpy() ** 2)))
            rec["agg_rmse_coef"] = float(
                np.sqrt(np.mean(ok["rmse_coef"].to_numpy() ** 2)))
        out.append(rec)
    by_key = {(r["setting"], r["method"]): r for r in out}
    for rec in out:
        ref = by_key.get((rec["setting"], BASELINE_METHOD))
        if ref is None or "agg_rmse_signal" not in ref or "agg_rmse_signal" not in rec:
            continue
        if rec["agg_rmse_signal"] > 0:
            rec["rrmse_signal"] = ref["agg_rmse_signal"] / rec["agg_rmse_signal"]
        if rec["agg_rmse_coef"] > 0:
            rec["rrmse_coef"] = ref["agg_rmse_coef"] / rec["agg_rmse_coef"]
    return out


def update_order_profile(spec: SimSpec, replicates: int = 30, seed: int = 0,
                         max_iter: int = 1000) -> List[dict]:
    """Mean inclusion probability by update position.

    The sequential solver runs with a random update order; the simultaneous
    solver has no order, so its probabilities are read out at the same
    random positions as a flat reference.
    """
    m = spec.m_total
    sums = {"probe_oaat": np.zeros(m), "probe_aao": np.zeros(m)}
    for rep in range(replicates):
        rep_seed = _replicate_seed(seed, 0, rep)
        data, _ = gen_dataset(replace(spec, seed=rep_seed))
        perm = np.random.default_rng(rep_seed).permutation(m)
        cfg_o = FitConfig(variant=Variant.ONE_AT_A_TIME, seed=rep_seed,
                          max_iter=max_iter)
        res_o = fit_one_at_a_time(data, cfg_o, order=perm)
        sums["probe_oaat"] += res_o.p_map[perm]
        cfg_a = FitConfig(variant=Variant.ALL_AT_ONCE, seed=rep_seed,
                          max_iter=max_iter)
        res_a = fit_all_at_once(data, cfg_a)
        sums["probe_aao"] += res_a.p_map[perm]
    rows = []
    for method, total in sums.items():
        for pos in range(m):
            rows.append({"position": pos, "mean_p": float(total[pos] / replicates),
                         "method": method})
    return rows


def run_benchmark(settings: Sequence[SimSpec], methods: Sequence[str] = METHODS,
                  replicates: int = 50, seed: int = 0, n_jobs: int = 1,
                  with_order_profile: bool = False) -> BenchReport:
    """Replicate grid over settings x methods with per-replicate fresh draws."""
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
    jobs = [(spec, si, rep)
            for si, spec in enumerate(settings)
            for rep in range(replicates)]
    chunks = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(spec, si, rep, list(methods), seed)
        for spec, si, rep in jobs)
    rows = [row for chunk in chunks for row in chunk]
    profile = None
    if with_order_profile:
        profile = update_order_profile(settings[0], replicates=min(replicates, 30),
                                       seed=seed)
    return BenchReport(rows=rows, aggregates=_aggregate(rows),
                       order_profile=profile)


def write_report(report: BenchReport, prefix: str):
    """Emit <prefix>.csv (aggregates), <prefix>.json (full), profile CSV."""
    pd.DataFrame(report.aggregates).to_csv(f"{prefix}.csv", index=False)
    payload = asdict(report)
    with open(f"{prefix}.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    if report.order_profile is not None:
        pd.DataFrame(report.order_profile).to_csv(
            f"{prefix}_order_profile.csv", index=False)
