"""Sparse high-dimensional regression via partitioned empirical-Bayes ECM."""

from .data import (Dataset, FitConfig, FitResult, ProbeState, Variant,
                   WMoments, prepare_dataset)
from .driver import (ConvergenceRecord, fit, fit_all_at_once,
                     fit_one_at_a_time, predict)
from .lasso import LassoFit, adaptive_lasso, lasso_path, ridge_fit
from .metrics import (BenchReport, cv_evaluate, rmse_coef, rmse_signal,
                      run_benchmark, write_report)
from .simulate import PredictorType, SimSpec, SimTruth, gen_dataset

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FitConfig", "FitResult", "ProbeState", "Variant", "WMoments",
    "prepare_dataset", "ConvergenceRecord", "fit", "fit_all_at_once",
    "fit_one_at_a_time", "predict", "LassoFit", "adaptive_lasso", "lasso_path",
    "ridge_fit", "BenchReport", "cv_evaluate", "rmse_coef", "rmse_signal",
    "run_benchmark", "write_report", "PredictorType", "SimSpec", "SimTruth",
    "gen_dataset", "__version__",
]
