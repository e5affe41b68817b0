"""Command-line front end.

Subcommands: fit, predict, simulate, bench, cv. Matrices travel as CSV
(with a `y` outcome column where applicable), results as JSON. Exit codes:
0 success, 1 error, 2 fit ran but did not converge (result still written).
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np
import pandas as pd

from .data import FitConfig, Variant, prepare_dataset
from .driver import fit_all_at_once, fit_one_at_a_time, predict
from .metrics import METHODS, cv_evaluate, run_benchmark, write_report
from .simulate import PredictorType, SimSpec, gen_dataset

VARIANT_ALIASES = {"aao": Variant.ALL_AT_ONCE, "all_at_once": Variant.ALL_AT_ONCE,
                   "oaat": Variant.ONE_AT_A_TIME, "one_at_a_time": Variant.ONE_AT_A_TIME}


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("PROBE_THREADS")
    if env is not None:
        return int(env)
    return os.cpu_count() or 1


def _read_xy_csv(path: str):
    df = pd.read_csv(path)
    if "y" not in df.columns:
        raise ValueError(f"{path}: input CSV must contain a 'y' column")
    y = df["y"].to_numpy(dtype=np.float64)
    x = df.drop(columns=["y"]).to_numpy(dtype=np.float64)
    if x.shape[1] == 0:
        raise ValueError(f"{path}: no predictor columns besides 'y'")
    return y, x


def _read_x_csv(path: str) -> np.ndarray:
    df = pd.read_csv(path)
    return df.to_numpy(dtype=np.float64)


def _fit_config(args) -> FitConfig:
    return FitConfig(
        variant=VARIANT_ALIASES[args.variant],
        epsilon=args.epsilon,
        lr_exponent=args.lr_exponent,
        storey_lambda=args.storey_lambda,
        bandwidth_multiplier=args.bandwidth_multiplier,
        max_iter=args.max_iter,
        seed=args.seed,
        cv_folds=args.cv_folds,
    )


def cmd_fit(args) -> int:
    y, x = _read_xy_csv(args.input)
    data = prepare_dataset(y, x)
    config = _fit_config(args)
    if config.variant == Variant.ONE_AT_A_TIME:
        result = fit_one_at_a_time(data, config)
    else:
        result = fit_all_at_once(data, config)
    trace_path = args.trace_output or args.output + ".trace.csv"
    pd.DataFrame([asdict(r) for r in result.trace]).to_csv(trace_path, index=False)
    doc = {
        "variant": result.variant.value,
        "beta_bar": result.beta_bar.tolist(),
        "p_map": result.p_map.tolist(),
        "beta_map": result.beta_map.tolist(),
        "sigma2_map": result.sigma2_map,
        "ig_a": result.ig_a,
        "ig_b": result.ig_b,
        "iterations": result.iterations,
        "converged": result.converged,
        "restarted": result.restarted,
        "null_model": result.null_model,
        "y_mean": result.y_mean,
        "x_means": result.x_means.tolist(),
        "trace_path": trace_path,
    }
    with open(args.output, "w") as fh:
        json.dump(doc, fh)
    return 0 if result.converged else 2


def cmd_predict(args) -> int:
    with open(args.model) as fh:
        doc = json.load(fh)
    x = _read_x_csv(args.input)
    beta_bar = np.asarray(doc["beta_bar"], dtype=np.float64)
    if x.shape[1] != beta_bar.shape[0]:
        raise ValueError(
            f"{args.input}: expected {beta_bar.shape[0]} predictor columns, got {x.shape[1]}")
    x_means = np.asarray(doc["x_means"], dtype=np.float64)
    pred = doc["y_mean"] + (x - x_means) @ beta_bar
    pd.DataFrame({"prediction": pred}).to_csv(args.output, index=False)
    return 0


def _sim_spec(args) -> SimSpec:
    return SimSpec(
        m_total=args.m_total,
        pi_frac=args.pi_frac,
        eta=args.eta,
        snr=args.snr,
        predictor_type=PredictorType(args.predictor_type),
        n=args.n,
        s0_gamma=args.s0_gamma,
        s0_x=args.s0_x,
        a_var=args.a_var,
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    spec = _sim_spec(args)
    data, truth = gen_dataset(spec)
    x_raw = data.x + data.col_means
    y_raw = data.y + data.y_mean
    cols = {"y": y_raw}
    for m in range(data.m_count):
        cols[f"x{m}"] = x_raw[:, m]
    pd.DataFrame(cols).to_csv(args.output, index=False)
    truth_path = args.truth_output or args.output.replace(".csv", "") + "_truth.csv"
    pd.DataFrame({
        "gamma": truth.gamma,
        "beta": truth.beta,
        "sigma2": np.full(spec.m_total, truth.sigma2),
    }).to_csv(truth_path, index=False)
    return 0


def cmd_bench(args) -> int:
    spec = _sim_spec(args)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    report = run_benchmark([spec], methods=methods, replicates=args.replicates,
                           seed=args.seed, n_jobs=_threads(args),
                           with_order_profile=args.order_profile)
    write_report(report, args.output)
    return 0


def cmd_cv(args) -> int:
    y, x = _read_xy_csv(args.input)
    result = cv_evaluate(y, x, args.method, folds=args.cv_folds, seed=args.seed)
    with open(args.output, "w") as fh:
        json.dump(result, fh, indent=2)
    return 0


def _add_fit_options(p: argparse.ArgumentParser):
    p.add_argument("--variant", choices=sorted(VARIANT_ALIASES), default="aao")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--lr-exponent", type=float, default=None)
    p.add_argument("--storey-lambda", type=float, default=0.1)
    p.add_argument("--bandwidth-multiplier", type=float, default=5.0)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--cv-folds", type=int, default=10)


def _add_sim_options(p: argparse.ArgumentParser):
    p.add_argument("--m-total", type=int, default=400)
    p.add_argument("--pi-frac", type=float, default=0.05)
    p.add_argument("--eta", type=float, default=0.8)
    p.add_argument("--snr", type=float, default=2.0)
    p.add_argument("--predictor-type", choices=[t.value for t in PredictorType],
                   default="continuous")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--s0-gamma", type=float, default=20.0)
    p.add_argument("--s0-x", type=float, default=10.0)
    p.add_argument("--a-var", type=float, default=0.75)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probe",
        description="Sparse regression via partitioned empirical-Bayes ECM")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker count (default: PROBE_THREADS or all cores)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model to a CSV with a 'y' column")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--trace-output", default=None)
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict from a saved fit JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--truth-output", default=None)
    _add_sim_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="replicate benchmark over methods")
    p.add_argument("--output", required=True, help="output path prefix")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--methods", default=None,
                   help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--order-profile", action="store_true")
    _add_sim_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cv", parents=[common], help="K-fold predictive evaluation of one method")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=METHODS, default="probe_aao")
    p.add_argument("--cv-folds", type=int, default=10)
    p.set_defaults(func=cmd_cv)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
