"""Command-line entry point.

Subcommands:
    sim   --config <file> --out <dir>                 synthesize a dataset
    run   --dataset <dir> --config <file> --out <dir> run the estimator
    eval  --results <dir> --dataset <dir> --out <file>  compute metrics
    mc    --config <file> --runs <k> --out <dir>      Monte Carlo batches

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure. FORCEKF_LOG sets the log level (DEBUG enables the event audit).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import parse_config, parse_sim_config
from .dataio import load_dataset, read_estimates, write_dataset, write_states
from .errors import ConfigError, DataFormatError, EvaluationError, NumericalError, OrderingError
from .metrics import (
    MetricsReport,
    ate,
    force_nees_series,
    force_rmse,
    write_metrics,
    write_nees,
)
from .pipeline import run_estimator
from .simulate import synthesize

logger = logging.getLogger("forcekf")


def _setup_logging():
    level = os.environ.get("FORCEKF_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_sim(args):
    cfg = parse_sim_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    ds = synthesize(cfg)
    write_dataset(args.out, ds)
    logger.info("wrote dataset with %d IMU samples, %d frames to %s",
                len(ds.imu_t), len(ds.frames), args.out)
    return 0


def cmd_run(args):
    cfg = parse_config(args.config)
    streams = load_dataset(args.dataset)
    log = run_estimator(streams, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_states(os.path.join(args.out, "estimate.csv"), log.times, log.states, log.cov_diags)
    return 0


def _evaluate(results_dir, dataset_dir, out_path, alignment="se3"):
    est = read_estimates(os.path.join(results_dir, "estimate.csv"))
    streams = load_dataset(dataset_dir)
    if not streams.has_truth:
        raise EvaluationError(f"{dataset_dir}: groundtruth.csv required for evaluation")
    report = MetricsReport()
    report.force_rmse, report.force_samples = force_rmse(
        est.t, est.force, streams.truth_t, streams.truth_force
    )
    report.ate, report.ate_samples = ate(
        est.t, est.p, streams.truth_t, streams.truth_p, yaw_only=(alignment == "yaw")
    )
    nees_t, nees_series, report.nees_mean = force_nees_series(
        est, streams.truth_t, streams.truth_force
    )
    report.nees_samples = len(nees_series)
    write_metrics(out_path, report)
    write_nees(os.path.join(os.path.dirname(os.path.abspath(out_path)), "nees.csv"),
               nees_t, nees_series)
    return report


def cmd_eval(args):
    alignment = "yaw" if args.yaw_alignment else "se3"
    report = _evaluate(args.results, args.dataset, args.out, alignment)
    for name, value in report.rows():
        print(f"{name} = {value:.6g}")
    return 0


def cmd_mc(args):
    sim_cfg = parse_sim_config(args.config)
    est_cfg = parse_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    base_seed = sim_cfg.seed if args.seed is None else args.seed

    rmses, ates, nees_sums, nees_counts = [], [], 0.0, 0
    for i in range(args.runs):
        run_dir = os.path.join(args.out, f"run_{i:03d}")
        data_dir = os.path.join(run_dir, "dataset")
        sim_cfg.seed = int(np.random.SeedSequence([base_seed, i]).generate_state(1)[0])
        ds = synthesize(sim_cfg)
        write_dataset(data_dir, ds)
        streams = load_dataset(data_dir)
        log = run_estimator(streams, est_cfg)
        write_states(os.path.join(run_dir, "estimate.csv"), log.times, log.states,
                     log.cov_diags)
        report = _evaluate(run_dir, data_dir, os.path.join(run_dir, "metrics.csv"))
        rmses.append(report.force_rmse)
        ates.append(report.ate)
        nees_sums += report.nees_mean * report.nees_samples
        nees_counts += report.nees_samples
        logger.info("mc run %d: rmse=%.4f ate=%.4f nees=%.3f",
                    i, report.force_rmse, report.ate, report.nees_mean)

    summary = os.path.join(args.out, "summary.csv")
    with open(summary, "w", encoding="utf-8", newline="\n") as f:
        f.write("metric,value\n")
        f.write("runs,%d\n" % args.runs)
        f.write("force_rmse_mean,%.17g\n" % float(np.mean(rmses)))
        f.write("force_rmse_max,%.17g\n" % float(np.max(rmses)))
        f.write("ate_mean,%.17g\n" % float(np.mean(ates)))
        f.write("nees_force_mean,%.17g\n" % (nees_sums / nees_counts))
        f.write("nees_samples,%d\n" % nees_counts)
    print(f"mc summary written to {summary}")
    print(f"average force NEES = {nees_sums / nees_counts:.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="forcekf",
        description="Thrust-driven visual-inertial external force estimator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="synthesize a dataset")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.set_defaults(func=cmd_sim)

    p_run = sub.add_parser("run", help="run the estimator over a dataset")
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate estimates against ground truth")
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--yaw-alignment", action="store_true",
                        help="align ATE with yaw + translation only")
    p_eval.set_defaults(func=cmd_eval)

    p_mc = sub.add_parser("mc", help="seeded sim+run+eval Monte Carlo batch")
    p_mc.add_argument("--config", required=True)
    p_mc.add_argument("--runs", type=int, required=True)
    p_mc.add_argument("--out", required=True)
    p_mc.add_argument("--seed", type=int, default=None)
    p_mc.set_defaults(func=cmd_mc)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, EvaluationError, OrderingError) as exc:
        print(f"error[{type(exc).__module__}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error[{type(exc).__module__}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
