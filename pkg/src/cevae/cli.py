"""Command-line entry point: run experiments, summarize results, check data.

    cevae run CONFIG.json [--output-dir DIR] [--workers K] [--seed S]
    cevae summarize RESULTS.csv [--out SUMMARY.csv]
    cevae validate-data {ihdp,jobs} DIR
"""

from __future__ import annotations

import argparse
import csv
import sys

from .data import DataNotFoundError, load_ihdp, load_jobs
from .experiments import ExperimentConfig, run, summarize

SUMMARY_COLUMNS = ["grid_value", "estimator", "metric", "mean", "stderr", "n"]


def _cmd_run(args) -> int:
    try:
        config = ExperimentConfig.from_file(args.config)
    except (OSError, ValueError, KeyError) as err:
        print(f"bad config: {err}", file=sys.stderr)
        return 2
    if args.output_dir:
        config.output_dir = args.output_dir
        config.raw["output_dir"] = args.output_dir
    if args.seed is not None:
        config.base_seed = args.seed
        config.raw["base_seed"] = args.seed
    if args.data_dir:
        config.data_dir = args.data_dir
        config.raw["data_dir"] = args.data_dir
    code = run(config, workers=args.workers)
    print(f"results written to {config.output_dir} (exit {code})")
    return code


def _cmd_summarize(args) -> int:
    try:
        groups = summarize(args.results)
    except DataNotFoundError as err:
        print(str(err), file=sys.stderr)
        return 2
    rows = []
    for group in groups:
        for metric, stats in sorted(group["metrics"].items()):
            rows.append([
                group["grid_value"], group["estimator"], metric,
                repr(stats["mean"]), repr(stats["stderr"]), stats["n"],
            ])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            writer.writerows(rows)
        print(f"summary written to {args.out}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
    return 0


def _cmd_validate_data(args) -> int:
    try:
        if args.kind == "ihdp":
            ds = load_ihdp(args.directory, replication=1, which="train")
            load_ihdp(args.directory, replication=1, which="test")
            extras = "mu0/mu1 present" if ds.mu0 is not None else "missing mu0/mu1"
        else:
            ds = load_jobs(args.directory, fold=0, which="train")
            load_jobs(args.directory, fold=0, which="test")
            n_rand = int(ds.randomized_mask.sum())
            extras = f"{n_rand} randomized units in fold 0 train"
    except (DataNotFoundError, ValueError) as err:
        print(f"invalid {args.kind} layout: {err}", file=sys.stderr)
        return 2
    print(f"{args.kind} data OK: n={ds.n}, d={ds.d} ({extras})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cevae",
        description="Treatment-effect experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the experiment JSON config")
    p_run.add_argument("--output-dir", help="override the config output_dir")
    p_run.add_argument("--workers", type=int, default=1,
                       help="worker processes for replications (default 1)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config base_seed")
    p_run.add_argument("--data-dir", default=None,
                       help="external benchmark data directory "
                            "(also via CEVAE_DATA_DIR)")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate a results CSV")
    p_sum.add_argument("results", help="path to results.csv")
    p_sum.add_argument("--out", help="write the summary CSV here")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_val = sub.add_parser("validate-data", help="check external benchmark files")
    p_val.add_argument("kind", choices=("ihdp", "jobs"))
    p_val.add_argument("directory")
    p_val.set_defaults(fn=_cmd_validate_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
