"""Command-line experiment runner.

Subcommands:
    simulate   write one truth/observation trajectory as CSV
    run        seeded filter runs with aggregated metrics as JSON
    sweep      sweep particles or partition, one CSV row per value
    compare    the benchmark comparison preset, both filters, CSV table

Exit codes: 0 success, 2 configuration error, 3 all runs failed.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    default_benchmark_config,
    load_config,
)
from .exceptions import ConfigError, NoSuccessfulRuns
from .experiments import (
    SWEEP_PARAMS,
    aggregate_metrics,
    run_comparison,
    run_filter_experiment,
    run_sweep,
    simulate_for_run,
    write_comparison_csv,
    write_metrics_json,
    write_sweep_csv,
    write_truth_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _load(path: str | None) -> ExperimentConfig:
    if path is None:
        return default_benchmark_config()
    return load_config(path)


def _override(cfg: ExperimentConfig, **updates) -> ExperimentConfig:
    """Rebuild the config with non-None CLI flag values applied."""
    data = config_to_dict(cfg)
    data.update({k: v for k, v in updates.items() if v is not None})
    return config_from_dict(data)


def _cmd_simulate(args) -> int:
    cfg = _load(args.config)
    seed = args.seed if args.seed is not None else cfg.master_seed
    truth, obs = simulate_for_run(cfg, seed)
    write_truth_csv(truth, obs, args.out)
    print(f"wrote {cfg.days} days to {args.out} (seed {seed})")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    cfg = _override(
        cfg,
        filter=args.filter,
        particles=args.particles,
        partition=args.partition,
        runs=args.runs,
        master_seed=args.seed,
        fixed_truth=True if args.fixed_truth else None,
    )
    metrics = run_filter_experiment(cfg)
    write_metrics_json(metrics, args.out)
    summary = aggregate_metrics(metrics)
    print(
        f"{cfg.filter}: {cfg.runs} runs, "
        f"rmse_tsum {summary['rmse_tsum_mean']:.4g} +- {summary['rmse_tsum_std']:.4g}, "
        f"rmse_v {summary['rmse_v_mean']:.4g} +- {summary['rmse_v_std']:.4g}, "
        f"{summary['failed_runs']} failed -> {args.out}"
    )
    return EXIT_OK


def _parse_values(param: str, text: str) -> list:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            out.append(int(chunk) if param == "particles" else float(chunk))
        except ValueError as exc:
            raise ConfigError(f"bad sweep value {chunk!r} for {param}") from exc
    if not out:
        raise ConfigError("sweep needs at least one value")
    for v in out:
        if param == "particles" and v < 1:
            raise ConfigError(f"particles value {v} out of range")
        if param == "partition" and not (0.0 <= v <= 1.0):
            raise ConfigError(f"partition value {v} out of range")
    return out


def _cmd_sweep(args) -> int:
    cfg = _load(args.config)
    cfg = _override(cfg, runs=args.runs, master_seed=args.seed)
    values = _parse_values(args.param, args.values)
    rows = run_sweep(args.param, values, cfg.runs, cfg)
    write_sweep_csv(rows, args.out)
    if all(row["mean_rmse_v"] is None for row in rows):
        raise NoSuccessfulRuns("every run in every sweep row failed")
    print(f"swept {args.param} over {values} ({cfg.runs} runs each) -> {args.out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load(args.config)
    cfg = _override(cfg, master_seed=args.seed)
    rows = run_comparison(cfg, runs=args.runs)
    write_comparison_csv(rows, args.out)
    for row in rows:
        print(
            f"{row['filter']}(N={row['particles']}): "
            f"rmse_tsum {row['mean_rmse_tsum']:.4g}, rmse_v {row['mean_rmse_v']:.4g}, "
            f"evals/run {row['mean_eval_count']:.0f}"
        )
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xnpf",
        description="Particle-filter benchmark runner for the viral infection model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON experiment config (default: built-in benchmark)")
        p.add_argument("--seed", type=int, help="override the config's master_seed")

    p = sub.add_parser("simulate", help="write a truth/observation trajectory CSV")
    add_common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run", help="run one filter over seeded experiments")
    add_common(p)
    p.add_argument("--filter", choices=("bpf", "xnpf"), help="filter kind")
    p.add_argument("--particles", type=int, help="cloud size N")
    p.add_argument("--partition", type=float, help="exploration fraction in [0, 1]")
    p.add_argument("--runs", type=int, help="number of seeded runs")
    p.add_argument(
        "--fixed-truth",
        action="store_true",
        help="reuse the first run's synthetic data for every run",
    )
    p.add_argument("--out", required=True, help="output metrics JSON path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="sweep particles or partition")
    add_common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--runs", type=int, help="runs per value")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="benchmark comparison preset, both filters")
    add_common(p)
    p.add_argument("--runs", type=int, help="runs per filter")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoSuccessfulRuns as exc:
        print(f"all runs failed: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED


if __name__ == "__main__":
    sys.exit(main())
