"""Experiment runner: seeded multi-run experiments, sweeps, the two-filter
comparison, and the file formats they emit.

Determinism contract: (config, master_seed) fixes every output byte.
Run seeds derive from the master seed through a seed sequence; each run
splits its seed into a truth branch (measurement noise) and a filter
branch (the named filter streams). Wall time is measured but never
serialized, so repeated invocations produce identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import rmse_series
from .config import (
    ExperimentConfig,
    build_filter_config,
    build_model,
    comparison_configs,
)
from .exceptions import AllWeightsZero, NoSuccessfulRuns
from .filtering import run_filter
from .hiv import beta_schedule, endemic_equilibrium, simulate_truth

__all__ = [
    "RunMetrics",
    "run_seeds",
    "simulate_for_run",
    "run_filter_experiment",
    "aggregate_metrics",
    "run_sweep",
    "run_comparison",
    "write_truth_csv",
    "write_metrics_json",
    "write_sweep_csv",
    "write_comparison_csv",
]

_HISTOGRAM_BINS = 20


@dataclass
class RunMetrics:
    """Outcome of one seeded filter run.

    weight_histogram pools the pre-resample normalized weights of every
    step into equal-width bins over [0, max weight]. wall_time stays
    in-memory only.
    """

    seed: int
    rmse_tsum: float | None
    rmse_v: float | None
    ess_trace: list[float]
    weight_histogram: dict | None
    eval_count: int
    wall_time: float
    failed: bool


def run_seeds(master_seed: int, runs: int) -> list[int]:
    """One reportable 64-bit seed per run, derived from the master seed."""
    state = np.random.SeedSequence(master_seed).generate_state(runs, dtype=np.uint64)
    return [int(s) for s in state]


def _truth_init_state(cfg: ExperimentConfig) -> np.ndarray:
    if isinstance(cfg.truth_init, str):
        return endemic_equilibrium(cfg.params, beta_schedule(0.0, cfg.schedule))
    return np.asarray(cfg.truth_init, dtype=float)


def simulate_for_run(cfg: ExperimentConfig, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Truth trajectory and observations from a run seed's truth branch."""
    truth_ss, _ = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(truth_ss)
    return simulate_truth(
        cfg.params, cfg.schedule, cfg.noise, cfg.days, _truth_init_state(cfg), rng, cfg.dt
    )


def _pooled_weight_histogram(weights_history: np.ndarray) -> dict:
    flat = weights_history.ravel()
    top = float(flat.max()) if flat.size else 1.0
    counts, edges = np.histogram(flat, bins=_HISTOGRAM_BINS, range=(0.0, top or 1.0))
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def run_filter_experiment(cfg: ExperimentConfig) -> list[RunMetrics]:
    """Independent seeded runs of the configured filter.

    A run whose weights collapse is reported failed and excluded from
    aggregates — never retried, never reset.
    """
    model = build_model(cfg)
    fcfg = build_filter_config(cfg)
    seeds = run_seeds(cfg.master_seed, cfg.runs)
    init_center_logb = float(np.log(beta_schedule(0.0, cfg.schedule)))

    results = []
    for r, seed in enumerate(seeds):
        truth_seed = seeds[0] if cfg.fixed_truth else seed
        truth, obs = simulate_for_run(cfg, truth_seed)
        _, filter_ss = np.random.SeedSequence(seed).spawn(2)
        init_center = np.concatenate([_truth_init_state(cfg), [init_center_logb]])

        start = time.perf_counter()
        try:
            res = run_filter(
                cfg.filter, obs, model, fcfg, filter_ss, init_center, cfg.filter_init_spread
            )
        except AllWeightsZero:
            results.append(
                RunMetrics(seed, None, None, [], None, 0, time.perf_counter() - start, True)
            )
            continue
        elapsed = time.perf_counter() - start

        est_tsum = res.estimates[:, 0] + res.estimates[:, 1]
        truth_tsum = truth[:, 0] + truth[:, 1]
        results.append(
            RunMetrics(
                seed=seed,
                rmse_tsum=rmse_series(est_tsum, truth_tsum),
                rmse_v=rmse_series(res.estimates[:, 2], truth[:, 2]),
                ess_trace=[float(e) for e in res.ess_trace],
                weight_histogram=_pooled_weight_histogram(res.weights_history),
                eval_count=res.eval_count,
                wall_time=elapsed,
                failed=False,
            )
        )
    return results


def aggregate_metrics(metrics: list[RunMetrics]) -> dict:
    """Mean and sample std (n-1) over successful runs.

    A single successful run reports std 0 and sets the single_run flag.
    """
    ok = [m for m in metrics if not m.failed]
    if not ok:
        raise NoSuccessfulRuns(f"all {len(metrics)} runs failed")
    tsum = np.array([m.rmse_tsum for m in ok])
    v = np.array([m.rmse_v for m in ok])
    single = len(ok) == 1
    return {
        "rmse_tsum_mean": float(tsum.mean()),
        "rmse_tsum_std": 0.0 if single else float(tsum.std(ddof=1)),
        "rmse_v_mean": float(v.mean()),
        "rmse_v_std": 0.0 if single else float(v.std(ddof=1)),
        "failed_runs": len(metrics) - len(ok),
        "single_run": single,
    }


SWEEP_PARAMS = ("particles", "partition")


def run_sweep(param: str, values, runs: int, base: ExperimentConfig) -> list[dict]:
    """One experiment per value of the swept parameter; one row per value.

    Rows where every run failed are flagged rather than dropped, with
    null aggregates.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    rows = []
    for value in values:
        overrides = {param: value, "runs": runs}
        cfg_dict = {**_cfg_as_dict(base), **overrides}
        cfg = _cfg_from_dict(cfg_dict)
        metrics = run_filter_experiment(cfg)
        row = {"param": param, "value": value}
        try:
            agg = aggregate_metrics(metrics)
        except NoSuccessfulRuns:
            row.update(
                mean_rmse_tsum=None, std_rmse_tsum=None, mean_rmse_v=None,
                std_rmse_v=None, mean_ess_fraction=None, failed_runs=len(metrics),
            )
            rows.append(row)
            continue
        ok = [m for m in metrics if not m.failed]
        n = cfg.particles
        ess_fraction = float(np.mean([np.mean(m.ess_trace) / n for m in ok]))
        row.update(
            mean_rmse_tsum=agg["rmse_tsum_mean"], std_rmse_tsum=agg["rmse_tsum_std"],
            mean_rmse_v=agg["rmse_v_mean"], std_rmse_v=agg["rmse_v_std"],
            mean_ess_fraction=ess_fraction, failed_runs=agg["failed_runs"],
        )
        rows.append(row)
    return rows


def run_comparison(base: ExperimentConfig, runs: int | None = None) -> list[dict]:
    """Both filters of the comparison protocol on shared per-seed data."""
    xnpf_cfg, bpf_cfg = comparison_configs(base)
    rows = []
    for cfg in (bpf_cfg, xnpf_cfg):
        if runs is not None:
            cfg = _cfg_from_dict({**_cfg_as_dict(cfg), "runs": runs})
        metrics = run_filter_experiment(cfg)
        agg = aggregate_metrics(metrics)
        ok = [m for m in metrics if not m.failed]
        rows.append(
            {
                "filter": cfg.filter,
                "particles": cfg.particles,
                "partition": cfg.partition,
                "mean_rmse_tsum": agg["rmse_tsum_mean"],
                "std_rmse_tsum": agg["rmse_tsum_std"],
                "mean_rmse_v": agg["rmse_v_mean"],
                "std_rmse_v": agg["rmse_v_std"],
                "mean_eval_count": float(np.mean([m.eval_count for m in ok])),
                "failed_runs": agg["failed_runs"],
            }
        )
    return rows


def _cfg_as_dict(cfg: ExperimentConfig) -> dict:
    from .config import config_to_dict

    return config_to_dict(cfg)


def _cfg_from_dict(data: dict) -> ExperimentConfig:
    from .config import config_from_dict

    return config_from_dict(data)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_truth_csv(truth: np.ndarray, obs: np.ndarray, path) -> None:
    """One row per day t = 1..days, full double precision."""
    lines = ["t,T,Tstar,v,beta,z1,z2"]
    for t in range(truth.shape[0]):
        cells = [str(t + 1)] + [_fmt(float(x)) for x in (*truth[t], *obs[t])]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_json(metrics: list[RunMetrics], path) -> None:
    payload = {
        "runs": [
            {
                "seed": m.seed,
                "rmse_tsum": m.rmse_tsum,
                "rmse_v": m.rmse_v,
                "eval_count": m.eval_count,
                "ess_trace": m.ess_trace,
                "failed": m.failed,
            }
            for m in metrics
        ],
        "summary": aggregate_metrics(metrics),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


_SWEEP_COLUMNS = (
    "param", "value", "mean_rmse_tsum", "std_rmse_tsum",
    "mean_rmse_v", "std_rmse_v", "mean_ess_fraction", "failed_runs",
)

_COMPARE_COLUMNS = (
    "filter", "particles", "partition", "mean_rmse_tsum", "std_rmse_tsum",
    "mean_rmse_v", "std_rmse_v", "mean_eval_count", "failed_runs",
)


def _write_rows_csv(rows: list[dict], columns: tuple, path) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(rows: list[dict], path) -> None:
    _write_rows_csv(rows, _SWEEP_COLUMNS, path)


def write_comparison_csv(rows: list[dict], path) -> None:
    _write_rows_csv(rows, _COMPARE_COLUMNS, path)
