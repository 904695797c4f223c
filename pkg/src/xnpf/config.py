"""Experiment configuration: one flat record that fully determines a run.

Serialized as JSON whose keys mirror the field names exactly; unknown keys
are hard errors so typos cannot silently fall back to defaults. Nested
blocks (params, schedule, noise) follow the same rule.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError
from .filtering import XnpfConfig
from .hiv import BetaSchedule, HivModel, HivParams, MeasurementNoise
from .xnes import XnesConfig

__all__ = [
    "ExperimentConfig",
    "load_config",
    "save_config",
    "build_model",
    "build_filter_config",
    "default_benchmark_config",
    "comparison_configs",
]

# Comparison protocol: the learned-proposal filter at N=25 with a 0.3
# exploration fraction and a 75-evaluation strategy budget against the
# bootstrap baseline at N=100, so both spend exactly 100 likelihood
# evaluations per day.
COMPARISON_XNPF = dict(particles=25, partition=0.3, xnes_iterations=5, xnes_population=15)
COMPARISON_BPF = dict(particles=100)

# The kernel's log-beta walk scale for the comparison protocol. This is
# the smallest scale at which the bootstrap baseline can slew the regime
# transitions of the periodic input and reach channel parity on T + T*;
# the library default below it favors N-robustness of the learned-proposal
# filter instead. Both are measured choices, recorded in the decision log.
COMPARISON_LOG_BETA_WALK = 0.35


@dataclass
class ExperimentConfig:
    """Everything a reproducible experiment needs.

    truth_init is either the string "equilibrium" (start on the attractor
    of beta(0)) or an explicit [T, T*, v] triple. filter_init_spread is the
    per-component standard deviation of the initial cloud around the truth
    start (augmented with log beta(0)).
    """

    filter: str = "xnpf"
    days: int = 190
    runs: int = 10
    master_seed: int = 0
    fixed_truth: bool = False
    out: str | None = None

    particles: int = 10
    partition: float = 0.3
    xnes_iterations: int = 5
    xnes_population: int | None = 15
    sigma_l: float = 10.0
    log_beta_walk: float = 0.2
    resampler: str | None = None  # None: sus for xnpf, multinomial for bpf
    mixture_coeffs: str = "realized"
    ess_threshold: float | None = None

    params: HivParams = field(default_factory=HivParams)
    schedule: BetaSchedule = field(default_factory=BetaSchedule)
    noise: MeasurementNoise = field(default_factory=MeasurementNoise)
    truth_init: str | list = "equilibrium"
    filter_init_spread: list = field(default_factory=lambda: [50.0, 10.0, 10.0, 0.5])
    dt: float = 0.01

    def __post_init__(self):
        if self.filter not in ("bpf", "xnpf"):
            raise ConfigError(f"filter must be 'bpf' or 'xnpf', got {self.filter!r}")
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.particles < 1:
            raise ConfigError("particles must be >= 1")
        if not (0.0 <= self.partition <= 1.0):
            raise ConfigError("partition must be in [0, 1]")
        if self.resampler not in (None, "sus", "multinomial"):
            raise ConfigError(f"unknown resampler {self.resampler!r}")
        if not (isinstance(self.truth_init, str) or len(self.truth_init) == 3):
            raise ConfigError("truth_init must be 'equilibrium' or a 3-element list")
        if len(self.filter_init_spread) != 4:
            raise ConfigError("filter_init_spread needs 4 entries (T, T*, v, log_beta)")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")


_NESTED = {"params": HivParams, "schedule": BetaSchedule, "noise": MeasurementNoise}


def _from_mapping(cls, data: dict, context: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    data = dict(data)
    for key, cls in _NESTED.items():
        if key in data:
            block = data[key]
            if not isinstance(block, dict):
                raise ConfigError(f"{key} must be a JSON object")
            data[key] = _from_mapping(cls, block, key)
    return _from_mapping(ExperimentConfig, data, "config")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        out[f.name] = dataclasses.asdict(value) if f.name in _NESTED else value
    return out


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def build_model(cfg: ExperimentConfig) -> HivModel:
    return HivModel(
        params=cfg.params,
        noise=cfg.noise,
        sigma_l=cfg.sigma_l,
        log_beta_walk=cfg.log_beta_walk,
        dt=cfg.dt,
    )


def build_filter_config(cfg: ExperimentConfig) -> XnpfConfig:
    resampler = cfg.resampler
    if resampler is None:
        resampler = "sus" if cfg.filter == "xnpf" else "multinomial"
    return XnpfConfig(
        n_particles=cfg.particles,
        partition=cfg.partition,
        sigma_l=cfg.sigma_l,
        xnes=XnesConfig(population=cfg.xnes_population, iterations=cfg.xnes_iterations),
        resampler=resampler,
        mixture_coeffs=cfg.mixture_coeffs,
        ess_threshold=cfg.ess_threshold,
    )


def default_benchmark_config() -> ExperimentConfig:
    """The shipped benchmark regime; see the class defaults."""
    return ExperimentConfig()


def comparison_configs(base: ExperimentConfig | None = None) -> tuple[ExperimentConfig, ExperimentConfig]:
    """The two-filter comparison protocol derived from a base config.

    Returns (xnpf_config, bpf_config) sharing the base's model block, days,
    runs, and master seed, with the protocol's particle counts, partition,
    strategy budget, and kernel walk scale pinned on top.
    """
    base = base if base is not None else default_benchmark_config()
    shared = config_to_dict(base)
    xnpf_dict = {**shared, "filter": "xnpf", **COMPARISON_XNPF,
                 "log_beta_walk": COMPARISON_LOG_BETA_WALK}
    bpf_dict = {**shared, "filter": "bpf", **COMPARISON_BPF,
                "log_beta_walk": COMPARISON_LOG_BETA_WALK}
    return config_from_dict(xnpf_dict), config_from_dict(bpf_dict)
