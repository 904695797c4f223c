"""Resampling: replace a weighted cloud with an equally-weighted one.

Two schemes: stochastic universal sampling (one uniform draw, N evenly
spaced pointers, low variance) and multinomial a.k.a. roulette-wheel
(N independent draws). Stream consumption is fixed per scheme so seeded
runs are bit-reproducible: SUS consumes exactly one uniform, multinomial
exactly N uniforms.
"""

from __future__ import annotations

import numpy as np

from .cloud import ParticleCloud
from .exceptions import WeightsNotNormalized

__all__ = ["sus_resample", "multinomial_resample", "resample", "SCHEMES"]

SCHEMES = ("sus", "multinomial")

_NORM_TOL = 1e-9


def _check_normalized(weights: np.ndarray) -> None:
    total = weights.sum()
    if abs(total - 1.0) > _NORM_TOL:
        raise WeightsNotNormalized(f"weight sum {total!r} differs from 1")


def _select(cumulative: np.ndarray, points: np.ndarray) -> np.ndarray:
    # smallest i with cumulative[i] > p; ties broken toward the later particle
    idx = np.searchsorted(cumulative, points, side="right")
    return np.minimum(idx, len(cumulative) - 1)


def sus_resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Stochastic universal sampling.

    One uniform u in [0, 1/N) places N pointers p_k = u + k/N; pointer p
    selects the smallest index i whose cumulative weight exceeds p. Copy
    counts are guaranteed in {floor(N*w_i), ceil(N*w_i)}.
    """
    _check_normalized(cloud.weights)
    n = cloud.n_particles
    u = rng.random() / n
    points = u + np.arange(n) / n
    idx = _select(np.cumsum(cloud.weights), points)
    return ParticleCloud(cloud.states[idx].copy(), np.full(n, 1.0 / n), cloud.time_index)


def multinomial_resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Roulette-wheel selection: N independent weight-proportional draws."""
    _check_normalized(cloud.weights)
    n = cloud.n_particles
    points = rng.random(n)
    idx = _select(np.cumsum(cloud.weights), points)
    return ParticleCloud(cloud.states[idx].copy(), np.full(n, 1.0 / n), cloud.time_index)


def resample(cloud: ParticleCloud, scheme: str, rng: np.random.Generator) -> ParticleCloud:
    if scheme == "sus":
        return sus_resample(cloud, rng)
    if scheme == "multinomial":
        return multinomial_resample(cloud, rng)
    raise ValueError(f"unknown resampling scheme {scheme!r}; expected one of {SCHEMES}")
