"""Weighted particle representation of a filtering posterior.

A cloud is a set of N state vectors with non-negative weights. States are
stored as an (N, d) float array, weights as an (N,) float array; all
statistics below assume weights have been normalized to sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import AllWeightsZero, LengthMismatch

__all__ = [
    "ParticleCloud",
    "normalize_weights",
    "posterior_mean",
    "effective_sample_size",
    "weight_histogram",
    "rmse_series",
]


@dataclass
class ParticleCloud:
    """N weighted particles at one time index.

    states: (N, d) array, one state vector per row, all entries finite.
    weights: (N,) array of non-negative finite weights.
    """

    states: np.ndarray
    weights: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.states.shape[0] != self.weights.shape[0]:
            raise LengthMismatch(
                f"{self.states.shape[0]} states vs {self.weights.shape[0]} weights"
            )
        if self.states.shape[0] < 1:
            raise ValueError("cloud needs at least one particle")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("particle states must be finite")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and non-negative")

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @classmethod
    def uniform(cls, states: np.ndarray, time_index: int = 0) -> "ParticleCloud":
        states = np.atleast_2d(np.asarray(states, dtype=float))
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n), time_index)


def normalize_weights(cloud: ParticleCloud) -> ParticleCloud:
    """Divide weights by their sum; states and order are untouched.

    Raises AllWeightsZero when the sum is zero or non-finite, which is
    how a diverged filter step surfaces.
    """
    total = cloud.weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise AllWeightsZero(f"weight sum is {total!r}")
    return ParticleCloud(cloud.states, cloud.weights / total, cloud.time_index)


def posterior_mean(cloud: ParticleCloud) -> np.ndarray:
    """Weighted mean state, the point estimate behind all RMSE numbers."""
    return cloud.weights @ cloud.states


def effective_sample_size(cloud: ParticleCloud) -> float:
    """ESS = 1 / sum(w_i^2), in [1, N] for normalized weights.

    N means uniform weights, 1 means total degeneracy.
    """
    return float(1.0 / np.sum(cloud.weights**2))


def weight_histogram(cloud: ParticleCloud, bins: int) -> list[tuple[float, int]]:
    """Counts of normalized weights in equal-width bins over [0, max weight].

    Returns (left_edge, count) pairs; counts sum to N.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    top = float(cloud.weights.max())
    if top <= 0.0:
        top = 1.0  # degenerate all-zero cloud: single empty-range bin set
    counts, edges = np.histogram(cloud.weights, bins=bins, range=(0.0, top))
    return [(float(edges[i]), int(counts[i])) for i in range(bins)]


def rmse_series(estimates, truth) -> float:
    """Root-mean-square error between two equal-length series."""
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truth, dtype=float).ravel()
    if est.shape != tru.shape:
        raise LengthMismatch(f"{est.shape} vs {tru.shape}")
    if est.size < 1:
        raise LengthMismatch("series must have length >= 1")
    return float(np.sqrt(np.mean((est - tru) ** 2)))
