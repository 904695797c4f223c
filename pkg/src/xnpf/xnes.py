"""Exponential natural evolution strategies.

Adapts a Gaussian search distribution N(m, sigma^2 * B @ B.T) by natural-
gradient ascent on rank-based utilities. The exponential parametrization
splits the covariance into a scalar step size sigma and a det-1 shape
matrix B, so scale and shape adapt on separate learning rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalFailure

__all__ = [
    "SearchDistribution",
    "XnesConfig",
    "default_population",
    "default_rate",
    "rank_utilities",
    "sample_population",
    "natural_gradient_update",
    "run_xnes",
    "gaussian_log_density",
]

# eigenvalues of the expm argument are clipped here before exponentiation;
# a no-op at sane learning rates, only guards against absurd gradients
_EXPM_CLAMP = 40.0


@dataclass
class SearchDistribution:
    """Gaussian N(mean, step_size^2 * shape @ shape.T) with det(shape) = 1."""

    mean: np.ndarray
    step_size: float
    shape: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.shape = np.asarray(self.shape, dtype=float)
        d = self.mean.shape[0]
        if self.shape.shape != (d, d):
            raise ValueError(f"shape matrix must be {d}x{d}")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        """Full covariance sigma^2 * B @ B.T."""
        return self.step_size**2 * (self.shape @ self.shape.T)


def default_population(d: int) -> int:
    return 4 + int(math.floor(3 * math.log(d)))


def default_rate(d: int) -> float:
    """Shared default for the sigma and shape learning rates."""
    return (9 + 3 * math.log(d)) / (5 * d * math.sqrt(d))


@dataclass
class XnesConfig:
    population: int | None = None  # None -> 4 + floor(3 ln d)
    iterations: int = 5
    eta_mean: float = 1.0
    eta_sigma: float | None = None  # None -> (9 + 3 ln d) / (5 d sqrt(d))
    eta_shape: float | None = None

    def resolve(self, d: int) -> tuple[int, float, float, float]:
        lam = self.population if self.population is not None else default_population(d)
        if lam < 2:
            raise ValueError("population must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        es = self.eta_sigma if self.eta_sigma is not None else default_rate(d)
        eb = self.eta_shape if self.eta_shape is not None else default_rate(d)
        return lam, self.eta_mean, es, eb


def rank_utilities(fitnesses, lam: int) -> np.ndarray:
    """Zero-sum rank-based utilities, aligned with the input order.

    Samples are ranked by fitness descending with stable ties by index;
    raw utility of rank r (1-based) is max(0, ln(lam/2 + 1) - ln r),
    then normalized to sum 1 and centered by -1/lam.
    """
    f = np.asarray(fitnesses, dtype=float)
    if lam != f.shape[0] or lam < 2:
        raise ValueError("lam must equal len(fitnesses) and be >= 2")
    order = np.argsort(-f, kind="stable")
    ranks = np.empty(lam, dtype=int)
    ranks[order] = np.arange(1, lam + 1)
    raw = np.maximum(0.0, math.log(lam / 2 + 1) - np.log(ranks))
    return raw / raw.sum() - 1.0 / lam


def sample_population(
    dist: SearchDistribution, lam: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw lam samples; returns (s, z) with z = m + sigma * B @ s.

    s is the (lam, d) standard-normal block reused by the update.
    Consumes exactly one standard_normal((lam, d)) call from the stream.
    """
    s = rng.standard_normal((lam, dist.dim))
    z = dist.mean + dist.step_size * (s @ dist.shape.T)
    return s, z


def _expm_symmetric(a: np.ndarray) -> np.ndarray:
    try:
        evals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    evals = np.clip(evals, -_EXPM_CLAMP, _EXPM_CLAMP)
    return (vecs * np.exp(evals)) @ vecs.T


def natural_gradient_update(
    dist: SearchDistribution,
    s: np.ndarray,
    utilities: np.ndarray,
    cfg: XnesConfig,
) -> SearchDistribution:
    """One natural-gradient step from standard-normal samples s and utilities.

    G_delta = sum u_k s_k, G_M = sum u_k (s_k s_k^T - I); the trace part of
    G_M drives sigma, the traceless part drives B through the matrix
    exponential. det(B) is renormalized to exactly 1 afterward (the update
    preserves it analytically, but round-off drifts over thousands of steps);
    the renormalization factor folds into sigma, so sigma * B is unchanged.
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(utilities, dtype=float)
    d = dist.dim
    lam, eta_m, eta_s, eta_b = cfg.resolve(d)

    g_delta = u @ s
    g_m = np.einsum("k,ki,kj->ij", u, s, s) - u.sum() * np.eye(d)
    g_sigma = np.trace(g_m) / d
    g_b = g_m - g_sigma * np.eye(d)

    mean = dist.mean + eta_m * dist.step_size * (dist.shape @ g_delta)
    sigma = dist.step_size * math.exp(eta_s / 2 * g_sigma)
    shape = dist.shape @ _expm_symmetric(eta_b / 2 * g_b)

    sign, logdet = np.linalg.slogdet(shape)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalFailure("shape matrix lost positive determinant")
    c = math.exp(logdet / d)
    shape /= c
    sigma *= c

    if not (np.all(np.isfinite(mean)) and np.isfinite(sigma) and np.all(np.isfinite(shape))):
        raise NumericalFailure("non-finite search distribution after update")
    return SearchDistribution(mean, sigma, shape)


def run_xnes(
    fitness,
    init: SearchDistribution,
    cfg: XnesConfig,
    rng: np.random.Generator,
    vectorized: bool = False,
) -> tuple[SearchDistribution, int]:
    """Iterate sample -> rank -> update for cfg.iterations rounds.

    fitness maps a state vector to a real score (higher is better); pass
    vectorized=True when it accepts an (n, d) block and returns (n,).
    Returns the final distribution and the total fitness evaluation count,
    which is exactly iterations * population.
    """
    dist = init
    lam, *_ = cfg.resolve(init.dim)
    evals = 0
    for _ in range(cfg.iterations):
        s, z = sample_population(dist, lam, rng)
        if vectorized:
            f = np.asarray(fitness(z), dtype=float)
        else:
            f = np.array([fitness(zk) for zk in z], dtype=float)
        evals += lam
        u = rank_utilities(f, lam)
        dist = natural_gradient_update(dist, s, u, cfg)
    return dist, evals


def gaussian_log_density(dist: SearchDistribution, x: np.ndarray) -> np.ndarray | float:
    """Log pdf of N(m, sigma^2 B B^T) at x, via the factored form.

    log det comes from sigma and B directly; the quadratic form solves
    through B instead of forming the covariance. Accepts a single state
    (d,) or a block (n, d); returns a scalar or (n,) accordingly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = dist.dim
    y = np.linalg.solve(dist.shape, (pts - dist.mean).T).T / dist.step_size
    _, logdet_b = np.linalg.slogdet(dist.shape)
    out = (
        -0.5 * d * math.log(2 * math.pi)
        - d * math.log(dist.step_size)
        - logdet_b
        - 0.5 * np.sum(y * y, axis=1)
    )
    return float(out[0]) if single else out
