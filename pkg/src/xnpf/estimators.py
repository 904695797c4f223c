"""Estimator-style front end for the filters.

Wraps the functional filter cores in the familiar fit/predict surface:
construct with hyperparameters, fit on an observation sequence, read the
per-day state estimates off the fitted attributes. Filtering is
transductive (estimates exist only for the sequence it was fit on), so
predict returns the fitted estimates rather than generalizing to new data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .filtering import XnpfConfig, run_filter
from .hiv import HivModel
from .model import StateSpaceModel
from .xnes import XnesConfig

__all__ = ["XnpfStateEstimator", "BootstrapStateEstimator"]


class _FilterEstimator(BaseEstimator):
    """Shared estimator plumbing; subclasses fix the filter kind."""

    _kind = ""

    def __init__(
        self,
        model: StateSpaceModel | None = None,
        n_particles: int = 10,
        partition: float = 0.2,
        xnes_iterations: int = 5,
        xnes_population: int | None = None,
        resampler: str | None = None,
        mixture_coeffs: str = "realized",
        ess_threshold: float | None = None,
        init_center=None,
        init_spread=None,
        random_state=None,
    ):
        self.model = model
        self.n_particles = n_particles
        self.partition = partition
        self.xnes_iterations = xnes_iterations
        self.xnes_population = xnes_population
        self.resampler = resampler
        self.mixture_coeffs = mixture_coeffs
        self.ess_threshold = ess_threshold
        self.init_center = init_center
        self.init_spread = init_spread
        self.random_state = random_state

    def _resolve(self):
        model = self.model if self.model is not None else HivModel()
        resampler = self.resampler
        if resampler is None:
            resampler = "sus" if self._kind == "xnpf" else "multinomial"
        cfg = XnpfConfig(
            n_particles=self.n_particles,
            partition=self.partition,
            xnes=XnesConfig(population=self.xnes_population, iterations=self.xnes_iterations),
            resampler=resampler,
            mixture_coeffs=self.mixture_coeffs,
            ess_threshold=self.ess_threshold,
        )
        if self.init_center is None or self.init_spread is None:
            raise ValueError(
                "init_center and init_spread are required: the filter needs an "
                "initial cloud in state space"
            )
        center = np.asarray(self.init_center, dtype=float)
        spread = np.asarray(self.init_spread, dtype=float)
        if center.shape != (model.state_dim,) or spread.shape != (model.state_dim,):
            raise ValueError(f"init_center and init_spread must have shape ({model.state_dim},)")
        return model, cfg, center, spread

    def fit(self, Z, y=None):
        """Run the filter over the observation sequence Z of shape
        (n_days, obs_dim); estimates land in state_estimates_."""
        model, cfg, center, spread = self._resolve()
        Z = check_array(Z, ensure_2d=True, dtype=float, ensure_all_finite=True)
        if Z.shape[1] != model.obs_dim:
            raise ValueError(f"expected {model.obs_dim} observation channels, got {Z.shape[1]}")
        if Z.shape[0] < 1:
            raise ValueError("need at least one observation")
        # derive a 64-bit seed through sklearn's RNG contract so int seeds,
        # None, and RandomState instances all behave
        seed = check_random_state(self.random_state).randint(0, 2**32)
        result = run_filter(self._kind, Z, model, cfg, seed, center, spread)
        self.n_features_in_ = Z.shape[1]
        self.state_estimates_ = result.estimates
        self.ess_trace_ = result.ess_trace
        self.eval_count_ = result.eval_count
        self.weights_history_ = result.weights_history
        return self

    def predict(self, Z=None):
        """Per-day posterior-mean state estimates of the fitted sequence.

        Accepts Z only to refit in one call (fit_predict semantics).
        """
        if Z is not None:
            return self.fit(Z).state_estimates_
        check_is_fitted(self, "state_estimates_")
        return self.state_estimates_

    def fit_predict(self, Z, y=None):
        return self.fit(Z).state_estimates_


class XnpfStateEstimator(_FilterEstimator):
    """Mixture-proposal particle filter with the estimator interface.

    Exploration fraction `partition` of the cloud proposes from the model's
    transition kernel; the rest proposes from a Gaussian adapted to the
    current observation by the evolution-strategy engine.
    """

    _kind = "xnpf"


class BootstrapStateEstimator(_FilterEstimator):
    """Bootstrap particle filter with the estimator interface."""

    _kind = "bpf"
