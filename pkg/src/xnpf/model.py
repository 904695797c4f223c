"""Abstract state-space model contract.

A model supplies the three densities every filter needs: a transition
sampler, the matching transition log-density, and the observation
log-likelihood. All three operate on (n, d) blocks of states at once;
scalars in, scalars out is not part of the contract.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

__all__ = ["StateSpaceModel"]


class StateSpaceModel(ABC):
    """Contract a concrete model implements for the filters.

    transition_log_density must be a proper log-pdf in its first argument
    (tests verify this by quadrature on one-dimensional models).
    """

    state_dim: int
    obs_dim: int

    @abstractmethod
    def transition_sample(
        self, states: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw one transition per row of states; returns an (n, d) block."""

    @abstractmethod
    def transition_log_density(
        self, new_states: np.ndarray, prev_states: np.ndarray
    ) -> np.ndarray:
        """Row-wise log p(new | prev); returns (n,)."""

    @abstractmethod
    def observation_log_likelihood(
        self, z: np.ndarray, states: np.ndarray
    ) -> np.ndarray:
        """Row-wise log p(z | state) for one observation; returns (n,)."""

    def constrain(self, states: np.ndarray) -> np.ndarray:
        """Project proposal draws onto the model's valid state region.

        Identity by default; models with hard state bounds override this
        so externally proposed states (not produced by transition_sample)
        respect the same bounds.
        """
        return states
