"""fit/predict front end: parameter plumbing, validation, reproducibility."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from xnpf.estimators import BootstrapStateEstimator, XnpfStateEstimator
from xnpf.model import StateSpaceModel


class Drift1D(StateSpaceModel):
    state_dim = 1
    obs_dim = 1

    def transition_sample(self, states, rng):
        return states + rng.standard_normal(states.shape)

    def transition_log_density(self, new_states, prev_states):
        r = (np.atleast_2d(new_states) - np.atleast_2d(prev_states))[:, 0]
        return -0.5 * r**2 - 0.5 * math.log(2 * math.pi)

    def observation_log_likelihood(self, z, states):
        r = z[0] - np.atleast_2d(states)[:, 0]
        return -0.5 * r**2 - 0.5 * math.log(2 * math.pi)


def make(cls=XnpfStateEstimator, **kw):
    kw.setdefault("model", Drift1D())
    kw.setdefault("n_particles", 8)
    kw.setdefault("xnes_iterations", 2)
    kw.setdefault("xnes_population", 4)
    kw.setdefault("init_center", [0.0])
    kw.setdefault("init_spread", [1.0])
    kw.setdefault("random_state", 0)
    return cls(**kw)


OBS = np.random.default_rng(1).normal(size=(7, 1))


class TestParams:
    def test_get_set_clone(self):
        est = make(partition=0.4)
        params = est.get_params()
        assert params["partition"] == 0.4
        est.set_params(partition=0.6)
        assert est.partition == 0.6
        dup = clone(est)
        assert dup.partition == 0.6
        assert dup is not est

    def test_constructor_stores_unmodified(self):
        sentinel = [600.0, 5.0, 80.0, -9.0]
        est = XnpfStateEstimator(init_center=sentinel)
        assert est.init_center is sentinel


class TestFit:
    def test_attributes_and_shapes(self):
        est = make().fit(OBS)
        assert est.state_estimates_.shape == (7, 1)
        assert est.ess_trace_.shape == (7,)
        assert est.weights_history_.shape == (7, 8)
        assert est.n_features_in_ == 1
        assert np.all((est.ess_trace_ >= 1.0) & (est.ess_trace_ <= 8.0))

    def test_eval_count_pins_filter_kind(self):
        x = make().fit(OBS)
        assert x.eval_count_ == 7 * (8 + 2 * 4)
        b = make(BootstrapStateEstimator).fit(OBS)
        assert b.eval_count_ == 7 * 8

    def test_reproducible_by_int_seed(self):
        a = make(random_state=42).fit(OBS)
        b = make(random_state=42).fit(OBS)
        np.testing.assert_array_equal(a.state_estimates_, b.state_estimates_)
        c = make(random_state=43).fit(OBS)
        assert not np.array_equal(a.state_estimates_, c.state_estimates_)

    def test_tracks_drifting_signal(self):
        rng = np.random.default_rng(3)
        path = np.cumsum(rng.standard_normal(40))
        obs = (path + 0.3 * rng.standard_normal(40))[:, None]
        est = make(n_particles=64, random_state=5).fit(obs)
        rmse = np.sqrt(np.mean((est.state_estimates_[:, 0] - path) ** 2))
        assert rmse < 1.0


class TestPredict:
    def test_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            make().predict()

    def test_returns_fitted_estimates(self):
        est = make().fit(OBS)
        np.testing.assert_array_equal(est.predict(), est.state_estimates_)

    def test_predict_with_data_refits(self):
        est = make()
        out = est.predict(OBS)
        np.testing.assert_array_equal(out, est.state_estimates_)

    def test_fit_predict(self):
        a = make().fit_predict(OBS)
        b = make().fit(OBS).state_estimates_
        np.testing.assert_array_equal(a, b)


class TestValidation:
    def test_wrong_channel_count(self):
        with pytest.raises(ValueError, match="channels"):
            make().fit(np.zeros((5, 3)))

    def test_non_finite_rejected(self):
        bad = OBS.copy()
        bad[2, 0] = np.nan
        with pytest.raises(ValueError):
            make().fit(bad)

    def test_one_dimensional_rejected(self):
        with pytest.raises(ValueError):
            make().fit(np.zeros(5))

    def test_missing_init_raises(self):
        est = XnpfStateEstimator(model=Drift1D(), init_center=[0.0])
        with pytest.raises(ValueError, match="init_center and init_spread"):
            est.fit(OBS)

    def test_wrong_init_shape(self):
        est = make(init_center=[0.0, 1.0])
        with pytest.raises(ValueError, match="shape"):
            est.fit(OBS)

    def test_default_model_needs_two_channels(self):
        est = XnpfStateEstimator(
            n_particles=5,
            init_center=[600.0, 5.0, 80.0, -9.0],
            init_spread=[50.0, 10.0, 10.0, 0.5],
            random_state=0,
        )
        with pytest.raises(ValueError, match="channels"):
            est.fit(OBS)
