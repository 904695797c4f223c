"""Resampling schemes: copy-count guarantees, stream discipline, statistics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xnpf.cloud import ParticleCloud
from xnpf.exceptions import WeightsNotNormalized
from xnpf.resampling import multinomial_resample, resample, sus_resample


def cloud_of(weights):
    w = np.asarray(weights, dtype=float)
    states = np.arange(len(w), dtype=float)[:, None]
    return ParticleCloud(states, w)


def counts_of(out, n_in):
    idx = out.states[:, 0].astype(int)
    return np.bincount(idx, minlength=n_in)


class ScriptedRng:
    """Duck-typed stand-in returning a fixed uniform; lets hand traces pin u."""

    def __init__(self, value):
        self.value = value

    def random(self, *args):
        if args:
            raise AssertionError("SUS must draw a single scalar")
        return self.value


class TestSus:
    def test_all_mass_on_one(self):
        out = sus_resample(cloud_of([1.0, 0.0, 0.0]), np.random.default_rng(0))
        np.testing.assert_array_equal(out.states[:, 0], 0.0)
        np.testing.assert_allclose(out.weights, 1.0 / 3.0)

    def test_hand_trace(self):
        # u = 0.1 with N=5 gives pointers 0.1,0.3,0.5,0.7,0.9 against
        # cumulative (0.5, 0.8, 1.0, 1.0, 1.0) -> counts (2, 2, 1)
        w = np.array([0.5, 0.3, 0.2, 0.0, 0.0])
        cloud = ParticleCloud(np.arange(5, dtype=float)[:, None], w)
        out = sus_resample(cloud, ScriptedRng(0.5))  # u = 0.5/5 = 0.1
        np.testing.assert_array_equal(counts_of(out, 5), [2, 2, 1, 0, 0])

    def test_ties_choose_later_particle(self):
        # pointer exactly on a cumulative boundary: strict ">" moves past
        # the boundary particle
        cloud = ParticleCloud(np.arange(2, dtype=float)[:, None], np.array([0.5, 0.5]))
        out = sus_resample(cloud, ScriptedRng(0.0))  # pointers 0.0, 0.5
        np.testing.assert_array_equal(np.sort(out.states[:, 0]), [0.0, 1.0])

    def test_uniform_weights_identity_multiset(self):
        n = 8
        cloud = ParticleCloud(np.arange(n, dtype=float)[:, None], np.full(n, 1.0 / n))
        out = sus_resample(cloud, np.random.default_rng(5))
        np.testing.assert_array_equal(np.sort(out.states[:, 0]), np.arange(n))

    def test_unnormalized_rejected(self):
        with pytest.raises(WeightsNotNormalized):
            sus_resample(cloud_of([0.5, 0.4]), np.random.default_rng(0))

    def test_consumes_exactly_one_draw(self):
        rng_a = np.random.default_rng(77)
        rng_b = np.random.default_rng(77)
        sus_resample(cloud_of([0.25, 0.25, 0.25, 0.25]), rng_a)
        rng_b.random()
        assert rng_a.random() == rng_b.random()

    @given(
        st.integers(min_value=1, max_value=64),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=300, deadline=None)
    def test_copy_count_floor_ceil(self, n, seed):
        rng = np.random.default_rng(seed)
        w = rng.random(n)
        w /= w.sum()
        out = sus_resample(ParticleCloud(np.arange(n, dtype=float)[:, None], w), rng)
        counts = counts_of(out, n)
        nw = n * w
        assert np.all(counts >= np.floor(nw) - 1e-9)
        assert np.all(counts <= np.ceil(nw) + 1e-9)


class TestMultinomial:
    def test_deterministic_support(self):
        out = multinomial_resample(cloud_of([1.0, 0.0]), np.random.default_rng(0))
        np.testing.assert_array_equal(out.states[:, 0], 0.0)

    def test_single_particle(self):
        out = multinomial_resample(cloud_of([1.0]), np.random.default_rng(0))
        assert out.n_particles == 1
        np.testing.assert_allclose(out.weights, 1.0)

    def test_empirical_frequency(self):
        # 10^4 draws in one call: a large cloud whose mass sits on two states
        n = 10_000
        w = np.r_[0.5, 0.5, np.zeros(n - 2)]
        cloud = ParticleCloud(np.arange(n, dtype=float)[:, None], w)
        out = multinomial_resample(cloud, np.random.default_rng(123))
        freq0 = float((out.states[:, 0] == 0).mean())
        assert 0.48 <= freq0 <= 0.52

    def test_unnormalized_rejected(self):
        with pytest.raises(WeightsNotNormalized):
            multinomial_resample(cloud_of([0.7, 0.7]), np.random.default_rng(0))

    def test_consumes_exactly_n_draws(self):
        n = 6
        rng_a = np.random.default_rng(9)
        rng_b = np.random.default_rng(9)
        multinomial_resample(cloud_of(np.full(n, 1.0 / n)), rng_a)
        rng_b.random(n)
        assert rng_a.random() == rng_b.random()

    def test_variance_not_lower_than_sus(self):
        rng = np.random.default_rng(2024)
        w = np.array([0.4, 0.3, 0.2, 0.1])
        reps = 400
        var = {}
        for fn in (sus_resample, multinomial_resample):
            all_counts = np.array(
                [
                    counts_of(fn(cloud_of(w), np.random.default_rng(rng.integers(2**32))), 4)
                    for _ in range(reps)
                ]
            )
            var[fn.__name__] = all_counts.var(axis=0).sum()
        assert var["sus_resample"] <= var["multinomial_resample"]


class TestDispatch:
    def test_schemes(self):
        c = cloud_of([0.5, 0.5])
        for scheme in ("sus", "multinomial"):
            out = resample(c, scheme, np.random.default_rng(1))
            assert out.n_particles == 2
            np.testing.assert_allclose(out.weights, 0.5)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            resample(cloud_of([1.0]), "stratified", np.random.default_rng(0))

    def test_no_new_states_invented(self):
        rng = np.random.default_rng(31)
        states = rng.normal(size=(12, 3))
        w = rng.random(12)
        w /= w.sum()
        out = resample(ParticleCloud(states, w), "sus", rng)
        pool = {tuple(row) for row in states}
        assert all(tuple(row) in pool for row in out.states)
