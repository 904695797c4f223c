"""Infection-model benchmark: ODE, integrator, schedules, measurements,
transition kernel."""

import math

import numpy as np
import pytest
from scipy import stats

from xnpf.hiv import (
    BetaSchedule,
    HivModel,
    HivParams,
    MeasurementNoise,
    beta_schedule,
    disease_free_state,
    endemic_equilibrium,
    hiv_derivatives,
    integrate_day,
    observation_log_likelihood,
    observe,
    rk4_step,
    simulate_truth,
)

PARAMS = HivParams()


class TestDerivatives:
    def test_disease_free_is_equilibrium(self):
        rates = hiv_derivatives(disease_free_state(PARAMS), 3.63e-04, PARAMS)
        np.testing.assert_allclose(rates, 0.0, atol=1e-12)

    def test_disease_free_t_value(self):
        assert disease_free_state(PARAMS)[0] == pytest.approx(802.0435, abs=1e-3)

    def test_pure_decay_without_virus(self):
        state = np.array([500.0, 8.0, 0.0])
        rates = hiv_derivatives(state, 1e-4, PARAMS)
        assert rates[1] == pytest.approx(-PARAMS.zeta * 8.0)

    def test_vectorized_rows(self):
        states = np.array([[500.0, 8.0, 0.0], [600.0, 1.0, 10.0]])
        out = hiv_derivatives(states, np.array([1e-5, 2e-5]), PARAMS)
        assert out.shape == (2, 3)
        np.testing.assert_allclose(out[0], hiv_derivatives(states[0], 1e-5, PARAMS))


class TestBetaSchedule:
    def test_square_high_phase(self):
        sch = BetaSchedule(waveform="square")
        assert beta_schedule(0.0, sch) == pytest.approx(3.63e-04)

    def test_square_low_phase(self):
        sch = BetaSchedule(waveform="square")
        assert beta_schedule(0.75 * sch.period, sch) == pytest.approx(7.26e-06)

    def test_periodicity(self):
        for wf in ("square", "sinusoid"):
            sch = BetaSchedule(waveform=wf)
            for t in (0.0, 3.3, 12.5, 24.999):
                assert beta_schedule(t, sch) == pytest.approx(
                    beta_schedule(t + sch.period, sch), rel=1e-12
                )

    def test_bounded(self):
        for wf in ("square", "sinusoid"):
            sch = BetaSchedule(waveform=wf)
            vals = [beta_schedule(t, sch) for t in np.linspace(0, 50, 400)]
            assert min(vals) >= sch.low - 1e-18
            assert max(vals) <= sch.high + 1e-18

    def test_validation(self):
        with pytest.raises(ValueError):
            BetaSchedule(duty=0.0)
        with pytest.raises(ValueError):
            BetaSchedule(high=1e-6, low=1e-4)
        with pytest.raises(ValueError):
            BetaSchedule(waveform="triangle")


class TestIntegrator:
    def test_disease_free_fixed_point(self):
        sch = BetaSchedule(waveform="square")
        y = disease_free_state(PARAMS)
        out = rk4_step(y, 0.0, 0.5, sch, PARAMS)
        assert np.max(np.abs(out - y)) < 1e-9

    def test_endemic_fixed_point_constant_beta(self):
        beta = 1e-4
        eq = endemic_equilibrium(PARAMS, beta)
        assert np.all(eq > 0)
        np.testing.assert_allclose(hiv_derivatives(eq, beta, PARAMS), 0.0, atol=1e-9)
        out = integrate_day(eq, beta, PARAMS, dt=0.01)[0]
        np.testing.assert_allclose(out, eq, rtol=1e-12, atol=1e-9)

    def test_fourth_order_convergence(self):
        beta = 5e-5
        y0 = endemic_equilibrium(PARAMS, 1e-4) * np.array([1.3, 0.7, 1.4])
        ref = integrate_day(y0, beta, PARAMS, dt=1.0 / 1024)[0]
        errs = []
        for dt in (1.0 / 32, 1.0 / 64, 1.0 / 128):
            out = integrate_day(y0, beta, PARAMS, dt=dt)[0]
            errs.append(np.linalg.norm(out - ref))
        for a, b in zip(errs, errs[1:]):
            assert 12.0 <= a / b <= 20.0

    def test_agrees_with_tiny_step_euler(self):
        beta = 5e-5
        y0 = endemic_equilibrium(PARAMS, 1e-4) * np.array([1.1, 0.9, 1.2])
        rk4 = integrate_day(y0, beta, PARAMS, dt=0.01)[0]
        y = y0.copy()
        h = 1e-4
        for _ in range(10_000):
            y = y + h * hiv_derivatives(y, beta, PARAMS)
        np.testing.assert_allclose(rk4, y, rtol=1e-4)

    def test_state_box_clamps_runaway(self):
        # a particle in the unstable corner must come back finite and boxed
        y0 = np.array([[9.9e5, 9.9e5, 9.9e5]])
        out = integrate_day(y0, math.exp(-7.2), PARAMS, dt=0.01)
        assert np.all(np.isfinite(out))
        assert np.all(out >= 0.0)
        assert np.all(out <= 1.0e6)


class TestMeasurement:
    def test_zero_noise_map(self):
        class Still:
            def normal(self, loc, scale):
                return 0.0

        z = observe(np.array([800.0, 2.0, 50.0]), MeasurementNoise(), Still())
        np.testing.assert_allclose(z, [802.0, 50.0])

    def test_channel1_variance(self):
        rng = np.random.default_rng(8)
        state = np.array([800.0, 2.0, 50.0])
        zs = np.array([observe(state, MeasurementNoise(), rng) for _ in range(10_000)])
        assert 0.04 <= zs[:, 0].var() <= 0.06

    def test_residual_distribution(self):
        rng = np.random.default_rng(21)
        state = np.array([300.0, 10.0, 99.0])
        zs = np.array([observe(state, MeasurementNoise(), rng) for _ in range(4000)])
        r2 = zs[:, 1] - 99.0
        assert abs(r2.mean()) < 0.05
        assert 0.9 <= r2.var() <= 1.1

    def test_loglik_exact_match_value(self):
        # normalization constant of the two channels; oracle:
        # sum of scipy.stats.norm logpdfs at zero residual
        want = stats.norm.logpdf(0, 0, math.sqrt(0.05)) + stats.norm.logpdf(0, 0, 1.0)
        state = np.array([800.0, 2.0, 50.0, -9.0])
        got = observation_log_likelihood(np.array([802.0, 50.0]), state[:3], MeasurementNoise())
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(-0.3400, abs=1e-4)

    def test_loglik_monotone_in_v_residual(self):
        state = np.array([800.0, 2.0, 50.0])
        vals = [
            observation_log_likelihood(np.array([802.0, 50.0 + dv]), state, MeasurementNoise())
            for dv in (0.0, 0.5, 1.0, 2.0, 5.0)
        ]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_channel_asymmetry(self):
        state = np.array([800.0, 2.0, 50.0])
        a = observation_log_likelihood(np.array([803.0, 50.0]), state, MeasurementNoise())
        b = observation_log_likelihood(np.array([802.0, 51.0]), state, MeasurementNoise())
        assert a != pytest.approx(b)


class TestSimulateTruth:
    def test_day_count_and_shapes(self):
        truth, obs = simulate_truth(
            PARAMS, BetaSchedule(), MeasurementNoise(), 190, "equilibrium",
            np.random.default_rng(0),
        )
        assert truth.shape == (190, 4)
        assert obs.shape == (190, 2)

    def test_fixed_seed_identical(self):
        args = (PARAMS, BetaSchedule(), MeasurementNoise(), 30, "equilibrium")
        t1, o1 = simulate_truth(*args, np.random.default_rng(5))
        t2, o2 = simulate_truth(*args, np.random.default_rng(5))
        np.testing.assert_array_equal(t1, t2)
        np.testing.assert_array_equal(o1, o2)

    def test_observations_near_truth_with_tiny_noise(self):
        truth, obs = simulate_truth(
            PARAMS, BetaSchedule(), MeasurementNoise(1e-20, 1e-20), 20, "equilibrium",
            np.random.default_rng(1),
        )
        np.testing.assert_allclose(obs[:, 0], truth[:, 0] + truth[:, 1], atol=1e-6)
        np.testing.assert_allclose(obs[:, 1], truth[:, 2], atol=1e-6)

    def test_truth_nonnegative(self):
        for wf in ("square", "sinusoid"):
            truth, _ = simulate_truth(
                PARAMS, BetaSchedule(waveform=wf), MeasurementNoise(), 190, "equilibrium",
                np.random.default_rng(2),
            )
            assert np.all(truth[:, :3] >= 0.0)

    def test_explicit_init(self):
        truth, _ = simulate_truth(
            PARAMS, BetaSchedule(), MeasurementNoise(), 5, (1000.0, 0.0, 1e-3),
            np.random.default_rng(3),
        )
        assert truth.shape == (5, 4)

    def test_bad_init_rejected(self):
        with pytest.raises(ValueError):
            simulate_truth(
                PARAMS, BetaSchedule(), MeasurementNoise(), 5, "midpoint",
                np.random.default_rng(0),
            )


class TestTransitionKernel:
    def test_near_deterministic_limit(self):
        model = HivModel(sigma_l=1e-12, log_beta_walk=1e-12)
        x = np.array([[600.0, 4.0, 80.0, -9.0]])
        out = model.transition_sample(x, np.random.default_rng(0))
        img = integrate_day(x[:, :3], np.exp(x[:, 3]), PARAMS, model.dt)
        np.testing.assert_allclose(out[0, :3], img[0], atol=1e-9)
        assert out[0, 3] == pytest.approx(-9.0, abs=1e-9)

    def test_sample_mean_matches_image(self):
        model = HivModel(sigma_l=10.0, log_beta_walk=1e-12)
        x = np.tile(np.array([600.0, 4.0, 80.0, -9.0]), (10_000, 1))
        out = model.transition_sample(x, np.random.default_rng(4))
        img = integrate_day(x[:1, :3], np.exp(x[:1, 3]), PARAMS, model.dt)[0]
        # CLT bound: 3 sigma_l / sqrt(n)
        np.testing.assert_allclose(out[:, :3].mean(axis=0), img, atol=3 * 10.0 / 100.0)

    def test_density_symmetric_around_image(self):
        model = HivModel()
        xp = np.array([[600.0, 4.0, 80.0, -9.0]])
        img = integrate_day(xp[:, :3], np.exp(xp[:, 3]), PARAMS, model.dt)[0]
        delta = np.array([3.0, -1.0, 2.0])
        hi = np.concatenate([img + delta, [-9.0]])[None]
        lo = np.concatenate([img - delta, [-9.0]])[None]
        a = model.transition_log_density(hi, xp)
        b = model.transition_log_density(lo, xp)
        assert a[0] == pytest.approx(b[0], rel=1e-12)

    def test_density_peaks_at_image(self):
        model = HivModel()
        xp = np.array([[600.0, 4.0, 80.0, -9.0]])
        img = integrate_day(xp[:, :3], np.exp(xp[:, 3]), PARAMS, model.dt)[0]
        peak = np.concatenate([img, [-9.0]])[None]
        off = peak + np.array([[5.0, 0.0, 0.0, 0.0]])
        assert model.transition_log_density(peak, xp)[0] > model.transition_log_density(off, xp)[0]

    def test_physical_slices_normalize(self):
        # each physical channel, with the rest fixed, is a Gaussian slice:
        # its quadrature equals the product of the other channels' fixed
        # factors, computed independently with scipy
        model = HivModel(sigma_l=7.0, log_beta_walk=0.2)
        xp = np.array([[600.0, 4.0, 80.0, -9.0]])
        lb_child = -9.1
        img = integrate_day(xp[:, :3], np.exp(np.array([lb_child])), PARAMS, model.dt)[0]
        base = np.concatenate([img + np.array([2.0, -1.0, 4.0]), [lb_child]])
        for j in range(3):
            us = np.linspace(img[j] - 70.0, img[j] + 70.0, 4001)
            children = np.tile(base, (us.size, 1))
            children[:, j] = us
            dens = np.exp(model.transition_log_density(children, np.tile(xp[0], (us.size, 1))))
            got = np.trapezoid(dens, us)
            others = [
                stats.norm.pdf(base[i], img[i], 7.0) for i in range(3) if i != j
            ]
            want = math.prod(others) * stats.norm.pdf(lb_child, -9.0, 0.2)
            assert got == pytest.approx(want, rel=1e-6)

    def test_log_beta_factor_normalizes(self):
        # pin the physical residuals at zero for every candidate log beta and
        # strip their constant factor; what remains is the walk Gaussian
        model = HivModel(sigma_l=7.0, log_beta_walk=0.2)
        xp = np.array([600.0, 4.0, 80.0, -9.0])
        us = np.linspace(-9.0 - 2.0, -9.0 + 2.0, 2001)
        imgs = integrate_day(np.tile(xp[:3], (us.size, 1)), np.exp(us), PARAMS, model.dt)
        children = np.concatenate([imgs, us[:, None]], axis=1)
        dens = np.exp(model.transition_log_density(children, np.tile(xp, (us.size, 1))))
        phys_const = (2 * math.pi * 7.0**2) ** 1.5
        assert np.trapezoid(dens, us) * phys_const == pytest.approx(1.0, abs=1e-6)

    def test_log_beta_stays_in_box(self):
        model = HivModel(log_beta_walk=5.0)
        x = np.tile(np.array([600.0, 4.0, 80.0, -8.0]), (500, 1))
        out = model.transition_sample(x, np.random.default_rng(7))
        assert out[:, 3].min() >= -16.0
        assert out[:, 3].max() <= -7.2

    def test_constrain_boxes(self):
        model = HivModel()
        x = np.array([[-5.0, 2e6, 3.0, -20.0], [1.0, 2.0, 3.0, 0.0]])
        out = model.constrain(x)
        assert out[0, 0] == 0.0
        assert out[0, 1] == 1.0e6
        assert out[0, 3] == -16.0
        assert out[1, 3] == -7.2

    def test_validation(self):
        with pytest.raises(ValueError):
            HivModel(sigma_l=0.0)
        with pytest.raises(ValueError):
            HivModel(log_beta_walk=-0.1)
        with pytest.raises(ValueError):
            HivParams(s=-1.0)
        with pytest.raises(ValueError):
            MeasurementNoise(var1=0.0)
