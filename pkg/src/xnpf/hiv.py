"""HIV infection benchmark: three-state ODE with a time-varying infection
rate, RK4 integration, and a two-channel noisy measurement model.

States are (T, T*, v): healthy CD4+ cells, infected cells, free virus.
The infection rate beta follows a periodic schedule in the truth simulator;
the filter estimates it by augmenting the state with log(beta) under a
Gaussian random walk, so the filter-side state is (T, T*, v, log_beta).

Transition kernel (filter side): draw the child's log_beta first, integrate
the ODE one observation interval under the child's beta, then add state
noise. Ordering matters: the day's likelihood then selects directly on the
freshly drawn beta instead of lagging it by one generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import StateSpaceModel

__all__ = [
    "HivParams",
    "BetaSchedule",
    "MeasurementNoise",
    "HivModel",
    "hiv_derivatives",
    "rk4_step",
    "integrate_day",
    "beta_schedule",
    "disease_free_state",
    "endemic_equilibrium",
    "simulate_truth",
    "observe",
    "observation_log_likelihood",
    "DEFAULT_DT",
    "STATE_MAX",
    "LOG_BETA_BOUNDS",
]

# Inner integration step, in days. The v peaks of the periodic regime push
# beta*v above 30/day; at dt = 0.1 that exceeds the RK4 stability region,
# so the default is one hundredth of a day.
DEFAULT_DT = 0.01

# Hard state box for filter-side integration. Particles thrown into the
# unstable corner (high beta, high v) can overflow within one day; the box
# caps them instead of letting inf/nan poison the cloud.
STATE_MAX = 1.0e6

# log_beta box. The upper bound keeps beta*v inside RK4 stability for any
# in-box v; the lower bound is far below every plausible regime value.
LOG_BETA_BOUNDS = (-16.0, -7.2)


@dataclass
class HivParams:
    """ODE parameters (units: cells/uL, virions/uL, days)."""

    s: float = 368.94  # source rate of healthy cells
    d: float = 0.46  # healthy death rate
    beta_base: float = 7.26e-06  # baseline infection rate
    zeta: float = 2.16  # infected death rate
    k: float = 1317.4  # virion production per infected cell
    c: float = 3.6  # virion clearance

    def __post_init__(self):
        for name in ("s", "d", "beta_base", "zeta", "k", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class BetaSchedule:
    """Periodic infection-rate input driving the truth trajectory.

    square: high for the first duty fraction of each period, low after.
    sinusoid: low + (high - low) * (1 + sin(2 pi t / period)) / 2.
    """

    period: float = 25.0
    high: float = 3.63e-04
    low: float = 7.26e-06
    duty: float = 0.5
    waveform: str = "sinusoid"

    def __post_init__(self):
        if not (0 < self.duty < 1):
            raise ValueError("duty must be in (0, 1)")
        if not (self.high > self.low > 0):
            raise ValueError("need high > low > 0")
        if self.waveform not in ("square", "sinusoid"):
            raise ValueError(f"unknown waveform {self.waveform!r}")


@dataclass
class MeasurementNoise:
    """Variances of the two observation channels z1 = T + T*, z2 = v."""

    var1: float = 0.05
    var2: float = 1.0

    def __post_init__(self):
        if not (self.var1 > 0 and self.var2 > 0):
            raise ValueError("variances must be positive")


def hiv_derivatives(states, beta, params: HivParams) -> np.ndarray:
    """Right-hand side of the ODE for (n, 3) states and per-row beta."""
    y = np.atleast_2d(np.asarray(states, dtype=float))
    t, ts, v = y[:, 0], y[:, 1], y[:, 2]
    infect = beta * t * v
    out = np.stack(
        [params.s - params.d * t - infect, infect - params.zeta * ts, params.k * ts - params.c * v],
        axis=1,
    )
    return out[0] if np.asarray(states).ndim == 1 else out


def beta_schedule(t: float, schedule: BetaSchedule) -> float:
    if schedule.waveform == "square":
        phase = (t % schedule.period) / schedule.period
        return schedule.high if phase < schedule.duty else schedule.low
    return schedule.low + (schedule.high - schedule.low) * (
        1 + math.sin(2 * math.pi * t / schedule.period)
    ) / 2


def rk4_step(state, t: float, dt: float, schedule: BetaSchedule, params: HivParams) -> np.ndarray:
    """One classical RK4 step with beta evaluated at the stage sub-times."""
    y = np.asarray(state, dtype=float)
    b0 = beta_schedule(t, schedule)
    bh = beta_schedule(t + dt / 2, schedule)
    b1 = beta_schedule(t + dt, schedule)
    k1 = hiv_derivatives(y, b0, params)
    k2 = hiv_derivatives(y + dt / 2 * k1, bh, params)
    k3 = hiv_derivatives(y + dt / 2 * k2, bh, params)
    k4 = hiv_derivatives(y + dt * k3, b1, params)
    return np.maximum(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)


def integrate_day(
    states,
    beta,
    params: HivParams,
    dt: float = DEFAULT_DT,
    state_max: float = STATE_MAX,
) -> np.ndarray:
    """Integrate (n, 3) states one observation interval (one day) with a
    constant per-row beta, clamping into [0, state_max] every substep.

    The clamp plus nan_to_num keeps runaway particles finite; for states
    in the physical regime at the default dt it never binds.
    """
    y = np.atleast_2d(np.asarray(states, dtype=float)).copy()
    beta = np.asarray(beta, dtype=float)
    n_sub = int(round(1.0 / dt))
    for _ in range(n_sub):
        with np.errstate(invalid="ignore", over="ignore"):
            k1 = hiv_derivatives(y, beta, params)
            k2 = hiv_derivatives(y + dt / 2 * k1, beta, params)
            k3 = hiv_derivatives(y + dt / 2 * k2, beta, params)
            k4 = hiv_derivatives(y + dt * k3, beta, params)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        y = np.clip(np.nan_to_num(y, nan=0.0, posinf=state_max, neginf=0.0), 0.0, state_max)
    return y


def disease_free_state(params: HivParams) -> np.ndarray:
    """(s/d, 0, 0): the virus-free fixed point."""
    return np.array([params.s / params.d, 0.0, 0.0])


def endemic_equilibrium(params: HivParams, beta: float) -> np.ndarray:
    """Coexistence fixed point of the ODE at a constant beta.

    T = zeta c / (beta k), v = s k / (zeta c) - d / beta, T* = c v / k.
    Only physical (all positive) when beta is large enough for the
    infection to sustain itself.
    """
    t_eq = params.zeta * params.c / (beta * params.k)
    v_eq = params.s * params.k / (params.zeta * params.c) - params.d / beta
    return np.array([t_eq, params.c * v_eq / params.k, v_eq])


def observe(state, noise: MeasurementNoise, rng: np.random.Generator) -> np.ndarray:
    """z = (T + T* + e1, v + e2) with independent zero-mean Gaussian noise."""
    y = np.asarray(state, dtype=float)
    return np.array(
        [
            y[0] + y[1] + rng.normal(0.0, math.sqrt(noise.var1)),
            y[2] + rng.normal(0.0, math.sqrt(noise.var2)),
        ]
    )


def observation_log_likelihood(z, states, noise: MeasurementNoise) -> np.ndarray | float:
    """Row-wise log p(z | state): two independent Gaussian channels."""
    y = np.atleast_2d(np.asarray(states, dtype=float))
    r1 = z[0] - (y[:, 0] + y[:, 1])
    r2 = z[1] - y[:, 2]
    out = -0.5 * (math.log(2 * math.pi * noise.var1) + r1 * r1 / noise.var1) - 0.5 * (
        math.log(2 * math.pi * noise.var2) + r2 * r2 / noise.var2
    )
    return float(out[0]) if np.asarray(states).ndim == 1 else out


def simulate_truth(
    params: HivParams,
    schedule: BetaSchedule,
    noise: MeasurementNoise,
    days: int,
    init,
    rng: np.random.Generator,
    dt: float = DEFAULT_DT,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic truth trajectory plus noisy daily observations.

    init is either an explicit (T, T*, v) triple or the string
    "equilibrium", which starts at the endemic fixed point of beta(0) so
    the trajectory begins on the attractor it will orbit. Returns
    (truth, observations): truth rows are (T, T*, v, beta(t)) at
    t = 1..days, observations are the matching (z1, z2) rows. All
    stochasticity lives in the measurement noise.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if isinstance(init, str):
        if init != "equilibrium":
            raise ValueError(f"unknown init mode {init!r}")
        y = endemic_equilibrium(params, beta_schedule(0.0, schedule))
    else:
        y = np.asarray(init, dtype=float).copy()
    if y.shape != (3,):
        raise ValueError("init must resolve to a (T, T*, v) triple")

    n_sub = int(round(1.0 / dt))
    truth = np.empty((days, 4))
    obs = np.empty((days, 2))
    t = 0.0
    for day in range(days):
        for _ in range(n_sub):
            y = rk4_step(y, t, dt, schedule, params)
            t += dt
        truth[day, :3] = y
        truth[day, 3] = beta_schedule(t, schedule)
        obs[day] = observe(y, noise, rng)
    return truth, obs


class HivModel(StateSpaceModel):
    """StateSpaceModel over the augmented state (T, T*, v, log_beta).

    sigma_l is the additive noise scale on the three physical states after
    integration; log_beta_walk is the random-walk scale on log_beta. The
    kernel draws log_beta before integrating, so the ODE image already
    reflects the child's beta when the day's likelihood scores it.
    """

    state_dim = 4
    obs_dim = 2

    def __init__(
        self,
        params: HivParams | None = None,
        noise: MeasurementNoise | None = None,
        sigma_l: float = 10.0,
        log_beta_walk: float = 0.05,
        dt: float = DEFAULT_DT,
        state_max: float = STATE_MAX,
        log_beta_bounds: tuple[float, float] = LOG_BETA_BOUNDS,
    ):
        if not sigma_l > 0:
            raise ValueError("sigma_l must be positive")
        if not log_beta_walk > 0:
            raise ValueError("log_beta_walk must be positive")
        self.params = params if params is not None else HivParams()
        self.noise = noise if noise is not None else MeasurementNoise()
        self.sigma_l = float(sigma_l)
        self.log_beta_walk = float(log_beta_walk)
        self.dt = float(dt)
        self.state_max = float(state_max)
        self.log_beta_bounds = (float(log_beta_bounds[0]), float(log_beta_bounds[1]))

    def transition_sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.atleast_2d(np.asarray(states, dtype=float))
        n = x.shape[0]
        lb = np.clip(
            x[:, 3] + rng.standard_normal(n) * self.log_beta_walk,
            self.log_beta_bounds[0],
            self.log_beta_bounds[1],
        )
        img = integrate_day(x[:, :3], np.exp(lb), self.params, self.dt, self.state_max)
        phys = np.clip(
            img + rng.standard_normal((n, 3)) * self.sigma_l, 0.0, self.state_max
        )
        return np.concatenate([phys, lb[:, None]], axis=1)

    def transition_log_density(self, new_states: np.ndarray, prev_states: np.ndarray) -> np.ndarray:
        """Gaussian log-density of the kernel above, clamps ignored.

        The physical channels are centered on the one-day ODE image of the
        parent under the child's beta; log_beta is centered on the parent's
        log_beta. Treating the kernel as an unconstrained Gaussian is a
        documented approximation: the boxes bind rarely against states of
        this magnitude.
        """
        xn = np.atleast_2d(np.asarray(new_states, dtype=float))
        xp = np.atleast_2d(np.asarray(prev_states, dtype=float))
        img = integrate_day(xp[:, :3], np.exp(xn[:, 3]), self.params, self.dt, self.state_max)
        r = (xn[:, :3] - img) / self.sigma_l
        rb = (xn[:, 3] - xp[:, 3]) / self.log_beta_walk
        return (
            -0.5 * np.sum(r * r, axis=1)
            - 1.5 * math.log(2 * math.pi)
            - 3 * math.log(self.sigma_l)
            - 0.5 * rb * rb
            - 0.5 * math.log(2 * math.pi)
            - math.log(self.log_beta_walk)
        )

    def observation_log_likelihood(self, z: np.ndarray, states: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(states, dtype=float))
        return observation_log_likelihood(z, x, self.noise)

    def constrain(self, states: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(states, dtype=float)).copy()
        x[:, :3] = np.clip(x[:, :3], 0.0, self.state_max)
        x[:, 3] = np.clip(x[:, 3], self.log_beta_bounds[0], self.log_beta_bounds[1])
        return x
