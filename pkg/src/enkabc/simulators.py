"""Forward models: the Gaussian toy model and the Lotka-Volterra jump process.

The Lotka-Volterra simulator is an exact Gillespie implementation compiled
with numba; each path consumes an explicit integer seed so replicate
simulations are reproducible and embarrassingly parallel (seeds are drawn
from the caller's RNG stream, one per path).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .gaussian import mvn_logpdf

# Reference configuration for the predator-prey study: 16 equally spaced
# observation times (initial state plus 15 further measurements), initial
# state (50 predators, 100 prey), and the generating rates.
LV_OBS_TIMES = np.arange(0.0, 31.0, 2.0)
LV_X0 = (50, 100)
LV_THETA_STAR = np.array([1.0, 0.005, 0.6])
LV_SUMMARY_DIM = 2 * LV_OBS_TIMES.shape[0]

# Divergence guards: breaching either cap truncates-and-holds the path and
# marks it divergent, keeping worst-case cost bounded.
EVENT_CAP = 10 ** 6
POPULATION_CAP = 10 ** 6

OBSERVED_LV_SEED = 314159265


@dataclass
class LVPath:
    """States of the jump process recorded on the observation grid."""

    times: np.ndarray
    predators: np.ndarray
    prey: np.ndarray
    divergent: bool

    def states(self):
        return np.column_stack([self.predators, self.prey]).astype(float)


def lv_rates(theta, x):
    """Instantaneous reaction rates (prey birth, interaction, predator death)."""
    x1, x2 = x
    return np.array([theta[0] * x2, theta[1] * x1 * x2, theta[2] * x1])


def _check_lv_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (3,) or np.any(theta <= 0.0):
        raise ValueError(f"Lotka-Volterra rates must be three positive reals, got {theta}")
    return theta


@njit(cache=True)
def _lv_paths_kernel(th1, th2, th3, states0, obs_times, seeds, event_cap, pop_cap):
    n_paths = states0.shape[0]
    n_obs = obs_times.shape[0]
    out = np.empty((n_paths, n_obs, 2), dtype=np.int64)
    div = np.zeros(n_paths, dtype=np.bool_)
    for p in range(n_paths):
        np.random.seed(seeds[p])
        x1 = states0[p, 0]
        x2 = states0[p, 1]
        t = 0.0
        k = 0
        events = 0
        frozen = False
        while k < n_obs:
            r1 = th1 * x2
            r2 = th2 * x1 * x2
            r3 = th3 * x1
            rtot = r1 + r2 + r3
            if frozen or rtot <= 0.0:
                while k < n_obs:
                    out[p, k, 0] = x1
                    out[p, k, 1] = x2
                    k += 1
                break
            t_next = t + np.random.exponential(1.0 / rtot)
            while k < n_obs and obs_times[k] <= t_next:
                out[p, k, 0] = x1
                out[p, k, 1] = x2
                k += 1
            t = t_next
            u = np.random.random() * rtot
            if u < r1:
                x2 += 1
            elif u < r1 + r2:
                x1 += 1
                x2 -= 1
            else:
                x1 -= 1
            events += 1
            if events >= event_cap or x1 > pop_cap or x2 > pop_cap:
                div[p] = True
                frozen = True
    return out, div


@njit(cache=True)
def _lv_first_events_kernel(th1, th2, th3, x1, x2, seeds):
    """First waiting time and reaction index from a frozen state, per seed."""
    n = seeds.shape[0]
    dts = np.empty(n)
    reactions = np.empty(n, dtype=np.int64)
    r1 = th1 * x2
    r2 = th2 * x1 * x2
    r3 = th3 * x1
    rtot = r1 + r2 + r3
    for p in range(n):
        np.random.seed(seeds[p])
        dts[p] = np.random.exponential(1.0 / rtot)
        u = np.random.random() * rtot
        if u < r1:
            reactions[p] = 0
        elif u < r1 + r2:
            reactions[p] = 1
        else:
            reactions[p] = 2
    return dts, reactions


def _path_seeds(rng, n):
    return rng.integers(0, 2 ** 31 - 1, size=n).astype(np.int64)


def gillespie_lv_batch(theta, states0, obs_times, rng):
    """Exact simulation of many paths; ``states0`` is (n, 2) integer states.

    Returns (states, divergent) with states (n, n_obs, 2).
    """
    theta = _check_lv_theta(theta)
    states0 = np.atleast_2d(np.asarray(states0, dtype=np.int64))
    if np.any(states0 < 0):
        raise ValueError("initial counts must be nonnegative")
    obs_times = np.asarray(obs_times, dtype=float)
    if np.any(np.diff(obs_times) <= 0.0):
        raise ValueError("observation times must be increasing")
    seeds = _path_seeds(rng, states0.shape[0])
    return _lv_paths_kernel(
        theta[0], theta[1], theta[2], states0, obs_times, seeds, EVENT_CAP, POPULATION_CAP
    )


def gillespie_lv(theta, x0, obs_times, rng):
    """Simulate one Lotka-Volterra path observed on ``obs_times``."""
    states0 = np.array([[x0[0], x0[1]]], dtype=np.int64)
    states, div = gillespie_lv_batch(theta, states0, obs_times, rng)
    return LVPath(
        times=np.asarray(obs_times, dtype=float).copy(),
        predators=states[0, :, 0].copy(),
        prey=states[0, :, 1].copy(),
        divergent=bool(div[0]),
    )


def lv_first_events(theta, x, n, rng):
    """Waiting time / reaction index of the first event from a frozen state."""
    theta = _check_lv_theta(theta)
    seeds = _path_seeds(rng, n)
    return _lv_first_events_kernel(theta[0], theta[1], theta[2], x[0], x[1], seeds)


def lv_summary(path):
    """32-dim summary: time-major concatenation, predator then prey per time."""
    if path.times.shape[0] != LV_OBS_TIMES.shape[0]:
        raise ValueError(
            f"path must cover the full {LV_OBS_TIMES.shape[0]}-point grid, "
            f"got {path.times.shape[0]}"
        )
    return np.column_stack([path.predators, path.prey]).reshape(-1).astype(float)


def make_observed_lv_data(seed=OBSERVED_LV_SEED):
    """Fixed reference observation generated at the pinned rates and seed."""
    rng = np.random.default_rng(seed)
    path = gillespie_lv(LV_THETA_STAR, LV_X0, LV_OBS_TIMES, rng)
    return path, lv_summary(path)


def save_lv_csv(path, filename):
    with open(filename, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "predators", "prey"])
        for t, x1, x2 in zip(path.times, path.predators, path.prey):
            writer.writerow([f"{t:.17g}", int(x1), int(x2)])


def load_lv_csv(filename):
    with open(filename, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [(float(r["time"]), int(r["predators"]), int(r["prey"])) for r in reader]
    times = np.array([r[0] for r in rows])
    return LVPath(
        times=times,
        predators=np.array([r[1] for r in rows], dtype=np.int64),
        prey=np.array([r[2] for r in rows], dtype=np.int64),
        divergent=False,
    )


def gaussian_noise_observe(x, eps, rng):
    """Add independent N(0, eps^2) noise per coordinate."""
    if eps <= 0.0:
        raise ValueError("noise scale must be positive")
    x = np.asarray(x, dtype=float)
    return x + eps * rng.standard_normal(x.shape)


class ToyModel:
    """1-dim model with summaries drawn from N(theta, var)."""

    summary_dim = 1

    def __init__(self, var=1.0):
        self.var = var
        self.scale = np.ones(1)

    def simulate(self, theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (1,):
            raise ValueError("toy model has a single parameter")
        return theta + math.sqrt(self.var) * rng.standard_normal(1)

    def simulate_batch(self, theta, M, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta[0] + math.sqrt(self.var) * rng.standard_normal((M, 1))


def toy_simulate(theta, rng):
    return ToyModel().simulate(theta, rng)


def toy_exact_abc_likelihood(theta, s_obs, eps):
    """Closed-form log ABC likelihood of the toy model: log N(s_obs | theta, 1 + eps^2)."""
    if eps <= 0.0:
        raise ValueError("tolerance must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return mvn_logpdf(
        np.array([s_obs]), theta, np.array([[1.0 + eps ** 2]])
    )


class LotkaVolterraModel:
    """Summary-space forward model for the predator-prey process."""

    summary_dim = LV_SUMMARY_DIM

    def __init__(self, x0=LV_X0, obs_times=LV_OBS_TIMES):
        self.x0 = np.asarray(x0, dtype=np.int64)
        self.obs_times = np.asarray(obs_times, dtype=float)
        self.scale = np.ones(2 * self.obs_times.shape[0])

    def simulate(self, theta, rng):
        path = gillespie_lv(theta, self.x0, self.obs_times, rng)
        return lv_summary(path)

    def simulate_batch(self, theta, M, rng):
        states0 = np.broadcast_to(self.x0, (M, 2)).copy()
        states, _ = gillespie_lv_batch(theta, states0, self.obs_times, rng)
        return states.reshape(M, -1).astype(float)
