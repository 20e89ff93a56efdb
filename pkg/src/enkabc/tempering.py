"""Tolerance/temperature schedules, ESS-based adaptation, and target skipping.

The default schedule is the closed form obtained by solving the
constant-speed tempering ODE under a Gaussian approximation of the bridging
targets; the ESS bisection is provided as an alternative but introduces a
small bias, so it is kept behind an explicit call.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import hz_normality_test

logger = logging.getLogger(__name__)

# Ratio of initial to terminal spread below which the closed form degenerates
# (its derivation divides by kappa^2 - eps^2) and we fall back to a uniform
# temperature grid.
_KAPPA_MARGIN = 1e-6


@dataclass
class TemperingSchedule:
    """Decreasing tolerances with equivalent increasing temperatures.

    ``eps_list`` has T+1 entries starting at infinity and ending at the
    target tolerance; ``alphas`` runs 0 to 1; ``gammas`` has T entries, the
    reciprocal temperature increments.
    """

    eps_final: float
    alphas: np.ndarray
    eps_list: np.ndarray
    gammas: np.ndarray
    origin: str = "explicit"

    @property
    def T(self):
        return len(self.gammas)


@dataclass
class SkipPolicy:
    """Collapse the remaining steps once the ensemble looks Gaussian."""

    significance: float
    enabled: bool = True

    def __post_init__(self):
        if self.enabled and not 0.0 <= self.significance < 1.0:
            raise ValueError("significance must lie in [0, 1)")


def closed_form_alpha(t_frac, eps, kappa):
    """Closed-form temperature at schedule fraction ``t_frac`` in [0, 1]."""
    if not 0.0 <= t_frac <= 1.0:
        raise ValueError("t_frac must lie in [0, 1]")
    if kappa <= eps or eps <= 0.0:
        raise ValueError("need kappa > eps > 0")
    r = eps ** 2 / (kappa ** 2 - eps ** 2)
    return math.exp(2.0 * math.log(kappa / eps) * t_frac + math.log(r)) - r


def schedule_from_alphas(alphas, eps, origin="explicit"):
    alphas = np.asarray(alphas, dtype=float)
    alphas[0] = 0.0
    alphas[-1] = 1.0
    if np.any(np.diff(alphas) <= 0.0):
        raise ValueError("temperatures must be strictly increasing")
    with np.errstate(divide="ignore"):
        eps_list = eps / np.sqrt(alphas)
    gammas = 1.0 / np.diff(alphas)
    return TemperingSchedule(
        eps_final=eps, alphas=alphas, eps_list=eps_list, gammas=gammas, origin=origin
    )


def build_schedule(eps, kappa, T):
    """Discretize the closed-form temperature curve into T steps.

    Falls back to a uniform temperature grid (with a warning) when the
    initial spread ``kappa`` is not meaningfully larger than ``eps``.
    """
    if T < 1:
        raise ValueError("need T >= 1")
    if eps <= 0.0:
        raise ValueError("tolerance must be positive")
    grid = np.arange(T + 1) / T
    if kappa <= eps * (1.0 + _KAPPA_MARGIN):
        logger.warning(
            "initial spread kappa=%g not above tolerance eps=%g; "
            "using a uniform temperature grid", kappa, eps,
        )
        return schedule_from_alphas(grid.copy(), eps, origin="uniform_fallback")
    alphas = np.array([closed_form_alpha(t, eps, kappa) for t in grid])
    return schedule_from_alphas(alphas, eps, origin="closed_form")


def estimate_kappa(sims, scale):
    """Mean over coordinates of sample SD relative to the summary scale."""
    sims = np.atleast_2d(np.asarray(sims, dtype=float))
    if sims.shape[0] < 2:
        raise ValueError("need at least two simulations")
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    sd = sims.std(axis=0, ddof=1)
    if not np.any(sd > 0.0):
        raise ValueError("zero sample spread in every coordinate")
    return float(np.mean(sd / scale))


def ess(weights):
    """Effective sample size (sum w)^2 / sum w^2, in [1, M]."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise ValueError("need at least one positive weight")
    return float(total ** 2 / np.sum(w ** 2))


def ess_from_log(log_weights):
    """ESS computed stably from log weights."""
    lw = np.asarray(log_weights, dtype=float)
    m = lw.max()
    if np.isneginf(m):
        raise ValueError("need at least one positive weight")
    w = np.exp(lw - m)
    return float(w.sum() ** 2 / np.sum(w ** 2))


def adaptive_next_epsilon(members, s_obs, eps_prev, eps_final, beta, scale):
    """Bisect for the tolerance whose bridging weights give ESS = beta * M.

    Returns ``eps_final`` when even the terminal tolerance keeps the ESS at
    or above the target.  ``eps_prev`` may be infinite (first step).
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not eps_prev > eps_final:
        raise ValueError("need eps_prev > eps_final")
    members = np.atleast_2d(np.asarray(members, dtype=float))
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    M = members.shape[0]
    quad = (((s_obs[None, :] - members) / scale[None, :]) ** 2).sum(axis=1)
    inv_prev = 0.0 if math.isinf(eps_prev) else eps_prev ** -2
    target = beta * M

    def ess_at(a):
        # a = eps^-2 - eps_prev^-2 > 0; larger a means colder, smaller ESS
        return ess_from_log(-0.5 * a * quad)

    a_hi = eps_final ** -2 - inv_prev
    if ess_at(a_hi) >= target:
        return eps_final
    lo, hi = 0.0, a_hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if ess_at(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            break
    a = 0.5 * (lo + hi)
    return float((a + inv_prev) ** -0.5)


def skip_decision(members, policy):
    """True when the normality test fails to reject Gaussianity.

    A not-applicable test (degenerate sample covariance) never skips, and a
    zero significance is treated as a disabled policy.
    """
    if not policy.enabled or policy.significance <= 0.0:
        return False
    result = hz_normality_test(members, policy.significance)
    if not result.applicable:
        return False
    return not result.reject


def schedule_to_csv(schedule, filename):
    with open(filename, "w", newline="") as fh:
        fh.write("t,epsilon_t,alpha_t,gamma_t\n")
        for t in range(schedule.T + 1):
            gamma = "" if t == 0 else f"{schedule.gammas[t - 1]:.17g}"
            fh.write(
                f"{t},{schedule.eps_list[t]:.17g},{schedule.alphas[t]:.17g},{gamma}\n"
            )
