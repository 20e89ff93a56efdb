"""Likelihood estimators built on the inversion engine and the filters.

Covers the direct, unbiased, and path-sampling estimators computed from an
inversion trace, the synthetic likelihood, and marginal likelihoods from a
bootstrap particle filter and an ensemble Kalman filter.
"""
from __future__ import annotations

import math
import time

import numpy as np
from scipy.special import logsumexp

from .estimates import LogLikelihoodEstimate
from .gaussian import (
    IllConditionedError,
    LOG_2PI,
    chol_with_jitter,
    diag_mvn_logpdf,
    ensemble_moments,
    ghurye_olkin_logdensity,
    mvn_logpdf,
)
from .ienki import Ensemble, apply_shift
from .simulators import LV_X0, gillespie_lv_batch

# Natural-scale weights below exp of this are zero in double precision; a
# filtering step whose weights all underflow is a degenerate estimate.
_UNDERFLOW_LOG = math.log(np.finfo(float).tiny)


def log_step_constant(gamma, d_y, logdet_Sigma_y):
    """Ratio of Gaussian normalizing constants for one tempering increment.

    With increment delta = 1/gamma, this is the constant relating the
    likelihood raised to the power delta to the Gaussian density with
    covariance inflated by gamma.
    """
    delta = 1.0 / gamma
    return (
        0.5 * d_y * math.log(gamma)
        + 0.5 * (1.0 - delta) * d_y * LOG_2PI
        + 0.5 * (1.0 - delta) * logdet_Sigma_y
    )


def _logdet(cov):
    L, _ = chol_with_jitter(cov)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def direct_log_ml(trace, y_obs, Sigma_y):
    """Sum over executed steps of the plug-in predictive-Gaussian ratios."""
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    Sigma_y = np.atleast_2d(np.asarray(Sigma_y, dtype=float))
    if len(trace.moments) < trace.steps:
        raise ValueError("trace moments shorter than its increment sequence")
    d_y = y_obs.shape[0]
    logdet_Sy = _logdet(Sigma_y)
    t0 = time.perf_counter()
    total = 0.0
    for t in range(1, trace.steps + 1):
        mom = trace.moments[t - 1]
        gamma = trace.gammas[t - 1]
        total += log_step_constant(gamma, d_y, logdet_Sy)
        total += mvn_logpdf(y_obs, mom.mean, mom.cov + gamma * Sigma_y)
    return LogLikelihoodEstimate(
        log_value=total,
        method="ienki_direct",
        T_used=trace.steps,
        skip_at=trace.skip_at,
        wall_time=time.perf_counter() - t0,
    )


def unbiased_log_ml(trace, y_obs, Sigma_y, M):
    """Direct-estimator form with the unbiased Gaussian density plug-in."""
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    Sigma_y = np.atleast_2d(np.asarray(Sigma_y, dtype=float))
    d_y = y_obs.shape[0]
    if M <= d_y + 3:
        raise ValueError(f"unbiased estimator needs M > d_y + 3, got M={M}, d_y={d_y}")
    logdet_Sy = _logdet(Sigma_y)
    t0 = time.perf_counter()
    total = 0.0
    degenerate = False
    for t in range(1, trace.steps + 1):
        mom = trace.moments[t - 1]
        gamma = trace.gammas[t - 1]
        term = ghurye_olkin_logdensity(y_obs, mom.mean, mom.cov + gamma * Sigma_y, M)
        if math.isinf(term):
            total = -math.inf
            degenerate = True
            break
        total += log_step_constant(gamma, d_y, logdet_Sy) + term
    return LogLikelihoodEstimate(
        log_value=total,
        method="ienki_unbiased",
        T_used=trace.steps,
        skip_at=trace.skip_at,
        degenerate=degenerate,
        wall_time=time.perf_counter() - t0,
    )


def path_sampling_log_ml(trace):
    """Trapezoidal thermodynamic estimate from the per-iteration averages."""
    if len(trace.U) != trace.steps + 1:
        raise ValueError("trace is missing terminal log-likelihood averages")
    t0 = time.perf_counter()
    total = 0.0
    for t in range(1, trace.steps + 1):
        total += (trace.U[t] + trace.U[t - 1]) / (2.0 * trace.gammas[t - 1])
    return LogLikelihoodEstimate(
        log_value=total,
        method="ienki_path",
        T_used=trace.steps,
        skip_at=trace.skip_at,
        wall_time=time.perf_counter() - t0,
    )


def synthetic_loglik(sims, s_obs, noise_var=None):
    """Gaussian plug-in likelihood from simulated summary moments.

    ``noise_var`` adds an observation-noise variance per coordinate; omit it
    (or pass 0) for the pure moment-matching form.
    """
    t0 = time.perf_counter()
    sims = np.atleast_2d(np.asarray(sims, dtype=float))
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    mom = ensemble_moments(sims)
    cov = mom.cov
    if noise_var:
        cov = cov + noise_var * np.eye(cov.shape[0])
    try:
        value = mvn_logpdf(s_obs, mom.mean, cov)
    except IllConditionedError:
        return LogLikelihoodEstimate(
            log_value=-math.inf, method="sl", degenerate=True,
            wall_time=time.perf_counter() - t0,
        )
    return LogLikelihoodEstimate(
        log_value=value, method="sl", wall_time=time.perf_counter() - t0
    )


def particle_filter_loglik(init_states, propagate, observations, obs_sd, rng, method="pf"):
    """Bootstrap filter: propagate, weight, multinomial-resample every step.

    ``propagate(states, k, rng)`` advances all particles from observation
    k-1 to observation k; observation densities are independent
    N(y | state, obs_sd^2) per coordinate.  A step on which every weight is
    zero in double precision yields a degenerate estimate.
    """
    t0 = time.perf_counter()
    states = np.asarray(init_states, dtype=float)
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    M = states.shape[0]
    var = np.full(observations.shape[1], obs_sd ** 2)
    total = 0.0
    for k, y in enumerate(observations):
        if k > 0:
            states = np.asarray(propagate(states, k, rng), dtype=float)
        logw = diag_mvn_logpdf(y, states, var)
        if logw.max() < _UNDERFLOW_LOG:
            return LogLikelihoodEstimate(
                log_value=-math.inf, method=method, degenerate=True,
                wall_time=time.perf_counter() - t0,
            )
        total += float(logsumexp(logw)) - math.log(M)
        w = np.exp(logw - logw.max())
        w /= w.sum()
        idx = rng.choice(M, size=M, p=w)
        states = states[idx]
    return LogLikelihoodEstimate(
        log_value=total, method=method, wall_time=time.perf_counter() - t0
    )


def enkf_filter_loglik(
    init_states, propagate, observations, obs_sd, shifter, rng,
    discretize=None, method="enkf",
):
    """Ensemble Kalman filter marginal likelihood with a selectable shifter.

    Per-step increment is the predictive-Gaussian density
    log N(y | mean_pred, cov_pred + obs_sd^2 I); the update moves the
    ensemble with the chosen shifter (identity observation map).
    ``discretize`` maps post-update states back to the forward model's state
    space (integer counts for the jump process).
    """
    t0 = time.perf_counter()
    states = np.asarray(init_states, dtype=float)
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    d = observations.shape[1]
    R = obs_sd ** 2 * np.eye(d)
    total = 0.0
    for k, y in enumerate(observations):
        if k > 0:
            prop_in = discretize(states) if discretize is not None else states
            states = np.asarray(propagate(prop_in, k, rng), dtype=float)
        mom = ensemble_moments(states)
        try:
            total += mvn_logpdf(y, mom.mean, mom.cov + R)
        except IllConditionedError:
            return LogLikelihoodEstimate(
                log_value=-math.inf, method=method, degenerate=True,
                wall_time=time.perf_counter() - t0,
            )
        if np.ptp(states, axis=0).max() == 0.0:
            # Collapsed ensemble: the gain is zero, no update to apply.
            continue
        try:
            ens = apply_shift(Ensemble(states), shifter, 1.0, R, y, rng)
        except (IllConditionedError, np.linalg.LinAlgError):
            return LogLikelihoodEstimate(
                log_value=-math.inf, method=method, degenerate=True,
                wall_time=time.perf_counter() - t0,
            )
        states = ens.members
    return LogLikelihoodEstimate(
        log_value=total, method=method, wall_time=time.perf_counter() - t0
    )


def _lv_propagate(theta, obs_times):
    """Particle propagation through the jump process between observations."""
    dts = np.diff(np.asarray(obs_times, dtype=float))

    def propagate(states, k, rng):
        states_int = np.maximum(np.rint(states), 0).astype(np.int64)
        out, _ = gillespie_lv_batch(theta, states_int, np.array([dts[k - 1]]), rng)
        return out[:, 0, :]

    return propagate


def bootstrap_pf_loglik(theta, observed, eps, M, rng, x0=LV_X0):
    """Bootstrap-filter likelihood for the predator-prey model."""
    if M < 2:
        raise ValueError("need at least two particles")
    init = np.broadcast_to(np.asarray(x0, dtype=float), (M, 2)).copy()
    return particle_filter_loglik(
        init, _lv_propagate(theta, observed.times), observed.states(), eps, rng
    )


def enkf_loglik(theta, observed, eps, M, shifter, rng, x0=LV_X0):
    """Ensemble Kalman filter likelihood for the predator-prey model."""
    if M < 2:
        raise ValueError("need at least two ensemble members")
    init = np.broadcast_to(np.asarray(x0, dtype=float), (M, 2)).copy()

    def discretize(states):
        return np.maximum(np.rint(states), 0).astype(np.int64)

    return enkf_filter_loglik(
        init, _lv_propagate(theta, observed.times), observed.states(), eps,
        shifter, rng, discretize=discretize,
    )
