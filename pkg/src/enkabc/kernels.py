"""ABC kernels, the weighted Euclidean distance, and the standard estimator."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .estimates import LogLikelihoodEstimate
from .gaussian import diag_mvn_logpdf


@dataclass
class AbcKernel:
    """Comparison kernel: 'uniform' (indicator) or 'gaussian' (full density).

    ``scale`` holds the per-coordinate standard deviations used to put the
    summary statistics on a comparable footing; the gaussian kernel is the
    multivariate normal with covariance eps^2 * diag(scale^2), normalizing
    constant included so that estimates are comparable across methods.
    """

    kind: str
    eps: float
    scale: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.eps <= 0.0:
            raise ValueError("tolerance must be positive")
        self.scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if np.any(self.scale <= 0.0):
            raise ValueError("scale entries must be positive")


def weighted_euclidean(s_obs, s, scale):
    """sqrt of the sum of squared per-coordinate scaled differences."""
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    if s_obs.shape != s.shape:
        raise ValueError(f"length mismatch: {s_obs.shape} vs {s.shape}")
    return math.sqrt(float(np.sum(((s_obs - s) / scale) ** 2)))


def kernel_logvalue(kernel, s_obs, s):
    """Log kernel value; -inf for a uniform kernel outside the tolerance.

    The uniform kernel uses a strict inequality: a point at distance exactly
    eps is excluded.
    """
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s_obs.shape != s.shape:
        raise ValueError(f"dimension mismatch: {s_obs.shape} vs {s.shape}")
    if kernel.kind == "uniform":
        dist = weighted_euclidean(s_obs, s, kernel.scale)
        return 0.0 if dist < kernel.eps else -math.inf
    variances = (kernel.eps * kernel.scale) ** 2
    return float(diag_mvn_logpdf(s_obs, s[None, :], variances)[0])


def _kernel_logvalues(kernel, s_obs, sims):
    """Vectorized kernel log values over the rows of ``sims``."""
    if kernel.kind == "gaussian":
        variances = (kernel.eps * kernel.scale) ** 2
        return diag_mvn_logpdf(s_obs, sims, variances)
    dists = np.sqrt((((s_obs[None, :] - sims) / kernel.scale[None, :]) ** 2).sum(axis=1))
    out = np.where(dists < kernel.eps, 0.0, -np.inf)
    return out


def abc_loglik_estimate(model, theta, s_obs, kernel, M, rng):
    """Monte Carlo ABC likelihood: log of the mean kernel value over M sims.

    Computed by log-sum-exp; if every term is zero the estimate is degenerate
    (log value -inf), not an error.
    """
    if M < 1:
        raise ValueError("need at least one simulation")
    t0 = time.perf_counter()
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    sims = model.simulate_batch(theta, M, rng)
    logvals = _kernel_logvalues(kernel, s_obs, sims)
    if np.all(np.isneginf(logvals)):
        log_value = -math.inf
    else:
        log_value = float(logsumexp(logvals)) - math.log(M)
    return LogLikelihoodEstimate(
        log_value=log_value, method="abc", wall_time=time.perf_counter() - t0
    )
