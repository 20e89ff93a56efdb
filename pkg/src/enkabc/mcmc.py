"""Pseudo-marginal random-walk Metropolis-Hastings and chain diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import chol_with_jitter


@dataclass
class LogUniformPrior:
    """Independent log-uniform components; the walk runs on log parameters."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if np.any(self.low <= 0.0) or np.any(self.low >= self.high):
            raise ValueError("need 0 < low < high per component")
        self._log_low = np.log(self.low)
        self._log_high = np.log(self.high)

    def to_internal(self, theta):
        return np.log(np.asarray(theta, dtype=float))

    def from_internal(self, phi):
        return np.exp(phi)

    def log_density_internal(self, phi):
        if np.all((phi >= self._log_low) & (phi <= self._log_high)):
            return 0.0
        return -math.inf


@dataclass
class UniformPrior:
    """Flat prior on a box; the walk runs on the natural scale."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if np.any(self.low >= self.high):
            raise ValueError("need low < high per component")

    def to_internal(self, theta):
        return np.asarray(theta, dtype=float).copy()

    def from_internal(self, phi):
        return phi

    def log_density_internal(self, phi):
        if np.all((phi >= self.low) & (phi <= self.high)):
            return 0.0
        return -math.inf


def lv_default_prior():
    """Default rate prior: log-uniform on [e^-6, e^2] per component."""
    return LogUniformPrior(np.full(3, math.exp(-6.0)), np.full(3, math.exp(2.0)))


# Pilot-run proposal scaling constant for a d-dimensional Gaussian target.
def pilot_proposal_cov(samples):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = samples.shape[1]
    return 2.38 ** 2 / d * np.atleast_2d(np.cov(samples.T, ddof=1))


@dataclass
class ChainRecord:
    """Post-step states of a pseudo-marginal chain plus its configuration."""

    thetas: np.ndarray
    log_prior: np.ndarray
    log_lik: np.ndarray
    accepted: np.ndarray
    config: dict = field(default_factory=dict)

    def __len__(self):
        return self.thetas.shape[0]

    @property
    def acceptance_rate(self):
        return float(self.accepted.mean())


def pm_mh_run(init, prior, proposal_cov, backend, n_iters, rng):
    """Pseudo-marginal Metropolis-Hastings over the prior's internal scale.

    ``backend(theta, rng)`` returns a LogLikelihoodEstimate; the cached
    estimate at the current state is never refreshed, and degenerate
    proposals are certain rejections.
    """
    if n_iters < 1:
        raise ValueError("need at least one iteration")
    init = np.atleast_1d(np.asarray(init, dtype=float))
    phi = prior.to_internal(init)
    lp = prior.log_density_internal(phi)
    if math.isinf(lp):
        raise ValueError(f"prior density is zero at the initial point {init}")
    try:
        curr_ll = backend(prior.from_internal(phi), rng).log_value
    except Exception as err:
        raise RuntimeError(
            f"likelihood backend failed at the initial point {init}: {err}"
        ) from err

    proposal_cov = np.atleast_2d(np.asarray(proposal_cov, dtype=float))
    if np.any(proposal_cov):
        L, _ = chol_with_jitter(proposal_cov)
    else:
        L = np.zeros_like(proposal_cov)

    d = phi.shape[0]
    thetas = np.empty((n_iters, d))
    log_priors = np.empty(n_iters)
    log_liks = np.empty(n_iters)
    accepted = np.zeros(n_iters, dtype=bool)

    for i in range(n_iters):
        phi_prop = phi + L @ rng.standard_normal(d)
        lp_prop = prior.log_density_internal(phi_prop)
        if not math.isinf(lp_prop):
            ll_prop = backend(prior.from_internal(phi_prop), rng).log_value
            if not math.isinf(ll_prop):
                if math.isinf(curr_ll):
                    accept = True
                else:
                    log_ratio = (lp_prop + ll_prop) - (lp + curr_ll)
                    accept = log_ratio >= 0.0 or math.log(rng.random()) < log_ratio
                if accept:
                    phi, lp, curr_ll = phi_prop, lp_prop, ll_prop
                    accepted[i] = True
        thetas[i] = prior.from_internal(phi)
        log_priors[i] = lp
        log_liks[i] = curr_ll
    return ChainRecord(
        thetas=thetas, log_prior=log_priors, log_lik=log_liks, accepted=accepted
    )


@dataclass
class MultiEssResult:
    value: float
    label: str

    @property
    def reliable(self):
        return self.label != "<50"


def multi_ess_samples(samples):
    """Multivariate effective sample size by nonoverlapping batch means."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] == 1:
        X = X.T
    n, d = X.shape
    b = int(math.isqrt(n))
    a = n // b
    lam = np.atleast_2d(np.cov(X.T, ddof=1))
    batch_means = X[: a * b].reshape(a, b, d).mean(axis=1)
    sigma = b * np.atleast_2d(np.cov(batch_means.T, ddof=1))
    sign_l, logdet_l = np.linalg.slogdet(lam)
    sign_s, logdet_s = np.linalg.slogdet(sigma)
    if sign_l <= 0 or sign_s <= 0:
        return math.nan
    return float(n * math.exp((logdet_l - logdet_s) / d))


def multi_ess(chain):
    """multiESS of a chain; reported as the "<50" category when the chain
    has fewer than 10 accepted moves (too little information to estimate)."""
    n = len(chain)
    if n < 100:
        raise ValueError("chain too short for a multiESS estimate")
    if int(chain.accepted.sum()) < 10:
        return MultiEssResult(value=math.nan, label="<50")
    value = multi_ess_samples(chain.thetas)
    if math.isnan(value):
        return MultiEssResult(value=math.nan, label="<50")
    return MultiEssResult(value=value, label=f"{value:.17g}")


def chain_to_csv(chain, filename):
    d = chain.thetas.shape[1]
    with open(filename, "w", newline="") as fh:
        header = ["iter"] + [f"theta_{i + 1}" for i in range(d)] + [
            "log_prior", "log_lik", "accepted",
        ]
        fh.write(",".join(header) + "\n")
        for i in range(len(chain)):
            row = [str(i + 1)] + [f"{v:.17g}" for v in chain.thetas[i]] + [
                f"{chain.log_prior[i]:.17g}",
                f"{chain.log_lik[i]:.17g}",
                str(int(chain.accepted[i])),
            ]
            fh.write(",".join(row) + "\n")


def config_sidecar(config, filename):
    with open(filename, "w") as fh:
        for key in sorted(config):
            fh.write(f"{key} = {config[key]}\n")
