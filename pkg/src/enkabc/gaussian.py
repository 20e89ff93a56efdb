"""Dense Gaussian numerics shared by all likelihood estimators.

Everything here is pure given its inputs (and an explicitly passed RNG),
works in the log domain, and never forms an explicit matrix inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln
from scipy.stats import lognorm

LOG_2PI = math.log(2.0 * math.pi)

# Relative jitter escalation applied to the mean diagonal when a Cholesky
# factorization fails.  Failures beyond the last step are raised, never
# silently absorbed.
JITTER_SCALES = (0.0, 1e-10, 1e-6, 1e-4)


class IllConditionedError(np.linalg.LinAlgError):
    """Covariance not factorizable even after the jitter escalation."""

    def __init__(self, msg, diagnostic=None):
        super().__init__(msg)
        self.diagnostic = diagnostic


def as_cov(a, rtol=1e-12):
    """Validate and symmetrize a covariance matrix.

    Raises ValueError if the input is not square or not symmetric to within
    ``rtol`` relative to its largest entry.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"covariance must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > rtol * scale:
        raise ValueError("covariance not symmetric")
    return 0.5 * (a + a.T)


def chol_with_jitter(cov):
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Returns (L, jitter) where ``jitter`` is the absolute value added to the
    diagonal (0.0 in the common case).
    """
    cov = np.asarray(cov, dtype=float)
    # Jitter is relative to the mean diagonal; an exactly zero covariance has
    # nothing to regularize against and fails outright.
    base = float(np.mean(np.diag(cov)))
    last_err = None
    for scale in JITTER_SCALES:
        try:
            jitter = scale * base
            L = np.linalg.cholesky(cov if scale == 0.0 else cov + jitter * np.eye(cov.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError as err:
            last_err = err
    diag = {"mean_diag": base, "max_jitter": JITTER_SCALES[-1] * base}
    raise IllConditionedError(f"Cholesky failed after jitter escalation: {last_err}", diag)


def mvn_logpdf(x, mean, cov):
    """Log density of N(mean, cov) at x, via triangular solves."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = x.shape[-1] if x.ndim else 1
    x = np.atleast_1d(x)
    mean = np.atleast_1d(mean)
    cov = np.atleast_2d(cov)
    d = x.shape[0]
    if mean.shape[0] != d or cov.shape != (d, d):
        raise ValueError(
            f"dimension mismatch: x {x.shape}, mean {mean.shape}, cov {cov.shape}"
        )
    L, _ = chol_with_jitter(cov)
    z = solve_triangular(L, x - mean, lower=True)
    return -0.5 * d * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * float(z @ z)


def diag_mvn_logpdf(x, means, variances):
    """Row-wise log N(x | means_j, diag(variances)).

    ``means`` is (M, d); broadcasts the shared diagonal covariance.  Used in
    hot paths (ABC kernels, tempering log-likelihood averages) where a full
    factorization per row would be wasteful.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    means = np.atleast_2d(np.asarray(means, dtype=float))
    variances = np.atleast_1d(np.asarray(variances, dtype=float))
    d = x.shape[0]
    quad = ((x[None, :] - means) ** 2 / variances[None, :]).sum(axis=1)
    return -0.5 * (d * LOG_2PI + np.sum(np.log(variances)) + quad)


def sample_mvn(mean, cov, rng):
    """One draw from N(mean, cov): mean + L z with L the lower factor."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not np.any(cov):
        return mean.copy()
    L, _ = chol_with_jitter(cov)
    return mean + L @ rng.standard_normal(mean.shape[0])


@dataclass
class EnsembleMoments:
    """Unbiased sample moments of an ensemble (and optionally its images)."""

    mean: np.ndarray
    cov: np.ndarray
    cross_cov: np.ndarray | None
    sample_size: int


def ensemble_moments(members, images=None):
    """Sample mean / covariance (divide by M-1) of an ensemble.

    ``members`` is (M, d).  ``mean`` and ``cov`` are the member moments;
    when ``images`` is given, ``cross_cov`` is the (d_x, d_h) member-vs-image
    cross product normalized by M-1.
    """
    members = np.atleast_2d(np.asarray(members, dtype=float))
    M = members.shape[0]
    if M < 2:
        raise ValueError("need at least two ensemble members")
    mean = members.mean(axis=0)
    a = members - mean
    cov = a.T @ a / (M - 1)
    cross = None
    if images is not None:
        images = np.atleast_2d(np.asarray(images, dtype=float))
        if images.shape[0] != M:
            raise ValueError("members and images must have the same count")
        b = images - images.mean(axis=0)
        cross = a.T @ b / (M - 1)
    return EnsembleMoments(mean=mean, cov=cov, cross_cov=cross, sample_size=M)


def _log_rho(k, v):
    """log of the Wishart-type constant rho(k, v)."""
    i = np.arange(1, k + 1)
    return (
        -0.5 * k * v * math.log(2.0)
        - 0.25 * k * (k - 1) * math.log(math.pi)
        - float(np.sum(gammaln(0.5 * (v - i + 1))))
    )


def _logdet_pd(a):
    """log det of a PD matrix via Cholesky; None if not positive definite."""
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def ghurye_olkin_logdensity(y, mu_hat, sigma_hat, M):
    """Log of the unbiased Gaussian density estimator from sample moments.

    ``mu_hat`` and ``sigma_hat`` are the sample mean and unbiased sample
    covariance of M independent Gaussian draws.  Returns -inf when the
    positive-definiteness guard fails (the estimator's zero branch).
    Requires M > d + 3.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu_hat = np.atleast_1d(np.asarray(mu_hat, dtype=float))
    sigma_hat = np.atleast_2d(np.asarray(sigma_hat, dtype=float))
    d = y.shape[0]
    if M <= d + 3:
        raise ValueError(f"unbiased density estimator needs M > d + 3, got M={M}, d={d}")
    diff = y - mu_hat
    scatter = (M - 1) * sigma_hat
    inner = scatter - np.outer(diff, diff) / (1.0 - 1.0 / M)
    logdet_inner = _logdet_pd(inner)
    if logdet_inner is None:
        return -math.inf
    logdet_scatter = _logdet_pd(scatter)
    if logdet_scatter is None:
        return -math.inf
    return (
        -0.5 * d * LOG_2PI
        + _log_rho(d, M - 2)
        - _log_rho(d, M - 1)
        - 0.5 * d * math.log(1.0 - 1.0 / M)
        - 0.5 * (M - d - 2) * logdet_scatter
        + 0.5 * (M - d - 3) * logdet_inner
    )


@dataclass
class HzResult:
    statistic: float
    p_value: float
    reject: bool
    applicable: bool = True


def hz_normality_test(members, significance):
    """Multivariate normality test with smoothing-kernel statistic.

    Uses the standard smoothing bandwidth and a log-normal approximation of
    the null distribution for the p-value.  Coordinates that are constant
    across the ensemble are dropped before testing (they carry no shape
    information and make the sample covariance singular).  If the reduced
    sample covariance is still singular the result is flagged not applicable
    and ``reject`` is False.
    """
    X = np.atleast_2d(np.asarray(members, dtype=float))
    keep = np.ptp(X, axis=0) > 0.0
    X = X[:, keep]
    n, d = X.shape
    if d == 0:
        return HzResult(math.nan, math.nan, False, applicable=False)
    if n <= d + 1:
        raise ValueError(f"normality test needs M > d + 1, got M={n}, d={d}")
    S = np.cov(X, rowvar=False, bias=True)
    S = np.atleast_2d(S)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        try:
            L, _ = chol_with_jitter(S)
        except IllConditionedError:
            return HzResult(math.nan, math.nan, False, applicable=False)
    Z = solve_triangular(L, (X - X.mean(axis=0)).T, lower=True).T
    sq = (Z ** 2).sum(axis=1)
    # Pairwise squared Mahalanobis distances of the whitened sample.
    D = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.clip(D, 0.0, None, out=D)

    b = (n * (2.0 * d + 1.0) / 4.0) ** (1.0 / (d + 4.0)) / math.sqrt(2.0)
    b2 = b * b
    stat = n * (
        np.exp(-0.5 * b2 * D).mean()
        - 2.0 * (1.0 + b2) ** (-d / 2.0) * np.exp(-0.5 * b2 * sq / (1.0 + b2)).mean()
        + (1.0 + 2.0 * b2) ** (-d / 2.0)
    )

    a = 1.0 + 2.0 * b2
    wb = (1.0 + b2) * (1.0 + 3.0 * b2)
    mu = 1.0 - a ** (-d / 2.0) * (1.0 + d * b2 / a + d * (d + 2.0) * b2 ** 2 / (2.0 * a * a))
    si2 = (
        2.0 * (1.0 + 4.0 * b2) ** (-d / 2.0)
        + 2.0 * a ** (-d)
        * (1.0 + 2.0 * d * b2 ** 2 / a ** 2 + 3.0 * d * (d + 2.0) * b2 ** 4 / (4.0 * a ** 4))
        - 4.0 * wb ** (-d / 2.0)
        * (1.0 + 3.0 * d * b2 ** 2 / (2.0 * wb) + d * (d + 2.0) * b2 ** 4 / (2.0 * wb ** 2))
    )
    pmu = math.log(math.sqrt(mu ** 4 / (si2 + mu ** 2)))
    psi = math.sqrt(math.log1p(si2 / mu ** 2))
    p_value = float(lognorm.sf(stat, psi, scale=math.exp(pmu)))
    return HzResult(float(stat), p_value, bool(p_value < significance))
