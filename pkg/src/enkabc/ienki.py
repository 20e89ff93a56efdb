"""Iterative ensemble Kalman inversion: gains, shifters, and the ABC run.

Three shifters move the ensemble through the tempered sequence of targets:
a stochastic update with perturbed observations, and two deterministic
(noise-free) updates whose post-shift sample moments reproduce the exact
Kalman update of the sample covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .gaussian import (
    EnsembleMoments,
    IllConditionedError,
    chol_with_jitter,
    diag_mvn_logpdf,
    ensemble_moments,
)
from .tempering import estimate_kappa, skip_decision

SHIFTER_KINDS = ("stochastic", "square_root", "adjustment")


class Ensemble:
    """M members plus their images under the state-to-observation map.

    In the ABC specialization the map is the identity and ``images`` aliases
    ``members``; the deterministic shifters rely on this to avoid
    recomputation.
    """

    def __init__(self, members, images=None, iteration=0):
        self.members = np.atleast_2d(np.asarray(members, dtype=float))
        if self.members.shape[0] < 2:
            raise ValueError("need at least two ensemble members")
        self.images = self.members if images is None else np.atleast_2d(
            np.asarray(images, dtype=float)
        )
        if self.images.shape[0] != self.members.shape[0]:
            raise ValueError("members and images must have the same count")
        self.iteration = iteration

    @property
    def size(self):
        return self.members.shape[0]

    @property
    def identity_map(self):
        return self.images is self.members

    def moments(self):
        """Member moments with member-vs-image cross covariance."""
        return ensemble_moments(self.members, self.images)

    def image_moments(self):
        if self.identity_map:
            return self.moments()
        return ensemble_moments(self.images)

    def replace(self, new_members, image_map=None):
        images = None if image_map is None else np.atleast_2d(
            np.asarray([image_map(m) for m in new_members], dtype=float)
        )
        return Ensemble(new_members, images, iteration=self.iteration + 1)


def gamma_from_tolerances(eps, eps_prev, eps_next):
    """Reciprocal temperature increment for one tolerance step.

    ``eps_prev`` may be infinite (the initial, untempered target).
    """
    if not (eps_prev > eps_next >= eps > 0.0):
        raise ValueError(
            f"need eps_prev > eps_next >= eps > 0, got {eps_prev}, {eps_next}, {eps}"
        )
    inv_prev = 0.0 if math.isinf(eps_prev) else eps_prev ** -2
    return 1.0 / (eps ** 2 * (eps_next ** -2 - inv_prev))


def _solve_spd(mat, rhs):
    """mat^{-1} rhs for symmetric positive definite mat, with jitter policy."""
    L, _ = chol_with_jitter(mat)
    return cho_solve((L, True), rhs)


def kalman_gain(moments, gamma, Sigma_y):
    """Gain C^{xh} (C^{hh} + gamma Sigma_y)^{-1} via a factorization solve.

    ``moments.cov`` is read as the image covariance C^{hh} and
    ``moments.cross_cov`` (falling back to ``cov``) as C^{xh}; in the
    identity-map ABC case the two coincide.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    C_hh = moments.cov
    C_xh = moments.cross_cov if moments.cross_cov is not None else moments.cov
    return _solve_spd(C_hh + gamma * Sigma_y, C_xh.T).T


def sym_sqrt(mat):
    """Symmetric PSD square root; negative rounding eigenvalues clamped at 0."""
    w, V = np.linalg.eigh(np.asarray(mat, dtype=float))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def shift_stochastic(ensemble, gain, gamma_Sigma_y, y_obs, rng, image_map=None):
    """Perturbed-observation shift: x^j += K (y_obs - ytilde^j)."""
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    gamma_Sigma_y = np.atleast_2d(np.asarray(gamma_Sigma_y, dtype=float))
    if np.any(gamma_Sigma_y):
        L, _ = chol_with_jitter(gamma_Sigma_y)
        noise = rng.standard_normal(ensemble.images.shape) @ L.T
    else:
        noise = 0.0
    y_tilde = ensemble.images + noise
    new_members = ensemble.members + (y_obs[None, :] - y_tilde) @ gain.T
    return ensemble.replace(new_members, image_map)


def shift_square_root(ensemble, gamma, Sigma_y, y_obs, image_map=None):
    """Deterministic shift matching the Kalman-updated mean and covariance.

    The anomaly gain is C^{xh} S^{-1/2} (S^{1/2} + (gamma Sigma_y)^{1/2})^{-1}
    with S = C^{hh} + gamma Sigma_y and symmetric square roots, so the
    post-shift sample covariance equals (I - K H) C^{xx} exactly.
    """
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    Sigma_y = np.atleast_2d(np.asarray(Sigma_y, dtype=float))
    mom = ensemble.moments()
    img = ensemble.image_moments()
    C_xh = mom.cross_cov
    S = img.cov + gamma * Sigma_y
    gain = _solve_spd(S, C_xh.T).T
    S12 = sym_sqrt(S)
    R12 = sym_sqrt(gamma * Sigma_y)
    try:
        anomaly_gain_T = np.linalg.solve(S12 + R12, np.linalg.solve(S12, C_xh.T))
    except np.linalg.LinAlgError as err:
        raise IllConditionedError(f"square-root shift factor singular: {err}") from err
    mean_shift = gain @ (y_obs - img.mean)
    new_members = (
        ensemble.members
        + mean_shift[None, :]
        - (ensemble.images - img.mean[None, :]) @ anomaly_gain_T
    )
    return ensemble.replace(new_members, image_map)


def shift_adjustment(ensemble, gamma, Sigma_y, y_obs, image_map=None):
    """Deterministic shift rescaling anomalies through an SVD of the factors.

    Requires the member dimension to be below the ensemble size (the anomaly
    factor must have full row rank).  Produces the same first two sample
    moments as the square-root shift.
    """
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    Sigma_y = np.atleast_2d(np.asarray(Sigma_y, dtype=float))
    M, d_x = ensemble.members.shape
    if d_x >= M:
        raise ValueError(f"adjustment shifter needs dimension < ensemble size ({d_x} >= {M})")
    mom = ensemble.moments()
    img = ensemble.image_moments()
    Z_x = (ensemble.members - mom.mean[None, :]).T / math.sqrt(M - 1)
    Z_h = (ensemble.images - img.mean[None, :]).T / math.sqrt(M - 1)
    P, sv, Vt = np.linalg.svd(Z_x, full_matrices=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise IllConditionedError("anomaly factor is rank deficient")
    ZhV = Z_h @ Vt.T
    inner = np.eye(d_x) + ZhV.T @ _solve_spd(gamma * Sigma_y, ZhV)
    w, Q = np.linalg.eigh(inner)
    scaled = (P * sv) @ Q / np.sqrt(w)
    A = scaled @ Q.T / sv @ P.T
    gain = _solve_spd(img.cov + gamma * Sigma_y, mom.cross_cov.T).T
    mean_new = mom.mean + gain @ (y_obs - img.mean)
    new_members = mean_new[None, :] + (ensemble.members - mom.mean[None, :]) @ A.T
    return ensemble.replace(new_members, image_map)


def apply_shift(ensemble, kind, gamma, Sigma_y, y_obs, rng=None, image_map=None):
    """Dispatch one tempering step through the named shifter."""
    if kind == "stochastic":
        mom = ensemble.moments()
        img = ensemble.image_moments()
        gain = _solve_spd(img.cov + gamma * Sigma_y, mom.cross_cov.T).T
        return shift_stochastic(ensemble, gain, gamma * Sigma_y, y_obs, rng, image_map)
    if kind == "square_root":
        return shift_square_root(ensemble, gamma, Sigma_y, y_obs, image_map)
    if kind == "adjustment":
        return shift_adjustment(ensemble, gamma, Sigma_y, y_obs, image_map)
    raise ValueError(f"unknown shifter kind {kind!r}")


@dataclass
class IenkiTrace:
    """Per-iteration record of one inversion run.

    ``moments[t]`` and ``U[t]`` describe the ensemble after t shifts
    (t = 0 is the initial simulation-based ensemble); ``gammas`` holds the
    increments actually executed, and ``alphas`` the temperatures reached
    after each of them.  When the skip policy collapsed the remaining steps,
    ``skip_at`` is the iteration at which it fired.
    """

    moments: list = field(default_factory=list)
    U: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    eps_final: float = math.nan
    skip_at: int | None = None

    @property
    def steps(self):
        return len(self.gammas)


def ienki_abc_run(model, theta, s_obs, schedule, shifter, M, rng, skip=None):
    """Run the summary-space inversion for one parameter value.

    Simulates the initial ensemble from the model, iterates shifts over the
    schedule (collapsing the remainder into a single step if the skip policy
    fires), and records the moments and ensemble-average terminal
    log-likelihoods needed by every estimator.
    """
    if shifter not in SHIFTER_KINDS:
        raise ValueError(f"unknown shifter kind {shifter!r}")
    if M < 2:
        raise ValueError("need at least two ensemble members")
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    eps = schedule.eps_final
    obs_var = (eps * np.asarray(model.scale, dtype=float)) ** 2
    Sigma_y = np.diag(obs_var)

    sims = model.simulate_batch(theta, M, rng)
    ensemble = Ensemble(sims)
    trace = IenkiTrace(eps_final=eps)
    trace.moments.append(ensemble.moments())
    trace.U.append(float(diag_mvn_logpdf(s_obs, ensemble.members, obs_var).mean()))

    for t in range(1, schedule.T + 1):
        if skip is not None and skip_decision(ensemble.members, skip):
            gamma = 1.0 / (1.0 - schedule.alphas[t - 1])
            alpha_next = 1.0
            trace.skip_at = t
        else:
            gamma = float(schedule.gammas[t - 1])
            alpha_next = float(schedule.alphas[t])
        try:
            ensemble = apply_shift(ensemble, shifter, gamma, Sigma_y, s_obs, rng)
        except (IllConditionedError, np.linalg.LinAlgError) as err:
            raise IllConditionedError(f"shift failed at iteration {t}: {err}") from err
        trace.gammas.append(gamma)
        trace.alphas.append(alpha_next)
        trace.moments.append(ensemble.moments())
        trace.U.append(float(diag_mvn_logpdf(s_obs, ensemble.members, obs_var).mean()))
        if trace.skip_at is not None:
            break
    return trace


def default_schedule_for(model, theta, eps, T, M, rng, build=None):
    """Closed-form schedule with the spread ratio estimated from fresh sims."""
    from .tempering import build_schedule

    sims = model.simulate_batch(theta, M, rng)
    kappa = estimate_kappa(sims, model.scale)
    return build_schedule(eps, kappa, T)


def trace_to_csv(trace, filename):
    """Dump one run: iteration, epsilon, alpha, gamma, moments, U, skipped."""
    d = trace.moments[0].mean.shape[0]
    header = (
        ["iteration", "epsilon", "alpha", "gamma"]
        + [f"mean_{i}" for i in range(d)]
        + [f"var_{i}" for i in range(d)]
        + ["U_t", "skipped"]
    )
    with open(filename, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, mom in enumerate(trace.moments):
            if t == 0:
                eps_t, alpha_t, gamma_t = math.inf, 0.0, ""
            else:
                alpha_t = trace.alphas[t - 1]
                eps_t = trace.eps_final / math.sqrt(alpha_t)
                gamma_t = f"{trace.gammas[t - 1]:.17g}"
            skipped = trace.skip_at is not None and t == len(trace.moments) - 1 and t > 0
            row = (
                [str(t), f"{eps_t:.17g}", f"{alpha_t:.17g}", gamma_t]
                + [f"{v:.17g}" for v in mom.mean]
                + [f"{v:.17g}" for v in np.diag(mom.cov)]
                + [f"{trace.U[t]:.17g}", str(int(skipped))]
            )
            fh.write(",".join(row) + "\n")
