"""Independent reference computations used by the tests.

A scalar linear-Gaussian state-space model with its exact Kalman filter,
the exact Kalman one-step update, and simple synthetic chains.  Everything
here is written from the textbook formulas, independently of the package.
"""
import math

import numpy as np


def kalman_update(mean, cov, y, R):
    """Exact Kalman update with identity observation map."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = cov + R
    K = cov @ np.linalg.inv(S)
    return mean + K @ (np.atleast_1d(y) - mean), cov - K @ cov


class ScalarSSM:
    """x_k = a x_{k-1} + q w_k, y_k = x_k + r v_k, x_0 ~ N(0, p0)."""

    def __init__(self, a=0.9, q=0.5, r=0.7, p0=1.0):
        self.a, self.q, self.r, self.p0 = a, q, r, p0

    def simulate(self, n, rng):
        xs = [rng.normal(0.0, math.sqrt(self.p0))]
        for _ in range(n - 1):
            xs.append(self.a * xs[-1] + self.q * rng.standard_normal())
        ys = np.array([x + self.r * rng.standard_normal() for x in xs])
        return np.asarray(xs), ys[:, None]

    def exact_loglik(self, ys):
        """Kalman-filter marginal log likelihood of the observation column."""
        m, P = 0.0, self.p0
        ll = 0.0
        for k, y in enumerate(np.asarray(ys).ravel()):
            if k > 0:
                m, P = self.a * m, self.a ** 2 * P + self.q ** 2
            S = P + self.r ** 2
            ll += -0.5 * (math.log(2.0 * math.pi * S) + (y - m) ** 2 / S)
            K = P / S
            m += K * (y - m)
            P *= 1.0 - K
        return ll

    def init_particles(self, M, rng):
        return rng.normal(0.0, math.sqrt(self.p0), (M, 1))

    def propagate(self, states, k, rng):
        return self.a * states + self.q * rng.standard_normal(states.shape)


def ar1_chain(phi, n, rng):
    """Stationary AR(1) with unit marginal variance."""
    x = np.empty(n)
    x[0] = rng.standard_normal()
    innov_sd = math.sqrt(1.0 - phi ** 2)
    noise = rng.standard_normal(n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + innov_sd * noise[i]
    return x
