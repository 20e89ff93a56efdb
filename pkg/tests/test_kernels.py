import math

import numpy as np
import pytest
from scipy.stats import norm

from enkabc.gaussian import mvn_logpdf
from enkabc.kernels import AbcKernel, abc_loglik_estimate, kernel_logvalue, weighted_euclidean
from enkabc.simulators import ToyModel, toy_exact_abc_likelihood


def test_weighted_euclidean():
    s = np.array([1.0, 2.0])
    assert weighted_euclidean(s, s, np.ones(2)) == 0.0
    assert weighted_euclidean(np.zeros(1), np.array([3.0]), np.array([3.0])) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    a, b, scale = rng.standard_normal(4), rng.standard_normal(4), rng.random(4) + 0.5
    perm = rng.permutation(4)
    assert weighted_euclidean(a, b, scale) == pytest.approx(
        weighted_euclidean(a[perm], b[perm], scale[perm])
    )
    with pytest.raises(ValueError):
        weighted_euclidean(np.zeros(2), np.zeros(3), np.ones(2))


def test_kernel_logvalue_gaussian():
    k = AbcKernel("gaussian", 0.3, np.ones(1))
    s = np.array([0.7])
    assert kernel_logvalue(k, s, s) == pytest.approx(-0.5 * math.log(2 * math.pi * 0.09))
    k2 = AbcKernel("gaussian", 0.5, np.array([2.0, 0.5]))
    s_obs, sim = np.array([0.1, -0.2]), np.array([0.4, 0.3])
    cov = 0.25 * np.diag([4.0, 0.25])
    assert kernel_logvalue(k2, s_obs, sim) == pytest.approx(
        mvn_logpdf(s_obs, sim, cov), abs=1e-12
    )


def test_kernel_logvalue_uniform_strict():
    k = AbcKernel("uniform", 1.0, np.ones(1))
    assert kernel_logvalue(k, np.zeros(1), np.array([0.5])) == 0.0
    # distance exactly at the tolerance is excluded
    assert kernel_logvalue(k, np.zeros(1), np.array([1.0])) == -math.inf


def test_kernel_validation():
    with pytest.raises(ValueError):
        AbcKernel("triangle", 1.0)
    with pytest.raises(ValueError):
        AbcKernel("uniform", 0.0)
    with pytest.raises(ValueError):
        AbcKernel("uniform", 1.0, np.array([0.0]))


def test_abc_estimate_matches_exact_toy():
    rng = np.random.default_rng(1)
    model = ToyModel()
    kernel = AbcKernel("gaussian", 0.5, model.scale)
    est = abc_loglik_estimate(model, np.zeros(1), np.zeros(1), kernel, 10 ** 5, rng)
    assert est.log_value == pytest.approx(
        toy_exact_abc_likelihood(np.zeros(1), 0.0, 0.5), abs=0.02
    )
    assert not est.degenerate


def test_abc_uniform_huge_eps_is_log_one():
    rng = np.random.default_rng(2)
    model = ToyModel()
    kernel = AbcKernel("uniform", 1e6, model.scale)
    est = abc_loglik_estimate(model, np.zeros(1), np.zeros(1), kernel, 100, rng)
    assert est.log_value == 0.0


def test_abc_uniform_all_rejected_is_degenerate():
    rng = np.random.default_rng(3)
    model = ToyModel()
    kernel = AbcKernel("uniform", 1e-6, model.scale)
    est = abc_loglik_estimate(model, np.array([50.0]), np.zeros(1), kernel, 20, rng)
    assert est.degenerate and est.log_value == -math.inf


def test_abc_uniform_m1_bernoulli_frequency():
    eps = 0.8
    rng = np.random.default_rng(4)
    model = ToyModel()
    kernel = AbcKernel("uniform", eps, model.scale)
    n = 10 ** 4
    hits = 0
    for _ in range(n):
        est = abc_loglik_estimate(model, np.zeros(1), np.zeros(1), kernel, 1, rng)
        hits += est.log_value == 0.0
    p = norm.cdf(eps) - norm.cdf(-eps)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * se


def test_abc_gaussian_unbiased_on_natural_scale():
    rng = np.random.default_rng(5)
    model = ToyModel()
    eps = 0.5
    kernel = AbcKernel("gaussian", eps, model.scale)
    n = 10 ** 4
    vals = np.array([
        abc_loglik_estimate(model, np.zeros(1), np.zeros(1), kernel, 10, rng).log_value
        for _ in range(n)
    ])
    nat = np.exp(vals)
    truth = math.exp(toy_exact_abc_likelihood(np.zeros(1), 0.0, eps))
    se = nat.std(ddof=1) / math.sqrt(n)
    assert abs(nat.mean() - truth) < 3 * se


def test_abc_variance_grows_as_eps_shrinks():
    model = ToyModel()
    sds = []
    for i, eps in enumerate((0.5, 0.1, 0.01)):
        rng = np.random.default_rng(100 + i)
        kernel = AbcKernel("gaussian", eps, model.scale)
        vals = [
            abc_loglik_estimate(model, np.zeros(1), np.zeros(1), kernel, 100, rng).log_value
            for _ in range(100)
        ]
        sds.append(np.std(vals))
    assert sds[0] < sds[1] < sds[2]
