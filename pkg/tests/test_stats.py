import json
import math

import numpy as np
import pytest
from scipy.stats import norm, poisson

from dust_coalescent.stats import (
    MomentCI,
    Sample,
    chi_square,
    chi_square_two_sample,
    empirical_cf,
    ks_distance,
    moment_ci,
    tv_distance,
    verdict_record,
)


def test_sample_validation():
    s = Sample(values=[1.0, 2.0], n=10)
    assert s.count == 2
    with pytest.raises(ValueError):
        Sample(values=[], n=10)
    with pytest.raises(ValueError):
        Sample(values=[1.0, math.nan], n=10)


# ---------------------------------------------------------------------------
# KS distance


def test_ks_distance_self():
    x = np.linspace(0.0, 1.0, 100, endpoint=False) + 0.005
    # empirical CDF vs the uniform CDF on a near-perfect sample
    assert ks_distance(x, lambda t: np.clip(t, 0, 1)) <= 1.0 / 100 + 1e-9


def test_ks_distance_normal_sample():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10000)
    assert ks_distance(x, norm.cdf) < 0.025


def test_ks_distance_constant_sample():
    # all mass at 0 against N(0,1): distance is max(F(0), 1-F(0)) = 1/2
    assert ks_distance(np.zeros(50), norm.cdf) == pytest.approx(0.5)


def test_ks_distance_two_sample():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(5000)
    b = rng.standard_normal(5000)
    assert ks_distance(a, b) < 0.04
    assert ks_distance(a, a + 10.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ks_distance([], norm.cdf)
    with pytest.raises(ValueError):
        ks_distance([1.0], [])


# ---------------------------------------------------------------------------
# characteristic function


def test_empirical_cf_degenerate():
    z = np.array([0.0, 1.0, 2.0])
    cf = empirical_cf(np.zeros(10), z)
    assert np.allclose(cf, 1.0)


def test_empirical_cf_symmetric_sample():
    x = np.array([-1.0, 1.0])
    cf = empirical_cf(x, np.array([0.7]))
    assert cf[0] == pytest.approx(math.cos(0.7))


def test_empirical_cf_normal():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(20000)
    z = np.array([0.5, 1.0])
    cf = empirical_cf(x, z)
    assert np.allclose(cf, np.exp(-z ** 2 / 2), atol=0.02)


# ---------------------------------------------------------------------------
# moment confidence intervals


def test_moment_ci_coverage():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(200):
        x = rng.exponential(1.0, 400)
        if moment_ci(x, 1).contains(1.0):
            hits += 1
    assert hits >= 190   # nominal 99%


def test_moment_ci_small_sample_error():
    with pytest.raises(ValueError):
        moment_ci(np.ones(10), 1)


def test_moment_ci_second_moment():
    x = np.array([1.0, -1.0] * 50)
    ci = moment_ci(x, 2)
    assert ci.estimate == pytest.approx(1.0)
    assert ci.lo == pytest.approx(1.0) and ci.hi == pytest.approx(1.0)
    assert MomentCI(1.0, 0.5, 1.5).contains(1.2)


# ---------------------------------------------------------------------------
# histogram distances and chi-square


def test_tv_distance_extremes():
    assert tv_distance({0: 3, 1: 3}, {0: 1, 1: 1}) == pytest.approx(0.0)
    assert tv_distance({0: 1}, {1: 1}) == pytest.approx(1.0)
    assert tv_distance([2, 2], [1, 1, 0]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        tv_distance([0.0], [1.0])


def test_chi_square_poisson_oracle():
    rng = np.random.default_rng(4)
    draws = rng.poisson(3.0, 20000)
    observed = np.bincount(draws, minlength=20)
    expected = poisson.pmf(np.arange(20), 3.0) * 20000
    assert chi_square(observed, expected) > 0.001
    # a shifted model must be rejected decisively
    wrong = poisson.pmf(np.arange(20), 4.0) * 20000
    assert chi_square(observed, wrong) < 1e-6


def test_chi_square_pools_sparse_cells():
    observed = {0: 1000, 1: 1, 2: 1, 3: 0, 4: 1}
    expected = {0: 1000.0, 1: 1.0, 2: 1.0, 3: 0.5, 4: 0.5}
    p = chi_square(observed, expected)
    assert 0.0 <= p <= 1.0


def test_chi_square_single_cell_is_trivial():
    assert chi_square([100], [100.0]) == 1.0


def test_chi_square_two_sample_behaviour():
    rng = np.random.default_rng(5)
    a = np.bincount(rng.poisson(3.0, 10000), minlength=15)
    b = np.bincount(rng.poisson(3.0, 10000), minlength=15)
    c = np.bincount(rng.poisson(4.0, 10000), minlength=15)
    assert chi_square_two_sample(a, b) > 0.001
    assert chi_square_two_sample(a, c) < 1e-6


def test_record_shape():
    rec = json.loads(verdict_record("ks-normal", 0.03, 0.12, True))
    assert rec == {"test": "ks-normal", "statistic": 0.03,
                   "threshold": 0.12, "pass": True}
