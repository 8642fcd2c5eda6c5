import math

import numpy as np
import pytest

from fna.levy import StableParams, characteristic_function, empirical_cf, sample_sas

U_GRID = np.array([0.25, 0.5, 1.0, 2.0, 3.0])


def test_cf_examples():
    for a in (1.0, 1.3, 2.0):
        assert characteristic_function(0.0, StableParams(a, beta=0.7, sigma=2.0)) == 1
    assert characteristic_function(1.0, StableParams(2.0)) == pytest.approx(math.exp(-1))
    p = StableParams(1.5)
    assert characteristic_function(-1.0, p) == pytest.approx(math.exp(-1))
    assert characteristic_function(-1.0, p) == np.conj(characteristic_function(1.0, p))


def test_cf_skewed_alpha_one_log_branch():
    p = StableParams(1.0, beta=0.5, sigma=1.0)
    u = 2.0
    expected = np.exp(-u * (1 + 1j * 0.5 * (2 / math.pi) * math.log(u)))
    assert characteristic_function(u, p) == pytest.approx(expected)


def test_stable_params_validation():
    for kw in ({"alpha": 0.0}, {"alpha": 2.5}, {"alpha": 1.0, "beta": 2.0},
               {"alpha": 1.0, "sigma": 0.0}):
        with pytest.raises(ValueError):
            StableParams(**kw)
    assert StableParams(1.2).symmetric
    assert not StableParams(1.2, mu=1.0).symmetric


def test_sampler_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_sas(1.2, 0.0, 10)
    with pytest.raises(ValueError):
        sample_sas(2.5, 1.0, 10)
    with pytest.raises(ValueError):
        sample_sas(1.2, 1.0, 0)


def test_sampler_deterministic():
    a = sample_sas(1.3, 1.0, 1000, seed=11)
    b = sample_sas(1.3, 1.0, 1000, seed=11)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_sas(1.3, 1.0, 1000, seed=12))


def test_gaussian_branch_variance():
    x = sample_sas(2.0, 1.0, 100_000, seed=0)
    assert abs(x.var() - 2.0) < 0.05


def test_cauchy_branch_cf():
    x = sample_sas(1.0, 1.0, 100_000, seed=1)
    u = np.array([0.5, 1.0, 2.0])
    assert np.max(np.abs(empirical_cf(x, u) - np.exp(-u))) < 0.02


def test_symmetric_median():
    x = sample_sas(1.2, 1.0, 100_000, seed=2)
    assert abs(np.median(x)) < 0.05


@pytest.mark.parametrize("alpha", [1.0, 1.2, 1.5, 2.0])
@pytest.mark.parametrize("sigma", [1.0, 0.5])
def test_empirical_cf_matches_theory(alpha, sigma):
    x = sample_sas(alpha, sigma, 100_000, seed=3)
    ref = characteristic_function(U_GRID, StableParams(alpha, sigma=sigma))
    assert np.max(np.abs(empirical_cf(x, U_GRID) - ref)) < 0.02
