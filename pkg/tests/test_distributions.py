import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from entrolim.distributions import (GeneralizedGaussian, GaussianVector, DistributionError, P_INFINITY,
                                    parse_exponent, format_exponent, log_lp_constant, gg_pdf, gg_cdf,
                                    gg_entropy_bits, gg_lp_norm, gg_variance, gg_sample,
                                    gaussian_vector_entropy_bits, gaussian_vector_sample)
from entrolim.estimators import entropy_estimate_1d


def test_parse_exponent():
    assert parse_exponent(2) == 2.0
    assert parse_exponent('inf') == P_INFINITY
    assert parse_exponent('Infinity') == P_INFINITY
    assert parse_exponent(float('inf')) == P_INFINITY
    assert format_exponent(P_INFINITY) == 'inf'
    assert format_exponent(1.5) == '1.5'
    for bad in (0.5, 'abc', True, float('nan'), None, [2]):
        with pytest.raises(DistributionError):
            parse_exponent(bad)


def test_pdf_values():
    assert_allclose(gg_pdf(0.0, GeneralizedGaussian(2, 1)), 1 / math.sqrt(2 * math.pi), rtol=1e-12)
    assert_allclose(gg_pdf(0.0, GeneralizedGaussian(1, 1)), 0.5, rtol=1e-12)
    assert gg_pdf(0.5, GeneralizedGaussian.uniform(1.0)) == 0.5
    assert gg_pdf(1.5, GeneralizedGaussian.uniform(1.0)) == 0.0


def test_pdf_symmetric():
    x = np.linspace(0.0, 5.0, 41)
    for p in (1.0, 1.5, 2.0, 4.0, P_INFINITY):
        d = GeneralizedGaussian(p, 1.3)
        assert np.array_equal(d.pdf(x), d.pdf(-x))


def test_pdf_integrates_to_cdf():
    d = GeneralizedGaussian(3.0, 0.7)
    x = np.linspace(-6, 6, 200001)
    assert_allclose(trapezoid(d.pdf(x), x), 1.0, rtol=1e-6)
    assert_allclose(gg_cdf(0.0, d), 0.5)
    assert_allclose(gg_cdf(np.array([-0.5, 0.0, 0.5, 2.0]), GeneralizedGaussian.uniform(1.0)),
                    [0.25, 0.5, 0.75, 1.0])
    assert_allclose(gg_cdf(1.0, GeneralizedGaussian.gaussian()), 0.8413447460685429, rtol=1e-12)


def test_entropy_values():
    assert_allclose(gg_entropy_bits(GeneralizedGaussian(2, 1)), 2.04710, atol=1e-5)
    assert_allclose(gg_entropy_bits(GeneralizedGaussian(1, 1)), 2.44270, atol=1e-5)
    assert gg_entropy_bits(GeneralizedGaussian.uniform(1.0)) == 1.0
    assert_allclose(GeneralizedGaussian.gaussian(2.0).entropy_bits(), 2.54710, atol=1e-5)


def test_lp_constant_log():
    assert_allclose(math.exp(log_lp_constant(1.0)), 2 * math.e, rtol=1e-12)
    assert_allclose(math.exp(log_lp_constant(2.0)), math.sqrt(2 * math.pi * math.e), rtol=1e-12)
    assert math.exp(log_lp_constant(P_INFINITY)) == 2.0


def test_lp_norm():
    assert gg_lp_norm(GeneralizedGaussian(2, 1)) == 1.0
    assert gg_lp_norm(GeneralizedGaussian(1, 3)) == 3.0
    assert gg_lp_norm(GeneralizedGaussian(4, 2)) == 2.0
    with pytest.raises(DistributionError):
        gg_lp_norm(GeneralizedGaussian.uniform(1.0))


def test_variance():
    assert_allclose(gg_variance(GeneralizedGaussian(2, 1.5)), 2.25, rtol=1e-12)
    assert_allclose(gg_variance(GeneralizedGaussian.laplace(1.0)), 2.0, rtol=1e-12)
    assert_allclose(gg_variance(GeneralizedGaussian.uniform(1.0)), 1.0 / 3.0, rtol=1e-12)


def test_from_entropy_inverts_entropy():
    for p in (1.0, 2.0, 3.5, P_INFINITY):
        d = GeneralizedGaussian.from_entropy(1.7, p)
        assert_allclose(d.entropy_bits(), 1.7, rtol=1e-12)
    assert_allclose(GeneralizedGaussian.from_entropy(1.0, 'inf').mu_scale, 1.0)


def test_family_names():
    assert GeneralizedGaussian(2, 1).family == 'gaussian'
    assert GeneralizedGaussian(1, 1).family == 'laplace'
    assert GeneralizedGaussian('inf', 1).family == 'uniform'
    assert GeneralizedGaussian(3, 1).family == 'generalized_gaussian'


def test_invalid_scale():
    for mu in (0.0, -1.0, float('inf')):
        with pytest.raises(DistributionError):
            GeneralizedGaussian(2, mu)


def test_sample_deterministic():
    d = GeneralizedGaussian(1.5, 1.0)
    assert np.array_equal(gg_sample(d, 100, 3), gg_sample(d, 100, 3))
    with pytest.raises(DistributionError):
        d.sample(0, seed=1)


def test_sample_moments():
    x = gg_sample(GeneralizedGaussian(2, 1), 10 ** 6, 1)
    assert abs(np.mean(x)) < 0.004
    x = gg_sample(GeneralizedGaussian(1, 1), 10 ** 6, 2)
    assert_allclose(np.mean(np.abs(x)), 1.0, rtol=0.01)
    x = gg_sample(GeneralizedGaussian(4, 2), 10 ** 6, 3)
    estimate = np.mean(np.abs(x) ** 4) ** 0.25
    se = np.std(np.abs(x) ** 4) / math.sqrt(len(x)) * estimate / (4 * np.mean(np.abs(x) ** 4))
    assert abs(estimate - 2.0) < 4 * se
    u = gg_sample(GeneralizedGaussian.uniform(1.0), 10 ** 6, 4)
    assert np.all(np.abs(u) <= 1.0)
    assert np.max(np.abs(u)) > 0.99


@pytest.mark.slow
def test_sample_entropy_matches():
    x = gg_sample(GeneralizedGaussian(2, 1), 10 ** 5, 5)
    assert_allclose(entropy_estimate_1d(x).value_bits, 2.047, atol=0.03)


def test_gaussian_vector_entropy():
    assert_allclose(gaussian_vector_entropy_bits(GaussianVector([[1.0]])), 2.04710, atol=1e-5)
    assert_allclose(gaussian_vector_entropy_bits(GaussianVector(np.eye(2))), 4.09420, atol=1e-5)
    assert_allclose(gaussian_vector_entropy_bits(GaussianVector(np.diag([4.0, 1.0]))), 5.09420, atol=1e-5)


def test_gaussian_vector_rejects_bad_covariance():
    with pytest.raises(DistributionError):
        GaussianVector([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DistributionError):
        GaussianVector([[1.0, 0.1], [0.0, 1.0]])


def test_gaussian_vector_sample():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = gaussian_vector_sample(GaussianVector(cov), 200000, 9)
    assert x.shape == (200000, 2)
    assert_allclose(np.cov(x, rowvar=False), cov, rtol=0.03, atol=0.01)
