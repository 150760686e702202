import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from entrolim import bounds
from entrolim.bounds import (BoundError, BoundReport, BoundSpec, lp_constant, lp_bound, variance_bound,
                             maxdev_bound, mimo_det_bound, mimo_product_bound, equality_density,
                             lp_bound_at_step, lp_bound_asymptotic, lp_bound_for, spectral_lp_bound,
                             gw_lp_bound, bound_forms, mimo_bound_at_step, mimo_bound_asymptotic,
                             mimo_bound_forms, variance_bound_report, maxdev_bound_report)
from entrolim.distributions import GeneralizedGaussian, GaussianVector, P_INFINITY
from entrolim.processes import IID, GaussARMA, GenGaussAR, VectorGaussAR

GAUSS_BITS = 0.5 * math.log2(2 * math.pi * math.e)
LAPLACE_BITS = math.log2(2 * math.e)


def random_arma(rng):
    ar = list(-np.atleast_1d(np.poly(rng.uniform(-0.9, 0.9, size=int(rng.integers(0, 3)))))[1:])
    ma = list(np.atleast_1d(np.poly(rng.uniform(-0.8, 0.8, size=int(rng.integers(0, 3)))))[1:])
    return GaussARMA(ar, ma, float(rng.uniform(0.2, 3.0)))


class TestConstants(object):
    def test_lp_constant(self):
        assert_allclose(lp_constant(1), 5.43656, atol=1e-5)
        assert_allclose(lp_constant(2), 4.13273, atol=1e-5)
        assert lp_constant('inf') == 2.0
        with pytest.raises(BoundError):
            lp_constant(0.5)

    def test_lp_bound_equality_cases(self):
        assert_allclose(lp_bound(GAUSS_BITS, 2), 1.0, rtol=1e-12)
        assert_allclose(lp_bound(1.0, P_INFINITY), 1.0, rtol=1e-12)
        assert_allclose(lp_bound(LAPLACE_BITS, 1), 1.0, rtol=1e-12)

    def test_lp_bound_monotone_in_h(self):
        values = [lp_bound(h, 3.0) for h in np.linspace(-2, 4, 13)]
        assert all(x < y for x, y in zip(values, values[1:]))

    def test_variance_bound(self):
        assert_allclose(variance_bound(GAUSS_BITS), 1.0, rtol=1e-12)
        assert_allclose(variance_bound(GAUSS_BITS + 0.5), 2.0, rtol=1e-12)
        assert_allclose(variance_bound(1.0), 4 / (2 * math.pi * math.e), rtol=1e-12)
        for h in (-1.0, 0.3, 2.5):
            assert variance_bound(h) == lp_bound(h, 2) ** 2

    def test_maxdev_bound(self):
        assert maxdev_bound(1.0) == 1.0
        assert_allclose(maxdev_bound(2.0), 2.0, rtol=1e-14)
        assert_allclose(maxdev_bound(GAUSS_BITS), math.sqrt(2 * math.pi * math.e) / 2, rtol=1e-12)
        for h in (-1.0, 0.3, 2.5):
            assert maxdev_bound(h) == lp_bound(h, P_INFINITY)

    def test_mimo(self):
        assert_allclose(mimo_det_bound(2 * GAUSS_BITS, 2), 1.0, rtol=1e-12)
        assert mimo_det_bound(GAUSS_BITS, 1) == variance_bound(GAUSS_BITS)
        assert_allclose(mimo_det_bound(GaussianVector(np.diag([4.0, 1.0])).entropy_bits(), 2), 4.0, rtol=1e-12)
        correlated = np.array([[1.0, 0.5], [0.5, 1.0]])
        bound = mimo_product_bound(GaussianVector(correlated).entropy_bits(), 2)
        assert_allclose(bound, 0.75, rtol=1e-12)
        assert bound < np.prod(np.diag(correlated))
        with pytest.raises(BoundError):
            mimo_det_bound(1.0, 0)

    def test_equality_density(self):
        for p in (1.0, 2.0, 4.0, P_INFINITY):
            d = equality_density(1.3, p)
            assert_allclose(d.entropy_bits(), 1.3, rtol=1e-12)
            if p != P_INFINITY:
                assert_allclose(d.lp_norm(), lp_bound(1.3, p), rtol=1e-12)
            else:
                assert_allclose(d.mu_scale, maxdev_bound(1.3), rtol=1e-12)


class TestModelBounds(object):
    def test_at_step(self):
        model = GaussARMA([0.9])
        assert_allclose(lp_bound_at_step(model, 2, 5).bound_value, 1.0, rtol=1e-10)
        assert_allclose(lp_bound_at_step(model, 2, 0).bound_value, math.sqrt(1 / 0.19), rtol=1e-10)
        assert_allclose(lp_bound_at_step(model, 2, 0).bound_value, 2.294, atol=1e-3)
        uniform = IID(GeneralizedGaussian.uniform(1.0))
        for k in (0, 7):
            assert_allclose(lp_bound_at_step(uniform, 'inf', k).bound_value, 1.0, rtol=1e-12)

    def test_asymptotic(self):
        assert_allclose(lp_bound_asymptotic(GaussARMA([0.5]), 2).bound_value, 1.0, rtol=1e-12)
        assert_allclose(lp_bound_asymptotic(GenGaussAR([0.9], GeneralizedGaussian.uniform(1.0)), 'inf').bound_value,
                        1.0, rtol=1e-12)
        assert_allclose(lp_bound_asymptotic(IID(GeneralizedGaussian.laplace(1.0)), 1).bound_value, 1.0, rtol=1e-12)

    def test_bound_spec(self):
        model = GaussARMA([0.9])
        assert lp_bound_for(model, BoundSpec(2.0)).k is None
        assert lp_bound_for(model, BoundSpec(2.0, 0)).k == 0
        assert BoundSpec('inf').p_exponent == P_INFINITY
        with pytest.raises(BoundError):
            BoundSpec(2.0, -1)

    def test_spectral_and_gw(self):
        cases = [(GaussARMA([0.5]), 2), (IID(GeneralizedGaussian.laplace(1.0)), 1),
                 (IID(GeneralizedGaussian.gaussian()), 2), (IID(GeneralizedGaussian.uniform(1.0)), 'inf')]
        for model, p in cases:
            assert_allclose(spectral_lp_bound(model, p).bound_value, 1.0, atol=1e-8)
            assert_allclose(gw_lp_bound(model, p).bound_value, 1.0, atol=1e-8)

    def test_form_consistency_random_models(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            model = random_arma(rng)
            p = [1.0, 2.0, 3.0, P_INFINITY][int(rng.integers(0, 4))]
            forms = bound_forms(model, p)
            direct = forms['direct'].bound_value
            assert abs(forms['spectral'].bound_value - direct) <= 1e-8 * max(1.0, direct)
            assert abs(forms['gw'].bound_value - direct) <= 1e-8 * max(1.0, direct)

    def test_report_helpers(self):
        model = GaussARMA([0.9])
        assert_allclose(variance_bound_report(model).bound_value, 1.0, rtol=1e-12)
        assert_allclose(variance_bound_report(model, 0).bound_value, 1 / 0.19, rtol=1e-10)
        assert_allclose(maxdev_bound_report(model).bound_value, maxdev_bound(GAUSS_BITS), rtol=1e-12)

    def test_scalar_only(self):
        with pytest.raises(BoundError):
            lp_bound_asymptotic(VectorGaussAR(np.zeros((2, 2)), np.eye(2)), 2)

    def test_mimo_reports(self):
        model = VectorGaussAR(0.5 * np.eye(2), np.eye(2))
        assert_allclose(mimo_bound_asymptotic(model).bound_value, 1.0, rtol=1e-12)
        assert_allclose(mimo_bound_at_step(model, 0).bound_value, (4 / 3) ** 2, rtol=1e-10)
        assert mimo_bound_asymptotic(model, 'mimo_product').form == 'mimo_product'
        with pytest.raises(BoundError):
            mimo_bound_asymptotic(model, 'variance')
        forms = mimo_bound_forms(VectorGaussAR([[0.5, 0.2], [-0.1, 0.3]], [[1.0, 0.3], [0.3, 2.0]]))
        direct = forms['direct'].bound_value
        assert_allclose(forms['spectral'].bound_value, direct, rtol=1e-8)
        assert_allclose(forms['gw'].bound_value, direct, rtol=1e-10)


class TestBoundReport(object):
    def test_json_fields(self):
        report = lp_bound_asymptotic(IID(GeneralizedGaussian.uniform(1.0)), 'inf')
        data = json.loads(report.to_json())
        assert set(data) == {'form', 'p', 'k_or_asymptotic', 'h_bits', 'C_p', 'bound'}
        assert data['p'] == 'inf'
        assert data['k_or_asymptotic'] == 'asymptotic'
        again = BoundReport.from_dict(data)
        assert again == report

    def test_mimo_json_keeps_dimension(self):
        report = mimo_bound_at_step(VectorGaussAR(0.5 * np.eye(2), np.eye(2)), 2)
        data = json.loads(report.to_json())
        assert data['dimension'] == 2
        again = BoundReport.from_dict(data)
        assert again.dimension == 2
        assert again == report

    def test_check_catches_tampering(self):
        data = lp_bound_at_step(GaussARMA([0.5]), 2, 3).to_dict()
        data['bound'] = data['bound'] * 1.01
        with pytest.raises(BoundError):
            BoundReport.from_dict(data)

    def test_squared_forms_check(self):
        variance_bound_report(GaussARMA([0.5])).check()
        mimo_bound_asymptotic(VectorGaussAR(0.5 * np.eye(2), np.eye(2))).check()

    def test_unknown_form(self):
        with pytest.raises(BoundError):
            BoundReport('upper', 2.0, None, 1.0, 1.0, 1.0)

    def test_no_controller_argument(self):
        report = bounds.scalar_report('direct', 2, 4, GAUSS_BITS)
        assert_allclose(report.bound_value, 1.0, rtol=1e-12)
