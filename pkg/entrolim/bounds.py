'''Closed-form lower bounds on the L_p norm of the loop error.

Every scalar bound has the shape 2^h / C_p, where h is a conditional
entropy (or entropy rate) of the disturbance in bits and

    C_p = 2 Gamma((p+1)/p) (p e)^(1/p),    C_inf = 2.

The bounds take the disturbance model only; no controller appears in any
signature here.

The multichannel bound is det E[e e^T] >= 2^(2h) / (2 pi e)^m, which reduces
to the scalar variance bound at m = 1.
'''
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from entrolim.distributions import (GeneralizedGaussian, LN2, TWO_PI_E, P_INFINITY,
                                    log_lp_constant, parse_exponent, format_exponent,
                                    DistributionError)
from entrolim.lib import EntrolimError
from entrolim.processes import DEFAULT_HORIZON
from entrolim.spectral import szego_entropy_integral_bits, negentropy_rate_bits, gaussianity_whiteness

SCALAR_FORMS = ('direct', 'asymptotic', 'spectral', 'gw', 'maxdev')
SQUARED_FORMS = ('variance', 'mimo_det', 'mimo_product')
FORMS = SCALAR_FORMS + SQUARED_FORMS

CONSISTENCY_TOLERANCE = 1e-9


class BoundError(EntrolimError):
    pass


def _exponent(p):
    try:
        return parse_exponent(p)
    except DistributionError as e:
        raise BoundError(str(e))


def lp_constant(p):
    return math.exp(log_lp_constant(_exponent(p)))


def lp_bound(h_cond_bits, p):
    '''Lower bound on [E|e_k|^p]^(1/p) given h(d_k | d_0..d_{k-1}) in bits.'''
    return math.exp(h_cond_bits * LN2 - log_lp_constant(_exponent(p)))


def variance_bound(h_cond_bits):
    '''Lower bound on E[e_k^2]: 2^(2h) / (2 pi e).'''
    return lp_bound(h_cond_bits, 2.0) ** 2


def maxdev_bound(h_cond_bits):
    '''Lower bound on esssup |e_k|: 2^h / 2.'''
    return lp_bound(h_cond_bits, P_INFINITY)


def mimo_det_bound(h_cond_bits, m):
    '''Lower bound on det E[e_k e_k^T]: 2^(2h) / (2 pi e)^m.'''
    if m < 1:
        raise BoundError('m must be >= 1 (got %r)' % m)
    if m == 1:
        return variance_bound(h_cond_bits)
    return math.exp(2.0 * h_cond_bits * LN2 - m * math.log(TWO_PI_E))


def mimo_product_bound(h_cond_bits, m):
    '''Lower bound on prod_i E[e_k(i)^2]. Same value as mimo_det_bound; by
    Hadamard's inequality the product of the diagonal dominates the
    determinant.'''
    return mimo_det_bound(h_cond_bits, m)


def equality_density(h_bits, p):
    '''The generalized Gaussian that meets the bound with equality: entropy
    h_bits and L_p norm 2^h / C_p.'''
    return GeneralizedGaussian.from_entropy(h_bits, _exponent(p))


@dataclass(frozen=True)
class BoundSpec:
    p_exponent: float
    step: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'p_exponent', _exponent(self.p_exponent))
        if self.step is not None and self.step < 0:
            raise BoundError('step must be >= 0 (got %r)' % self.step)

    @property
    def is_asymptotic(self):
        return self.step is None


@dataclass(frozen=True)
class BoundReport:
    '''A bound value together with the entropy and constant it came from.

    Scalar forms satisfy bound_value = 2^h / C_p. Squared forms (variance,
    mimo_det, mimo_product) satisfy bound_value = (2^h / C)^2 with
    C = sqrt((2 pi e)^m). k is None for asymptotic reports.
    '''
    form: str
    p_exponent: float
    k: Optional[int]
    conditional_entropy_bits: float
    constant_Cp: float
    bound_value: float
    dimension: int = 1

    def __post_init__(self):
        if self.form not in FORMS:
            raise BoundError('Unknown bound form %r' % self.form)

    @property
    def k_or_asymptotic(self):
        return 'asymptotic' if self.k is None else self.k

    def expected_value(self):
        value = math.exp(self.conditional_entropy_bits * LN2) / self.constant_Cp
        return value * value if self.form in SQUARED_FORMS else value

    def check(self):
        expected = self.expected_value()
        if abs(self.bound_value - expected) > CONSISTENCY_TOLERANCE * max(1.0, abs(expected)):
            raise BoundError('%s bound %r is inconsistent with h=%r, C=%r (expected %r)'
                             % (self.form, self.bound_value, self.conditional_entropy_bits,
                                self.constant_Cp, expected))
        return self

    def to_dict(self):
        out = {
            'form': self.form,
            'p': format_exponent(self.p_exponent) if math.isinf(self.p_exponent) else self.p_exponent,
            'k_or_asymptotic': self.k_or_asymptotic,
            'h_bits': self.conditional_entropy_bits,
            'C_p': self.constant_Cp,
            'bound': self.bound_value,
        }
        if self.dimension > 1:
            out['dimension'] = self.dimension
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        k = data['k_or_asymptotic']
        return cls(form=data['form'], p_exponent=_exponent(data['p']),
                   k=None if k == 'asymptotic' else int(k),
                   conditional_entropy_bits=float(data['h_bits']),
                   constant_Cp=float(data['C_p']), bound_value=float(data['bound']),
                   dimension=int(data.get('dimension', 1))).check()


def _scalar_only(model, what):
    if model.dimension != 1:
        raise BoundError('%s applies to scalar disturbances; %s has %d channels (use the mimo bounds)'
                         % (what, model.descriptor, model.dimension))


def scalar_report(form, p, k, h_bits):
    p = _exponent(p)
    return BoundReport(form, p, k, h_bits, lp_constant(p), lp_bound(h_bits, p))


def lp_bound_at_step(model, p, k, horizon=DEFAULT_HORIZON):
    _scalar_only(model, 'lp_bound_at_step')
    return scalar_report('direct', p, k, model.conditional_entropy_bits(k, horizon=horizon))


def lp_bound_asymptotic(model, p):
    _scalar_only(model, 'lp_bound_asymptotic')
    return scalar_report('asymptotic', p, None, model.entropy_rate_bits())


def lp_bound_for(model, target, horizon=DEFAULT_HORIZON):
    if target.is_asymptotic:
        return lp_bound_asymptotic(model, target.p_exponent)
    return lp_bound_at_step(model, target.p_exponent, target.step, horizon=horizon)


def spectral_lp_bound(model, p):
    '''[2^(-J_inf) 2^(Szego integral)] / C_p.'''
    _scalar_only(model, 'spectral_lp_bound')
    p = _exponent(p)
    szego = szego_entropy_integral_bits(model.power_spectrum())
    negentropy = negentropy_rate_bits(model)
    bound = math.exp((szego - negentropy) * LN2) / lp_constant(p)
    return BoundReport('spectral', p, None, szego - negentropy, lp_constant(p), bound)


def gw_lp_bound(model, p):
    '''(sqrt(2 pi e) / C_p) sqrt(GW * lim E[d_k^2]).'''
    _scalar_only(model, 'gw_lp_bound')
    p = _exponent(p)
    gw = gaussianity_whiteness(model)
    variance = model.stationary_covariance()
    bound = math.sqrt(TWO_PI_E) / lp_constant(p) * math.sqrt(gw * variance)
    h_bits = 0.5 * math.log2(TWO_PI_E * gw * variance)
    return BoundReport('gw', p, None, h_bits, lp_constant(p), bound)


def variance_bound_report(model, k=None, horizon=DEFAULT_HORIZON):
    _scalar_only(model, 'variance_bound_report')
    h = model.entropy_rate_bits() if k is None else model.conditional_entropy_bits(k, horizon=horizon)
    return BoundReport('variance', 2.0, k, h, math.sqrt(TWO_PI_E), variance_bound(h))


def maxdev_bound_report(model, k=None, horizon=DEFAULT_HORIZON):
    _scalar_only(model, 'maxdev_bound_report')
    h = model.entropy_rate_bits() if k is None else model.conditional_entropy_bits(k, horizon=horizon)
    return BoundReport('maxdev', P_INFINITY, k, h, 2.0, maxdev_bound(h))


def _mimo_report(form, k, h_bits, m):
    if form not in ('mimo_det', 'mimo_product'):
        raise BoundError('MIMO form must be mimo_det or mimo_product (got %r)' % form)
    bound = mimo_det_bound(h_bits, m) if form == 'mimo_det' else mimo_product_bound(h_bits, m)
    return BoundReport(form, 2.0, k, h_bits, math.sqrt(TWO_PI_E ** m), bound, dimension=m)


def mimo_bound_at_step(model, k, form='mimo_det', horizon=DEFAULT_HORIZON):
    return _mimo_report(form, k, model.conditional_entropy_bits(k, horizon=horizon), model.dimension)


def mimo_bound_asymptotic(model, form='mimo_det'):
    return _mimo_report(form, None, model.entropy_rate_bits(), model.dimension)


def bound_forms(model, p):
    '''The direct, spectral and GW forms of the asymptotic bound, which must
    agree to quadrature accuracy.'''
    return {
        'direct': lp_bound_asymptotic(model, p),
        'spectral': spectral_lp_bound(model, p),
        'gw': gw_lp_bound(model, p),
    }


def mimo_bound_forms(model):
    '''The determinant bound reached three ways: from the entropy rate, from
    the Szego integral less the negentropy rate, and as GW * det R(0).'''
    m = model.dimension
    szego = szego_entropy_integral_bits(model.power_spectrum())
    gw = gaussianity_whiteness(model)
    covariance = np.atleast_2d(model.stationary_covariance())
    _, logdet = np.linalg.slogdet(covariance)
    gw_bits = 0.5 * (m * math.log(TWO_PI_E) + math.log(gw) + logdet) / LN2
    return {
        'direct': mimo_bound_asymptotic(model),
        'spectral': _mimo_report('mimo_det', None, szego - negentropy_rate_bits(model), m),
        'gw': _mimo_report('mimo_det', None, gw_bits, m),
    }
