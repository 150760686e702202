'''Generalized Gaussian (exponential power) densities and Gaussian vectors.

All entropies are in bits. The exponent p = +infinity is represented by the
sentinel P_INFINITY and selects the exact uniform branch.
'''
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from entrolim.lib import EntrolimError

P_INFINITY = math.inf

LN2 = math.log(2.0)
TWO_PI_E = 2.0 * math.pi * math.e

_infinity_names = {'inf', '+inf', 'infinity', '+infinity', '∞'}


class DistributionError(EntrolimError):
    pass


def is_infinite(p):
    return math.isinf(p)


def parse_exponent(value):
    '''Accept a number or one of the spellings of infinity; reject p < 1.'''
    if isinstance(value, str):
        text = value.strip().lower()
        if text in _infinity_names:
            return P_INFINITY
        try:
            value = float(text)
        except ValueError:
            raise DistributionError('Not a valid exponent: %r' % value)
    if isinstance(value, bool):
        raise DistributionError('Not a valid exponent: %r' % value)
    try:
        p = float(value)
    except (TypeError, ValueError):
        raise DistributionError('Not a valid exponent: %r' % (value,))
    if math.isnan(p) or p < 1.0:
        raise DistributionError('Exponent p must be >= 1 (got %r)' % value)
    return P_INFINITY if math.isinf(p) else p


def format_exponent(p):
    return 'inf' if is_infinite(p) else repr(float(p))


def log_lp_constant(p):
    '''Natural log of 2 Gamma((p+1)/p) (p e)^(1/p); log 2 for p = infinity.'''
    if is_infinite(p):
        return LN2
    return LN2 + gammaln(1.0 + 1.0 / p) + (math.log(p) + 1.0) / p


@dataclass(frozen=True)
class GeneralizedGaussian:
    '''Zero-mean density exp(-|x|^p / (p mu^p)) / (2 Gamma((p+1)/p) p^(1/p) mu).

    p = 2 is the Gaussian with standard deviation mu, p = 1 the Laplace
    density with scale mu, and p = P_INFINITY the uniform density on
    [-mu, mu]. For finite p, mu is also the L_p norm [E|x|^p]^(1/p).
    '''
    p_exponent: float
    mu_scale: float

    def __post_init__(self):
        p = parse_exponent(self.p_exponent)
        object.__setattr__(self, 'p_exponent', p)
        if not (self.mu_scale > 0.0) or math.isinf(self.mu_scale):
            raise DistributionError('mu_scale must be a positive finite number (got %r)' % self.mu_scale)
        object.__setattr__(self, 'mu_scale', float(self.mu_scale))

    @classmethod
    def gaussian(cls, variance=1.0):
        return cls(2.0, math.sqrt(variance))

    @classmethod
    def laplace(cls, mu=1.0):
        return cls(1.0, mu)

    @classmethod
    def uniform(cls, half_width=1.0):
        return cls(P_INFINITY, half_width)

    @classmethod
    def from_entropy(cls, h_bits, p):
        '''The member of the family with entropy h_bits: mu = 2^h / C_p.'''
        p = parse_exponent(p)
        return cls(p, math.exp(h_bits * LN2 - log_lp_constant(p)))

    @property
    def is_uniform(self):
        return is_infinite(self.p_exponent)

    @property
    def is_gaussian(self):
        return self.p_exponent == 2.0

    @property
    def family(self):
        if self.is_uniform:
            return 'uniform'
        if self.p_exponent == 2.0:
            return 'gaussian'
        if self.p_exponent == 1.0:
            return 'laplace'
        return 'generalized_gaussian'

    @property
    def descriptor(self):
        return 'gg(p=%s,mu=%g)' % (format_exponent(self.p_exponent), self.mu_scale)

    def _log_normalizer(self):
        p, mu = self.p_exponent, self.mu_scale
        return LN2 + gammaln(1.0 + 1.0 / p) + math.log(p) / p + math.log(mu)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        mu = self.mu_scale
        if self.is_uniform:
            out = np.where(np.abs(x) <= mu, 0.5 / mu, 0.0)
        else:
            p = self.p_exponent
            out = np.exp(-np.abs(x) ** p / (p * mu ** p) - self._log_normalizer())
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        mu = self.mu_scale
        if self.is_uniform:
            out = np.clip((x + mu) / (2.0 * mu), 0.0, 1.0)
        else:
            p = self.p_exponent
            out = 0.5 + 0.5 * np.sign(x) * gammainc(1.0 / p, np.abs(x) ** p / (p * mu ** p))
        return out if out.ndim else float(out)

    def entropy_bits(self):
        return (log_lp_constant(self.p_exponent) + math.log(self.mu_scale)) / LN2

    def lp_norm(self):
        if self.is_uniform:
            raise DistributionError('L_p norm is undefined for p = infinity; the support half-width is mu_scale')
        return self.mu_scale

    def variance(self):
        mu = self.mu_scale
        if self.is_uniform:
            return mu * mu / 3.0
        p = self.p_exponent
        return mu * mu * math.exp(2.0 * math.log(p) / p + gammaln(3.0 / p) - gammaln(1.0 / p))

    def sample(self, count, seed=None, rng=None):
        '''|x|^p / (p mu^p) ~ Gamma(1/p, 1); the sign is an independent fair coin.'''
        if count < 1:
            raise DistributionError('count must be >= 1 (got %r)' % count)
        if rng is None:
            rng = np.random.default_rng(seed)
        mu = self.mu_scale
        if self.is_uniform:
            return rng.uniform(-mu, mu, size=count)
        p = self.p_exponent
        g = rng.gamma(1.0 / p, 1.0, size=count)
        magnitude = (p * g) ** (1.0 / p) * mu
        sign = 2.0 * rng.integers(0, 2, size=count) - 1.0
        return sign * magnitude


@dataclass(frozen=True, eq=False)
class GaussianVector:
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DistributionError('covariance must be a square matrix (got shape %s)' % (cov.shape,))
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise DistributionError('covariance is not symmetric')
        eigenvalues = np.linalg.eigvalsh(cov)
        if eigenvalues[0] <= 0.0:
            raise DistributionError('covariance is not positive definite (smallest eigenvalue %g)' % eigenvalues[0])
        cov.setflags(write=False)
        object.__setattr__(self, 'covariance', cov)

    @property
    def dimension(self):
        return self.covariance.shape[0]

    def entropy_bits(self):
        sign, logdet = np.linalg.slogdet(self.covariance)
        return 0.5 * (self.dimension * math.log(TWO_PI_E) + logdet) / LN2

    def sample(self, count, seed=None, rng=None):
        if rng is None:
            rng = np.random.default_rng(seed)
        chol = np.linalg.cholesky(self.covariance)
        return rng.standard_normal((count, self.dimension)) @ chol.T


def gg_pdf(x, d):
    return d.pdf(x)


def gg_cdf(x, d):
    return d.cdf(x)


def gg_entropy_bits(d):
    return d.entropy_bits()


def gg_lp_norm(d):
    return d.lp_norm()


def gg_variance(d):
    return d.variance()


def gg_sample(d, count, seed):
    return d.sample(count, seed)


def gaussian_vector_entropy_bits(g):
    return g.entropy_bits()


def gaussian_vector_sample(g, count, seed):
    return g.sample(count, seed)
