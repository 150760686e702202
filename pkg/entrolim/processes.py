'''Disturbance process models {d_k}: sample paths, conditional entropies,
entropy rates, autocovariances and power spectra.

Sign convention for the scalar linear models:

    d_k = phi_1 d_{k-1} + ... + phi_na d_{k-na} + w_k + theta_1 w_{k-1} + ... + theta_nc w_{k-nc}
'''
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.signal import lfilter, lfiltic

from entrolim.distributions import (GeneralizedGaussian, GaussianVector, DistributionError,
                                    TWO_PI_E, parse_exponent)
from entrolim.lib import EntrolimError, LRUCache
from entrolim.spectral import SpectralDensity

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 4096
MIN_BURN_IN = 100

_prediction_cache = LRUCache(size_limit=32)


class ModelError(EntrolimError):
    pass


class CapacityError(EntrolimError):
    pass


class AnalyticUnavailable(EntrolimError):
    pass


def _coefficients(values, name):
    try:
        coeffs = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ModelError('%s must be a list of numbers (got %r)' % (name, values))
    if any(not math.isfinite(c) for c in coeffs):
        raise ModelError('%s contains a non-finite value' % name)
    return coeffs


def _max_root_modulus(poly):
    '''Largest |z| over roots of z^n + poly[1] z^(n-1) + ... (poly[0] == 1).'''
    if len(poly) <= 1:
        return 0.0
    return float(np.max(np.abs(np.roots(poly))))


def psi_weights(ar, ma, count):
    '''Impulse response psi_0..psi_{count-1} of Theta(L) / Phi(L).'''
    psi = np.zeros(max(count, 1))
    psi[0] = 1.0
    for j in range(1, count):
        value = ma[j - 1] if j <= len(ma) else 0.0
        for i in range(1, min(j, len(ar)) + 1):
            value += ar[i - 1] * psi[j - i]
        psi[j] = value
    return psi[:count]


def arma_autocovariance(ar, ma, variance, max_lag):
    '''gamma(0..max_lag): the first na+1 Yule-Walker equations solved as a
    linear system, then the recursion.'''
    na, nc = len(ar), len(ma)
    theta = np.concatenate([[1.0], ma])
    psi = psi_weights(ar, ma, nc + 1)

    def rhs(k):
        if k > nc:
            return 0.0
        return variance * float(np.dot(theta[k:], psi[:nc + 1 - k]))

    system = np.zeros((na + 1, na + 1))
    b = np.zeros(na + 1)
    for k in range(na + 1):
        system[k, k] += 1.0
        for i in range(1, na + 1):
            system[k, abs(k - i)] -= ar[i - 1]
        b[k] = rhs(k)
    first = np.linalg.solve(system, b)

    gamma = np.zeros(max_lag + 1)
    gamma[:min(na, max_lag) + 1] = first[:min(na, max_lag) + 1]
    for k in range(na + 1, max_lag + 1):
        gamma[k] = sum(ar[i - 1] * gamma[k - i] for i in range(1, na + 1)) + rhs(k)
    return gamma


def levinson_durbin(acov, order, keep_coefficients=False):
    '''Levinson-Durbin recursion on an autocovariance sequence.

    Returns (coefficients, errors). errors[i] is the one-step prediction
    error variance from i past values; the order-i predictor is
    sum_j coefficients[i][j-1] * d_{k-j}. With keep_coefficients False only
    the final order's coefficients are returned.
    '''
    acov = np.asarray(acov, dtype=float)
    if len(acov) < order + 1:
        raise CapacityError('Levinson-Durbin needs %d autocovariances, got %d' % (order + 1, len(acov)))
    errors = np.empty(order + 1)
    errors[0] = acov[0]
    a = np.zeros(0)
    table = [a] if keep_coefficients else None
    for i in range(1, order + 1):
        reflection = (acov[i] - np.dot(a, acov[i - 1:0:-1])) / errors[i - 1]
        a = np.concatenate([a - reflection * a[::-1], [reflection]])
        errors[i] = errors[i - 1] * (1.0 - reflection * reflection)
        if keep_coefficients:
            table.append(a)
    return (table if keep_coefficients else a), errors


class DisturbanceModel(object):
    '''Common interface of the disturbance models.'''
    kind = None
    dimension = 1

    @property
    def is_gaussian(self):
        return False

    @property
    def descriptor(self):
        raise NotImplementedError

    def effective_memory(self):
        return 0

    def sample_path(self, length, seed):
        raise NotImplementedError

    def conditional_entropy_bits(self, k, horizon=DEFAULT_HORIZON):
        raise NotImplementedError

    def entropy_rate_bits(self):
        raise NotImplementedError

    def autocovariance(self, max_lag):
        raise NotImplementedError

    def power_spectrum(self):
        raise NotImplementedError

    def stationary_covariance(self):
        return float(self.autocovariance(0)[0])

    def entropy_schedule(self, horizon):
        hs = []
        for k in range(horizon + 1):
            try:
                hs.append(self.conditional_entropy_bits(k, horizon=max(horizon, DEFAULT_HORIZON)))
            except AnalyticUnavailable:
                hs.append(math.nan)
        return EntropySchedule(tuple(hs), self.entropy_rate_bits())

    def __str__(self):
        return self.descriptor


class ScalarLinearModel(DisturbanceModel):
    '''Shared machinery of the ARMA-type scalar models. Subclasses provide
    ar, ma and innovation.'''

    def _validate(self):
        if _max_root_modulus([1.0] + [-c for c in self.ar]) >= 1.0:
            raise ModelError('AR polynomial %r is not stable (a root lies on or inside the unit circle)' % (list(self.ar),))
        if _max_root_modulus([1.0] + list(self.ma)) >= 1.0:
            raise ModelError('MA polynomial %r is not invertible' % (list(self.ma),))

    @property
    def innovation_variance(self):
        return self.innovation.variance()

    def effective_memory(self):
        rho = max(_max_root_modulus([1.0] + [-c for c in self.ar]),
                  _max_root_modulus([1.0] + list(self.ma)))
        memory = max(len(self.ar), len(self.ma))
        if rho > 0.0:
            memory = max(memory, int(math.ceil(math.log(1e-6) / math.log(rho))))
        return memory

    def autocovariance(self, max_lag):
        return arma_autocovariance(self.ar, self.ma, self.innovation_variance, max_lag)

    def power_spectrum(self):
        return SpectralDensity.rational(self.ar, self.ma, self.innovation_variance)

    def prediction_error_variances(self, order):
        cached = _prediction_cache[self]
        if cached is None or len(cached) < order + 1:
            _, cached = levinson_durbin(self.autocovariance(order), order)
            _prediction_cache[self] = cached
        return cached[:order + 1]

    def predictor_table(self, horizon=DEFAULT_HORIZON, tolerance=1e-12):
        '''Levinson-Durbin predictor coefficients for orders 0..L, where L is
        the first order whose error variance is within tolerance (relative)
        of the innovation variance.'''
        if not self.ar and not self.ma:
            return [np.zeros(0)]
        if not self.ma:
            order = len(self.ar)
        else:
            errors = self.prediction_error_variances(horizon)
            target = self.innovation_variance * (1.0 + tolerance)
            reached = np.nonzero(errors <= target)[0]
            order = int(reached[0]) if len(reached) else horizon
            if not len(reached):
                log.warning('Predictor for %s did not converge within %d taps', self.descriptor, horizon)
        table, _ = levinson_durbin(self.autocovariance(order), order, keep_coefficients=True)
        return table


@dataclass(frozen=True)
class IID(ScalarLinearModel):
    innovation: GeneralizedGaussian
    kind = 'iid'

    def __post_init__(self):
        if not isinstance(self.innovation, GeneralizedGaussian):
            raise ModelError('IID innovation must be a GeneralizedGaussian')

    ar = ()
    ma = ()

    @property
    def is_gaussian(self):
        return self.innovation.is_gaussian

    @property
    def descriptor(self):
        return 'iid(%s)' % self.innovation.descriptor

    def sample_path(self, length, seed):
        return self.innovation.sample(length, seed)

    def conditional_entropy_bits(self, k, horizon=DEFAULT_HORIZON):
        if k < 0:
            raise ModelError('k must be >= 0')
        return self.innovation.entropy_bits()

    def entropy_rate_bits(self):
        return self.innovation.entropy_bits()


@dataclass(frozen=True)
class GaussARMA(ScalarLinearModel):
    ar: tuple = ()
    ma: tuple = ()
    innovation_variance: float = 1.0
    kind = 'gauss_arma'

    def __post_init__(self):
        object.__setattr__(self, 'ar', _coefficients(self.ar, 'ar'))
        object.__setattr__(self, 'ma', _coefficients(self.ma, 'ma'))
        if not (self.innovation_variance > 0.0) or math.isinf(self.innovation_variance):
            raise ModelError('innovation_variance must be positive (got %r)' % self.innovation_variance)
        object.__setattr__(self, 'innovation_variance', float(self.innovation_variance))
        self._validate()

    @property
    def innovation(self):
        return GeneralizedGaussian.gaussian(self.innovation_variance)

    @property
    def is_gaussian(self):
        return True

    @property
    def descriptor(self):
        return 'gauss_arma(ar=%s,ma=%s,var=%g)' % (list(self.ar), list(self.ma), self.innovation_variance)

    def _stationary_past(self, rng):
        '''Joint draw of (d_{-1..-na}, w_{-1..-nc}) from the stationary law.'''
        na, nc = len(self.ar), len(self.ma)
        variance = self.innovation_variance
        gamma = self.autocovariance(max(na, 1))
        psi = psi_weights(self.ar, self.ma, nc + 1)
        size = na + nc
        cov = np.zeros((size, size))
        for i in range(na):
            for j in range(na):
                cov[i, j] = gamma[abs(i - j)]
        for j in range(nc):
            cov[na + j, na + j] = variance
        for i in range(na):
            for j in range(nc):
                # Cov(d_{-(i+1)}, w_{-(j+1)}) = sigma^2 psi_{j-i}
                if j >= i:
                    cov[i, na + j] = cov[na + j, i] = variance * psi[j - i]
        past = rng.multivariate_normal(np.zeros(size), cov, method='eigh')
        return past[:na], past[na:]

    def sample_path(self, length, seed):
        if length < 1:
            raise ModelError('length must be >= 1')
        rng = np.random.default_rng(seed)
        b = np.concatenate([[1.0], self.ma])
        a = np.concatenate([[1.0], -np.asarray(self.ar)])
        if not self.ar and not self.ma:
            return rng.normal(0.0, math.sqrt(self.innovation_variance), size=length)
        d_past, w_past = self._stationary_past(rng)
        w = rng.normal(0.0, math.sqrt(self.innovation_variance), size=length)
        zi = lfiltic(b, a, d_past, w_past)
        d, _ = lfilter(b, a, w, zi=zi)
        return d

    def conditional_entropy_bits(self, k, horizon=DEFAULT_HORIZON):
        if k < 0:
            raise ModelError('k must be >= 0')
        if k > horizon:
            raise CapacityError('k=%d is beyond the Levinson-Durbin horizon %d' % (k, horizon))
        error = self.prediction_error_variances(k)[k]
        return 0.5 * math.log2(TWO_PI_E * error)

    def entropy_rate_bits(self):
        return 0.5 * math.log2(TWO_PI_E * self.innovation_variance)


@dataclass(frozen=True)
class GenGaussAR(ScalarLinearModel):
    ar: tuple = ()
    innovation: GeneralizedGaussian = field(default_factory=lambda: GeneralizedGaussian.gaussian(1.0))
    kind = 'gen_gauss_ar'

    ma = ()

    def __post_init__(self):
        object.__setattr__(self, 'ar', _coefficients(self.ar, 'ar'))
        if not isinstance(self.innovation, GeneralizedGaussian):
            raise ModelError('GenGaussAR innovation must be a GeneralizedGaussian')
        self._validate()

    @property
    def is_gaussian(self):
        return self.innovation.is_gaussian

    @property
    def descriptor(self):
        return 'gen_gauss_ar(ar=%s,%s)' % (list(self.ar), self.innovation.descriptor)

    def burn_in(self):
        return max(10 * self.effective_memory(), MIN_BURN_IN)

    def sample_path(self, length, seed):
        if length < 1:
            raise ModelError('length must be >= 1')
        burn = self.burn_in()
        w = self.innovation.sample(burn + length, seed)
        d = lfilter([1.0], np.concatenate([[1.0], -np.asarray(self.ar)]), w)
        return d[burn:]

    def conditional_entropy_bits(self, k, horizon=DEFAULT_HORIZON):
        if k < 0:
            raise ModelError('k must be >= 0')
        if k < len(self.ar):
            raise AnalyticUnavailable('h(d_%d | past) of %s is not available analytically below the AR order' % (k, self.descriptor))
        return self.innovation.entropy_bits()

    def entropy_rate_bits(self):
        return self.innovation.entropy_bits()


@dataclass(frozen=True, eq=False)
class VectorGaussAR(DisturbanceModel):
    transition: np.ndarray
    innovation_covariance: np.ndarray
    kind = 'vector_gauss_ar'

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.transition, dtype=float))
        try:
            innovation = GaussianVector(self.innovation_covariance)
        except DistributionError as e:
            raise ModelError('innovation_covariance: %s' % e)
        if a.shape != innovation.covariance.shape:
            raise ModelError('transition shape %s does not match innovation covariance %s'
                             % (a.shape, innovation.covariance.shape))
        radius = float(np.max(np.abs(np.linalg.eigvals(a))))
        if radius >= 1.0:
            raise ModelError('transition spectral radius %g is not < 1' % radius)
        a.setflags(write=False)
        object.__setattr__(self, 'transition', a)
        object.__setattr__(self, 'innovation_covariance', innovation.covariance)

    @property
    def dimension(self):
        return self.transition.shape[0]

    @property
    def is_gaussian(self):
        return True

    @property
    def innovation(self):
        return GaussianVector(self.innovation_covariance)

    @property
    def descriptor(self):
        return 'vector_gauss_ar(A=%s,cov=%s)' % (self.transition.tolist(), self.innovation_covariance.tolist())

    def effective_memory(self):
        radius = float(np.max(np.abs(np.linalg.eigvals(self.transition))))
        if radius == 0.0:
            return 1
        return max(1, int(math.ceil(math.log(1e-6) / math.log(radius))))

    def stationary_covariance(self):
        cov = solve_discrete_lyapunov(self.transition, self.innovation_covariance)
        return 0.5 * (cov + cov.T)

    def sample_path(self, length, seed):
        if length < 1:
            raise ModelError('length must be >= 1')
        rng = np.random.default_rng(seed)
        start = GaussianVector(self.stationary_covariance()).sample(1, rng=rng)[0]
        w = self.innovation.sample(length, rng=rng)
        a = self.transition
        d = np.empty((length, self.dimension))
        d[0] = start
        if np.count_nonzero(a - np.diag(np.diagonal(a))) == 0:
            # Decoupled channels: one filter per channel from the drawn start.
            for i, coefficient in enumerate(np.diagonal(a)):
                zi = lfiltic([1.0], [1.0, -coefficient], [start[i]])
                d[1:, i], _ = lfilter([1.0], [1.0, -coefficient], w[1:, i], zi=zi)
            return d
        for k in range(1, length):
            d[k] = a @ d[k - 1] + w[k]
        return d

    def conditional_entropy_bits(self, k, horizon=DEFAULT_HORIZON):
        if k < 0:
            raise ModelError('k must be >= 0')
        if k == 0:
            return GaussianVector(self.stationary_covariance()).entropy_bits()
        return self.innovation.entropy_bits()

    def entropy_rate_bits(self):
        return self.innovation.entropy_bits()

    def autocovariance(self, max_lag):
        cov = self.stationary_covariance()
        lags = [cov]
        for _ in range(max_lag):
            lags.append(self.transition @ lags[-1])
        return lags

    def power_spectrum(self):
        return SpectralDensity.vector_ar(self.transition, self.innovation_covariance)


@dataclass(frozen=True)
class EntropySchedule:
    h_k: tuple
    entropy_rate: float


def sample_path(model, length, seed):
    return model.sample_path(length, seed)


def conditional_entropy_bits(model, k, horizon=DEFAULT_HORIZON):
    return model.conditional_entropy_bits(k, horizon=horizon)


def entropy_rate_bits(model):
    return model.entropy_rate_bits()


def autocovariance(model, max_lag):
    return model.autocovariance(max_lag)


def power_spectrum(model):
    return model.power_spectrum()


def entropy_schedule(model, horizon):
    return model.entropy_schedule(horizon)


def innovation_from_config(desc):
    '''{family: gaussian|laplace|uniform|generalized_gaussian, p, mu | variance}'''
    if not isinstance(desc, dict):
        raise ModelError('innovation must be a mapping (got %r)' % (desc,))
    family = str(desc.get('family', 'gaussian')).lower()
    unknown = set(desc) - {'family', 'p', 'mu', 'variance'}
    if unknown:
        raise ModelError('Invalid key %s in innovation' % sorted(unknown)[0])
    try:
        if family == 'gaussian':
            if 'mu' in desc:
                return GeneralizedGaussian(2.0, float(desc['mu']))
            return GeneralizedGaussian.gaussian(float(desc.get('variance', 1.0)))
        if family == 'laplace':
            return GeneralizedGaussian.laplace(float(desc.get('mu', 1.0)))
        if family == 'uniform':
            return GeneralizedGaussian.uniform(float(desc.get('mu', 1.0)))
        if family in ('generalized_gaussian', 'gg'):
            if 'p' not in desc:
                raise ModelError('innovation.p is required for the generalized_gaussian family')
            return GeneralizedGaussian(parse_exponent(desc['p']), float(desc.get('mu', 1.0)))
    except (TypeError, ValueError) as e:
        raise ModelError('innovation: %s' % e)
    except DistributionError as e:
        raise ModelError('innovation: %s' % e)
    raise ModelError('Unknown innovation family %r' % family)


_model_keys = {
    'iid': {'kind', 'innovation', 'name'},
    'gauss_arma': {'kind', 'ar', 'ma', 'variance', 'innovation', 'name'},
    'gen_gauss_ar': {'kind', 'ar', 'innovation', 'name'},
    'vector_gauss_ar': {'kind', 'transition', 'innovation_covariance', 'name'},
}


def model_from_config(desc):
    '''Build a DisturbanceModel from an experiment-config descriptor.'''
    if not isinstance(desc, dict):
        raise ModelError('model descriptor must be a mapping (got %r)' % (desc,))
    kind = desc.get('kind')
    if kind not in _model_keys:
        raise ModelError('Unknown model kind %r (expected one of %s)' % (kind, ', '.join(sorted(_model_keys))))
    unknown = set(desc) - _model_keys[kind]
    if unknown:
        raise ModelError('Invalid key %s in %s model' % (sorted(unknown)[0], kind))

    if kind == 'iid':
        return IID(innovation_from_config(desc.get('innovation', {})))
    if kind == 'gauss_arma':
        variance = desc.get('variance')
        if variance is None:
            innovation = desc.get('innovation', {})
            if not isinstance(innovation, dict):
                raise ModelError('innovation must be a mapping (got %r)' % (innovation,))
            if innovation.get('family', 'gaussian') != 'gaussian':
                raise ModelError('gauss_arma requires a gaussian innovation')
            variance = innovation_from_config(innovation).variance()
        try:
            variance = float(variance)
        except (TypeError, ValueError):
            raise ModelError('variance must be a number (got %r)' % (variance,))
        return GaussARMA(desc.get('ar', ()), desc.get('ma', ()), variance)
    if kind == 'gen_gauss_ar':
        return GenGaussAR(desc.get('ar', ()), innovation_from_config(desc.get('innovation', {})))
    try:
        transition = np.asarray(desc['transition'], dtype=float)
        covariance = np.asarray(desc.get('innovation_covariance', np.eye(len(transition))), dtype=float)
    except KeyError:
        raise ModelError('vector_gauss_ar requires a transition matrix')
    except (TypeError, ValueError) as e:
        raise ModelError('vector_gauss_ar: %s' % e)
    return VectorGaussAR(transition, covariance)


def model_to_config(model):
    if isinstance(model, IID):
        return {'kind': 'iid', 'innovation': innovation_to_config(model.innovation)}
    if isinstance(model, GaussARMA):
        return {'kind': 'gauss_arma', 'ar': list(model.ar), 'ma': list(model.ma),
                'variance': model.innovation_variance}
    if isinstance(model, GenGaussAR):
        return {'kind': 'gen_gauss_ar', 'ar': list(model.ar),
                'innovation': innovation_to_config(model.innovation)}
    if isinstance(model, VectorGaussAR):
        return {'kind': 'vector_gauss_ar', 'transition': model.transition.tolist(),
                'innovation_covariance': model.innovation_covariance.tolist()}
    raise ModelError('Cannot serialise %r' % (model,))


def innovation_to_config(innovation):
    if innovation.is_uniform:
        return {'family': 'uniform', 'mu': innovation.mu_scale}
    return {'family': 'generalized_gaussian', 'p': innovation.p_exponent, 'mu': innovation.mu_scale}
