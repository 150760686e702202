'''Power spectra and the spectral-integral forms of the entropy rate.

The integrals here work on the Szego-Kolmogorov side of the bounds: the
mean log spectrum gives the entropy rate of the Gaussian process with the
same second-order statistics, and the negentropy rate is whatever is left
over once the true entropy rate is subtracted. The Gaussianity-whiteness
index is defined by the relation

    2^(2 h_inf) = GW * (2 pi e)^m * det R(0)

which is the only value that makes the GW form of the asymptotic bound
agree with the entropy-rate form. No further structure is implied.
'''
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from entrolim.distributions import LN2, TWO_PI_E
from entrolim.lib import EntrolimError

log = logging.getLogger(__name__)

QUADRATURE_ORDER = 20
QUADRATURE_TOLERANCE = 1e-9
QUADRATURE_MAX_NODES = 2 ** 20
NEGENTROPY_SLACK = 1e-6
# Smallest S(omega) relative to its peak that still counts as non-zero.
SPECTRAL_FLOOR = 1e-15

_legendre_nodes, _legendre_weights = leggauss(QUADRATURE_ORDER)


class SpectralError(EntrolimError):
    pass


class QuadratureError(SpectralError):
    pass


def _unit_circle_polynomial(coeffs, omega, sign):
    '''1 + sign * sum_j c_j e^{-i omega j} evaluated at every omega.'''
    omega = np.atleast_1d(omega)
    value = np.ones(omega.shape, dtype=complex)
    for j, c in enumerate(coeffs, start=1):
        value += sign * c * np.exp(-1j * omega * j)
    return value


class SpectralDensity(object):
    '''S(omega) on [-pi, pi]. Scalar spectra evaluate to reals, m-channel
    spectra to m x m Hermitian matrices. descriptor carries the rational
    coefficients when the spectrum came from a model.'''

    def __init__(self, evaluator, descriptor=None, dimension=1, log_det=None):
        self.evaluator = evaluator
        self.descriptor = descriptor or {}
        self.dimension = dimension
        self._log_det = log_det

    @classmethod
    def rational(cls, ar, ma, variance):
        ar, ma = tuple(ar), tuple(ma)

        def evaluate(omega):
            numerator = np.abs(_unit_circle_polynomial(ma, omega, 1.0)) ** 2
            denominator = np.abs(_unit_circle_polynomial(ar, omega, -1.0)) ** 2
            return variance * numerator / denominator

        return cls(evaluate, {'ar': list(ar), 'ma': list(ma), 'variance': variance})

    @classmethod
    def flat(cls, variance):
        return cls.rational((), (), variance)

    @classmethod
    def vector_ar(cls, transition, innovation_covariance):
        '''S(omega) = H Sigma_w H^*, H = (I - A e^{-i omega})^{-1}.'''
        a = np.asarray(transition, dtype=float)
        sigma = np.asarray(innovation_covariance, dtype=float)
        m = a.shape[0]
        _, sigma_logdet = np.linalg.slogdet(sigma)

        def transfer(omega):
            omega = np.atleast_1d(omega)
            return np.eye(m) - a[None, :, :] * np.exp(-1j * omega)[:, None, None]

        def evaluate(omega):
            h = np.linalg.inv(transfer(omega))
            return h @ sigma @ np.conj(np.transpose(h, (0, 2, 1)))

        def log_det(omega):
            # det S = det Sigma_w / |det(I - A e^{-i omega})|^2
            return sigma_logdet - 2.0 * np.log(np.abs(np.linalg.det(transfer(omega))))

        return cls(evaluate, {'transition': a.tolist(), 'innovation_covariance': sigma.tolist()},
                   dimension=m, log_det=log_det)

    def __call__(self, omega):
        value = self.evaluator(omega)
        if np.ndim(omega) == 0 and self.dimension == 1:
            return float(np.atleast_1d(value)[0])
        if np.ndim(omega) == 0:
            return value[0]
        return value

    def log_det(self, omega):
        '''Natural log of S(omega) (of det S(omega) for m channels).'''
        if self._log_det is not None:
            return self._log_det(omega)
        values = np.atleast_1d(self.evaluator(omega))
        if self.dimension == 1:
            with np.errstate(divide='ignore'):
                return np.log(values)
        sign, logdet = np.linalg.slogdet(values)
        return np.where(sign > 0, logdet, -np.inf)

    def validate(self, points=4097):
        '''Even symmetry and strict positivity on a grid over [0, pi].'''
        omega = np.linspace(0.0, math.pi, points)
        forward = self.log_det(omega)
        finite = np.where(np.isfinite(forward), forward, -np.inf)
        if not np.all(np.isfinite(forward)) or np.min(finite) < np.max(finite) + math.log(SPECTRAL_FLOOR):
            where = omega[np.argmin(finite)]
            raise SpectralError('Spectrum has a zero near omega=%.6f; regularize before integrating' % where)
        backward = self.log_det(-omega)
        if np.max(np.abs(forward - backward)) > 1e-9 * max(1.0, float(np.max(np.abs(forward)))):
            raise SpectralError('Spectrum is not even in omega')


def adaptive_gauss_legendre(f, a, b, tol=QUADRATURE_TOLERANCE, max_nodes=QUADRATURE_MAX_NODES):
    '''Integrate a vectorised f over [a, b] by bisecting Gauss-Legendre panels
    until each panel's refinement changes its value by less than its share
    of tol.'''
    width = b - a
    if width == 0.0:
        return 0.0

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        return half * float(np.dot(_legendre_weights, f(0.5 * (lo + hi) + half * _legendre_nodes)))

    used = QUADRATURE_ORDER
    pending = [(a, b, panel(a, b))]
    pieces = []
    while pending:
        lo, hi, coarse = pending.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        used += 2 * QUADRATURE_ORDER
        if abs(left + right - coarse) <= tol * (hi - lo) / width:
            pieces.append(left + right)
            continue
        if used > max_nodes:
            raise QuadratureError('Quadrature did not reach tolerance %g within %d nodes' % (tol, max_nodes))
        pending.append((lo, mid, left))
        pending.append((mid, hi, right))
    log.debug('Quadrature on [%g, %g] used %d nodes', a, b, used)
    return math.fsum(pieces)


def spectral_mean(s):
    '''(1/2pi) integral of S over [-pi, pi]; equals R(0) for scalar spectra.'''
    if s.dimension != 1:
        raise SpectralError('spectral_mean is defined for scalar spectra')
    return adaptive_gauss_legendre(lambda w: s.evaluator(w), 0.0, math.pi) / math.pi


def szego_entropy_integral_bits(s):
    '''(1/2pi) integral of log2 sqrt((2 pi e)^m S(omega)) over [-pi, pi], in
    bits, using the even symmetry to integrate [0, pi] only.'''
    s.validate()
    m = s.dimension
    offset = m * math.log(TWO_PI_E)
    integral = adaptive_gauss_legendre(lambda w: 0.5 * (offset + s.log_det(w)), 0.0, math.pi)
    return integral / math.pi / LN2


def negentropy_rate_bits(model):
    '''J_inf = Szego integral of the model spectrum minus the entropy rate.
    Zero for Gaussian models; a value below -1e-6 means the spectrum and the
    entropy rate disagree.'''
    gap = szego_entropy_integral_bits(model.power_spectrum()) - model.entropy_rate_bits()
    if gap < -NEGENTROPY_SLACK:
        raise SpectralError('Negative negentropy rate %g for %s: spectrum and entropy rate are inconsistent'
                            % (gap, model.descriptor))
    return max(gap, 0.0)


def gaussianity_whiteness(model):
    '''GW = 2^(2 h_inf) / ((2 pi e)^m det R(0)), in [0, 1]; 1 iff white Gaussian.'''
    m = model.dimension
    covariance = model.stationary_covariance()
    _, logdet = np.linalg.slogdet(np.atleast_2d(covariance))
    log_gw = 2.0 * model.entropy_rate_bits() * LN2 - m * math.log(TWO_PI_E) - logdet
    return math.exp(log_gw)
