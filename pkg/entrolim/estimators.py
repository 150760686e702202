'''Estimates from sample paths: L_p norms, differential and conditional
entropies, mutual information, whiteness, GG density fit and covariance
determinants. Entropies and informations are in bits.

Warnings raised by an estimator are logged and also attached to the
returned estimate, so downstream reports carry them.
'''
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import digamma
from scipy.stats import differential_entropy, kstest
from sklearn.neighbors import KDTree
from statsmodels.stats.diagnostic import acorr_ljungbox
from statsmodels.tsa.stattools import acf

from entrolim.distributions import GeneralizedGaussian, LN2, is_infinite, parse_exponent
from entrolim.lib import EntrolimError

log = logging.getLogger(__name__)

MIN_ENTROPY_SAMPLES = 50
MIN_SPACING_SAMPLES = 100
JACKKNIFE_FOLDS = 20
DEFAULT_BATCHES = 20
KNN_NEIGHBORS = 4
MAX_KNN_DIMENSION = 4
DUPLICATE_JITTER = 1e-12
TIE_FRACTION = 0.1
DEGENERATE_EIGEN_RATIO = 1e-10
MI_SATURATION_BITS = 5.0
WHITENESS_P_VALUE = 0.001
WHITENESS_MI_BITS = 0.02
KS_COEFFICIENT = 1.63
ESSSUP_TAIL = 25
SINGULAR_RATIO = 1e-12


class EstimatorError(EntrolimError):
    pass


def _warn(warnings, code, msg, *args):
    log.warning(msg, *args)
    warnings.append(code)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    std_error: float
    warnings: tuple = ()

    def __iter__(self):
        return iter((self.value, self.std_error))


@dataclass(frozen=True)
class EntropyEstimate:
    value_bits: float
    std_error_bits: float
    estimator_id: str
    sample_count: int
    warnings: tuple = ()

    def __iter__(self):
        return iter((self.value_bits, self.std_error_bits))


@dataclass(frozen=True)
class MutualInformationEstimate:
    value_bits: float
    std_error_bits: float
    sample_count: int
    saturated: bool = False

    def __iter__(self):
        return iter((self.value_bits, self.std_error_bits))


@dataclass(frozen=True)
class WhitenessReport:
    autocorrelations: tuple
    portmanteau: float
    portmanteau_p_value: float
    mi_lag1_bits: float
    mi_lag1_std_error: float

    @property
    def passed(self):
        return self.portmanteau_p_value >= WHITENESS_P_VALUE and self.mi_lag1_bits < WHITENESS_MI_BITS


@dataclass(frozen=True)
class DensityFit:
    p_exponent: float
    mu_scale: float
    statistic: float
    threshold: float
    p_value: float

    @property
    def passed(self):
        return self.statistic < self.threshold


@dataclass(frozen=True)
class CovarianceEstimate:
    det: float
    std_error: float
    channel_moments: tuple
    moment_product: float
    product_std_error: float
    singular: bool = False

    def __iter__(self):
        return iter((self.det, self.std_error))


def _as_array(samples, what='samples'):
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EstimatorError('%s is empty' % what)
    if not np.all(np.isfinite(x)):
        raise EstimatorError('%s contains non-finite values' % what)
    return x


def _as_points(samples):
    x = _as_array(samples)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] > MAX_KNN_DIMENSION:
        raise EstimatorError('kNN estimation supports at most %d dimensions (got %d)'
                             % (MAX_KNN_DIMENSION, x.shape[1]))
    return x


def _folds(n, seed, folds=JACKKNIFE_FOLDS):
    return np.array_split(np.random.default_rng(seed).permutation(n), folds)


def _jackknife_std_error(values):
    values = np.asarray(values, dtype=float)
    g = len(values)
    return math.sqrt((g - 1) / g * float(np.sum((values - values.mean()) ** 2)))


def lp_norm_estimate(samples, p, batches=None):
    '''[mean |x|^p]^(1/p) with a delta-method standard error; the sample max
    of |x| for p = infinity.

    batches splits the samples into contiguous batch means for the standard
    error, which is what serially dependent within-trace samples need.
    '''
    x = np.abs(_as_array(samples)).ravel()
    p = parse_exponent(p)
    n = len(x)
    if is_infinite(p):
        ordered = np.sort(x)
        q = min(ESSSUP_TAIL, n - 1)
        std_error = float(ordered[-1] - ordered[-1 - q]) / math.sqrt(q) if q > 0 else 0.0
        warnings = []
        _warn(warnings, 'esssup_biased_low',
              'esssup estimated by the sample maximum of %d values; biased low for unbounded support', n)
        return NormEstimate(float(ordered[-1]), std_error, tuple(warnings))

    powered = x * x if p == 2.0 else x ** p
    moment = float(np.mean(powered))
    value = math.sqrt(moment) if p == 2.0 else moment ** (1.0 / p)
    if batches and n >= 2 * batches:
        means = np.array([chunk.mean() for chunk in np.array_split(powered, batches)])
        moment_se = float(np.std(means, ddof=1)) / math.sqrt(batches)
    elif n > 1:
        moment_se = float(np.std(powered, ddof=1)) / math.sqrt(n)
    else:
        moment_se = 0.0
    std_error = value / (p * moment) * moment_se if moment > 0 else 0.0
    return NormEstimate(value, std_error)


def _vasicek_nats(x):
    '''scipy's Vasicek estimate, with its log(n / 2m) scale swapped for the
    digamma terms that make it unbiased on uniform spacings, window by
    window (boundary windows are clipped and hold fewer spacings).'''
    n = len(x)
    if np.ptp(x) == 0.0:
        raise EstimatorError('All samples are identical; entropy is -infinity')
    m = max(1, int(round(math.sqrt(n))))
    index = np.arange(n)
    widths = np.minimum(index + m, n - 1) - np.maximum(index - m, 0)
    plain = float(differential_entropy(x, window_length=m, method='vasicek'))
    return plain - math.log(n / (2.0 * m)) + float(digamma(n + 1) - np.mean(digamma(widths)))


def entropy_estimate_1d(samples, seed=0):
    '''Vasicek spacing estimator, window round(sqrt(n)), bias-corrected.
    Standard error by a 20-fold jackknife.'''
    x = _as_array(samples).ravel()
    n = len(x)
    if n < MIN_SPACING_SAMPLES:
        raise EstimatorError('entropy estimation needs at least %d samples (got %d)' % (MIN_SPACING_SAMPLES, n))
    warnings = []
    ties = n - len(np.unique(x))
    if ties > TIE_FRACTION * n:
        _warn(warnings, 'ties', '%d of %d samples are tied; the density assumption is violated', ties, n)
    if ties:
        # Zero spacings have no logarithm.
        x = x + DUPLICATE_JITTER * np.ptp(x) * np.random.default_rng(seed).standard_normal(n)
    value = _vasicek_nats(x)
    partial = [_vasicek_nats(np.delete(x, fold)) for fold in _folds(n, seed)]
    std_error = max(_jackknife_std_error(partial), 1e-12)
    return EntropyEstimate(value / LN2, std_error / LN2, 'vasicek', n, tuple(warnings))


def _knn_radii(points, k, seed, warnings):
    tree = KDTree(points, metric='chebyshev')
    distance, _ = tree.query(points, k=k + 1)
    radii = distance[:, k]
    if np.any(radii == 0):
        _warn(warnings, 'duplicates_jittered', 'Duplicate points found; adding %g jitter', DUPLICATE_JITTER)
        points = points + DUPLICATE_JITTER * np.random.default_rng(seed).standard_normal(points.shape)
        tree = KDTree(points, metric='chebyshev')
        distance, _ = tree.query(points, k=k + 1)
        radii = distance[:, k]
    return points, radii


def _check_degenerate(points, warnings):
    if points.shape[1] < 2:
        return
    eigenvalues = np.linalg.eigvalsh(np.cov(points, rowvar=False))
    if eigenvalues[0] <= DEGENERATE_EIGEN_RATIO * eigenvalues[-1]:
        _warn(warnings, 'degenerate_support',
              'Samples lie on a lower-dimensional set (eigenvalue ratio %g); the entropy is not finite',
              eigenvalues[0] / eigenvalues[-1])


def entropy_estimate_knn(samples, k_neighbors=KNN_NEIGHBORS, seed=0):
    '''Kozachenko-Leonenko estimator with the max-norm:
    H = psi(n) - psi(k) + m ln 2 + (m/n) sum ln eps_i  (nats).'''
    points = _as_points(samples)
    n, m = points.shape
    if n < MIN_ENTROPY_SAMPLES:
        raise EstimatorError('entropy estimation needs at least %d samples (got %d)' % (MIN_ENTROPY_SAMPLES, n))
    warnings = []
    _check_degenerate(points, warnings)
    points, radii = _knn_radii(points, k_neighbors, seed, warnings)
    terms = m * np.log(radii)
    value = digamma(n) - digamma(k_neighbors) + m * LN2 + float(np.mean(terms))
    std_error = max(float(np.std(terms, ddof=1)) / math.sqrt(n), 1e-12)
    return EntropyEstimate(value / LN2, std_error / LN2, 'knn_kl', n, tuple(warnings))


def delay_embedding(path, width):
    '''Rows (d_{k-width+1}, ..., d_k) for every k with a full window.'''
    return sliding_window_view(_as_array(path).ravel(), width)


def conditional_entropy_estimate(path, memory, k_neighbors=KNN_NEIGHBORS, seed=0):
    '''h(d_k | d_{k-memory..k-1}) = h(memory+1 dims) - h(memory dims), both kNN.'''
    if memory < 0 or memory + 1 > MAX_KNN_DIMENSION:
        raise EstimatorError('memory must be between 0 and %d (got %d)' % (MAX_KNN_DIMENSION - 1, memory))
    rows = delay_embedding(path, memory + 1)
    joint = entropy_estimate_knn(rows, k_neighbors, seed)
    if memory == 0:
        return joint
    past = entropy_estimate_knn(rows[:, :memory], k_neighbors, seed)
    return EntropyEstimate(joint.value_bits - past.value_bits,
                           math.hypot(joint.std_error_bits, past.std_error_bits),
                           'knn_kl', joint.sample_count, joint.warnings + past.warnings)


def _marginal_counts(points, radii):
    tree = KDTree(points, metric='chebyshev')
    # Strictly inside the joint radius; the count includes the point itself.
    return tree.query_radius(points, r=np.nextafter(radii, 0), count_only=True)


def mutual_information_estimate(x, y, k_neighbors=KNN_NEIGHBORS, seed=0):
    '''Kraskov-Stoegbauer-Grassberger estimate of I(x; y), clipped at 0.
    Values above 5 bits are marked saturated: the estimator can only say
    the information is at least that large.'''
    x, y = _as_points(x), _as_points(y)
    if len(x) != len(y):
        raise EstimatorError('x and y differ in length (%d vs %d)' % (len(x), len(y)))
    if x.shape[1] + y.shape[1] > MAX_KNN_DIMENSION:
        raise EstimatorError('combined dimension %d exceeds %d' % (x.shape[1] + y.shape[1], MAX_KNN_DIMENSION))
    n = len(x)
    if n < MIN_ENTROPY_SAMPLES:
        raise EstimatorError('mutual information needs at least %d samples (got %d)' % (MIN_ENTROPY_SAMPLES, n))
    warnings = []
    joint, radii = _knn_radii(np.hstack([x, y]), k_neighbors, seed, warnings)
    x, y = joint[:, :x.shape[1]], joint[:, x.shape[1]:]
    terms = digamma(_marginal_counts(x, radii)) + digamma(_marginal_counts(y, radii))
    value = (digamma(k_neighbors) + digamma(n) - float(np.mean(terms))) / LN2
    std_error = max(float(np.std(terms, ddof=1)) / math.sqrt(n) / LN2, 1e-12)
    saturated = value > MI_SATURATION_BITS
    if saturated:
        log.info('Mutual information estimate %.2f bits is saturated; reporting it as a lower bound', value)
    return MutualInformationEstimate(max(value, 0.0), std_error, n, saturated)


def subsample(x, count, seed):
    '''Evenly strided subsample (order kept) of at most count entries.'''
    if count is None or len(x) <= count:
        return x
    stride = len(x) // count
    offset = int(np.random.default_rng(seed).integers(0, stride))
    return x[offset::stride][:count]


def lagged_pairs(a, b, lag=1):
    '''(a_k, b_{k-lag}) pairs.'''
    return a[lag:], b[:-lag]


def whiteness_stats(e, max_lag, mi_samples=None, seed=0):
    e = _as_array(e, 'e').ravel()
    if len(e) < 100 * max_lag:
        raise EstimatorError('whiteness needs at least %d samples for %d lags (got %d)'
                             % (100 * max_lag, max_lag, len(e)))
    correlations = acf(e, nlags=max_lag, fft=True)[1:]
    ljung_box = acorr_ljungbox(e, lags=[max_lag])
    statistic = float(np.asarray(ljung_box['lb_stat'])[-1])
    p_value = float(np.asarray(ljung_box['lb_pvalue'])[-1])
    current, previous = lagged_pairs(e, e)
    index = subsample(np.arange(len(current)), mi_samples, seed)
    mi = mutual_information_estimate(current[index], previous[index], seed=seed)
    return WhitenessReport(tuple(float(c) for c in correlations), statistic, p_value,
                           mi.value_bits, mi.std_error_bits)


def density_fit_gg(samples, p):
    '''Kolmogorov-Smirnov distance to GG(p) with mu matched to the sample L_p
    norm (to the sample max for p = infinity). Passes below 1.63/sqrt(n).'''
    x = _as_array(samples).ravel()
    p = parse_exponent(p)
    mu = lp_norm_estimate(x, p).value if not is_infinite(p) else float(np.max(np.abs(x)))
    if mu <= 0.0:
        raise EstimatorError('samples are identically zero')
    reference = GeneralizedGaussian(p, mu)
    result = kstest(x, reference.cdf)
    return DensityFit(p, mu, float(result.statistic), KS_COEFFICIENT / math.sqrt(len(x)), float(result.pvalue))


def _second_moment(x):
    return x.T @ x / len(x)


def covariance_det_estimate(samples, seed=0):
    '''det E[x x^T] from the sample second-moment matrix, with a jackknife
    standard error. The per-channel moments and their product (the Hadamard
    side of the product bound) come along.'''
    x = _as_array(samples)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    if n < 100 * m:
        raise EstimatorError('covariance estimation needs at least %d samples (got %d)' % (100 * m, n))

    def statistics(sub):
        moment = _second_moment(sub)
        return float(np.linalg.det(moment)), float(np.prod(np.diag(moment)))

    moment = _second_moment(x)
    det, product = statistics(x)
    partial = np.array([statistics(np.delete(x, fold, axis=0)) for fold in _folds(n, seed)])
    singular = det <= SINGULAR_RATIO * product
    if singular:
        log.warning('Sample second-moment matrix is singular (det %g vs diagonal product %g)', det, product)
        det = max(det, 0.0)
    return CovarianceEstimate(det, _jackknife_std_error(partial[:, 0]),
                              tuple(float(v) for v in np.diag(moment)),
                              product, _jackknife_std_error(partial[:, 1]), singular)
