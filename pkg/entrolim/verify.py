'''Verification harness: analytic bound vs Monte Carlo loop error, with the
equality diagnostics (whiteness, GG density fit, lag-1 informations).

Asymptotic mode averages within each trace after a burn-in of
max(10 * model memory, 1000) steps; per-step mode takes e_k at a fixed k
across independent trials. A violation is an empirical norm more than
three standard errors below the bound.
'''
import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from entrolim import bounds
from entrolim.distributions import format_exponent
from entrolim.estimators import (lp_norm_estimate, covariance_det_estimate, whiteness_stats,
                                 density_fit_gg, mutual_information_estimate, entropy_estimate_1d,
                                 entropy_estimate_knn, lagged_pairs, subsample, DEFAULT_BATCHES,
                                 MAX_KNN_DIMENSION, EstimatorError)
from entrolim.lib import EntrolimError, derive_seed
from entrolim.config import build_controller, ConfigError
from entrolim.processes import AnalyticUnavailable, DEFAULT_HORIZON, model_from_config
from entrolim.simulator import run_loop, causality_audit, DimensionError, CausalityError
from entrolim.worker import CellManager

log = logging.getLogger(__name__)

VIOLATION_SIGMAS = 3.0
MIN_BURN_IN = 1000
DEFAULT_MAX_LAG = 10
DEFAULT_MI_SAMPLES = 20000
AUDIT_LENGTH = 64
AUDIT_TRIALS = 32

REPORT_COLUMNS = ['cell_id', 'model', 'controller', 'p', 'k_or_asymptotic', 'h_bits', 'bound',
                  'empirical', 'std_error', 'gap_ratio', 'violation', 'whiteness_pass',
                  'ggfit_pass', 'mi_lag1_bits', 'seed', 'runtime_ms']

# Seed-key tags, so the different uses of one cell seed never collide.
_TRIAL = 0
_BOUND_ESTIMATE = 1
_TIGHTNESS = 2


class VerificationError(EntrolimError):
    pass


@dataclass(frozen=True)
class TightnessReport:
    whiteness: object
    density_fit: object
    mi_e_lag1_bits: float
    mi_e_lag1_std_error: float
    mi_d_lag1_bits: float
    mi_d_lag1_std_error: float

    @property
    def mi_pair_agrees(self):
        '''I(e_k; d_{k-1}) and I(e_k; e_{k-1}) agree within combined 3 sigma.'''
        spread = math.hypot(self.mi_e_lag1_std_error, self.mi_d_lag1_std_error)
        return abs(self.mi_d_lag1_bits - self.mi_e_lag1_bits) <= VIOLATION_SIGMAS * spread

    @property
    def passed(self):
        return self.whiteness.passed and self.density_fit.passed


@dataclass
class VerificationReport:
    bound: bounds.BoundReport
    empirical: float
    std_error: float
    model_descriptor: str
    controller_descriptor: str
    seeds: tuple
    tightness: Optional[TightnessReport] = None
    runtime_ms: int = 0
    cell_id: Optional[int] = None
    product_bound: Optional[bounds.BoundReport] = None
    product_empirical: Optional[float] = None
    product_std_error: Optional[float] = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def gap_ratio(self):
        return self.empirical / self.bound.bound_value

    @property
    def product_gap_ratio(self):
        if self.product_bound is None:
            return None
        return self.product_empirical / self.product_bound.bound_value

    @property
    def violation(self):
        below = self.empirical < self.bound.bound_value - VIOLATION_SIGMAS * self.std_error
        if self.product_bound is not None:
            below = below or (self.product_empirical
                              < self.product_bound.bound_value - VIOLATION_SIGMAS * self.product_std_error)
        return below

    def to_row(self, record_timing=False):
        tightness = self.tightness
        return {
            'cell_id': '' if self.cell_id is None else self.cell_id,
            'model': self.model_descriptor,
            'controller': self.controller_descriptor,
            'p': format_exponent(self.bound.p_exponent),
            'k_or_asymptotic': self.bound.k_or_asymptotic,
            'h_bits': repr(self.bound.conditional_entropy_bits),
            'bound': repr(self.bound.bound_value),
            'empirical': repr(self.empirical),
            'std_error': repr(self.std_error),
            'gap_ratio': repr(self.gap_ratio),
            'violation': str(self.violation).lower(),
            'whiteness_pass': '' if tightness is None else str(tightness.whiteness.passed).lower(),
            'ggfit_pass': '' if tightness is None else str(tightness.density_fit.passed).lower(),
            'mi_lag1_bits': '' if tightness is None else repr(tightness.mi_e_lag1_bits),
            'seed': self.seeds[0] if self.seeds else '',
            'runtime_ms': self.runtime_ms if record_timing else 0,
        }


def default_burn_in(model):
    return max(10 * model.effective_memory(), MIN_BURN_IN)


def _trial_seeds(seed, trials):
    return tuple(derive_seed(seed, _TRIAL, t) for t in range(trials))


def _estimated_bound(model, p, k, trials, seed):
    '''h(d_k | d_0..d_{k-1}) estimated across independent paths, for models
    where it has no closed form at k.'''
    if k + 1 > MAX_KNN_DIMENSION:
        raise EstimatorError('cannot estimate h(d_%d | past) with more than %d dimensions' % (k, MAX_KNN_DIMENSION))
    paths = np.array([model.sample_path(k + 1, derive_seed(seed, _BOUND_ESTIMATE, t))
                      for t in range(trials)])
    if k == 0:
        h = entropy_estimate_1d(paths[:, 0], seed=seed).value_bits
    else:
        h = (entropy_estimate_knn(paths, seed=seed).value_bits
             - entropy_estimate_knn(paths[:, :k], seed=seed).value_bits)
    log.info('Using estimated h(d_%d | past) = %.4f bits for %s', k, h, model.descriptor)
    return bounds.scalar_report('direct', p, k, h)


def tightness_report(trace, p, max_lag=DEFAULT_MAX_LAG, mi_samples=DEFAULT_MI_SAMPLES, seed=0, burn_in=0):
    '''Equality diagnostics on one trace: whiteness of e, GG(p) fit of e, and
    the lag-1 pair I(e_k; e_{k-1}), I(e_k; d_{k-1}).'''
    if trace.dimension != 1:
        raise DimensionError('tightness diagnostics are defined for scalar traces')
    e = trace.e[burn_in:]
    d = trace.d[burn_in:]
    whiteness = whiteness_stats(e, max_lag, mi_samples=mi_samples, seed=seed)
    fit = density_fit_gg(e, p)
    current, previous = lagged_pairs(e, d)
    index = subsample(np.arange(len(current)), mi_samples, seed)
    mi_d = mutual_information_estimate(current[index], previous[index], seed=seed)
    return TightnessReport(whiteness, fit, whiteness.mi_lag1_bits, whiteness.mi_lag1_std_error,
                           mi_d.value_bits, mi_d.std_error_bits)


def verify_bound(model, controller, p, horizon, trials, seed, step=None, burn_in=None, tightness=True,
                 max_lag=DEFAULT_MAX_LAG, mi_samples=DEFAULT_MI_SAMPLES, levinson_horizon=DEFAULT_HORIZON):
    started = time.perf_counter()
    if model.dimension != 1:
        raise DimensionError('verify_bound takes scalar models; use verify_mimo_bound for %s' % model.descriptor)
    if model.dimension != controller.dimension:
        raise DimensionError('%s has %d channels, %s has %d'
                             % (model.descriptor, model.dimension, controller.descriptor, controller.dimension))
    if trials < 1:
        raise VerificationError('trials must be >= 1')
    bound_spec = bounds.BoundSpec(p, step)
    p = bound_spec.p_exponent
    seeds = _trial_seeds(seed, trials)
    warnings = []

    if bound_spec.is_asymptotic:
        report = bounds.lp_bound_for(model, bound_spec)
        burn = default_burn_in(model) if burn_in is None else burn_in
        if horizon <= burn:
            raise VerificationError('horizon %d does not exceed the burn-in window %d' % (horizon, burn))
        traces = [run_loop(model, controller, horizon, s) for s in seeds]
        samples = np.concatenate([t.e[burn:] for t in traces])
        estimate = lp_norm_estimate(samples, p, batches=DEFAULT_BATCHES)
        diagnostics = None
        if tightness:
            if horizon - burn >= 100 * max_lag:
                diagnostics = tightness_report(traces[0], p, max_lag, mi_samples,
                                               derive_seed(seed, _TIGHTNESS), burn)
                if not diagnostics.whiteness.passed:
                    warnings.append('not_white')
            else:
                warnings.append('trace_too_short_for_tightness')
    else:
        try:
            report = bounds.lp_bound_for(model, bound_spec, horizon=levinson_horizon)
        except AnalyticUnavailable:
            report = _estimated_bound(model, p, step, max(trials, 1000), seed)
            warnings.append('estimated_bound')
        if horizon <= step:
            raise VerificationError('horizon %d does not reach step %d' % (horizon, step))
        samples = np.array([run_loop(model, controller, step + 1, s).e[step] for s in seeds])
        estimate = lp_norm_estimate(samples, p)
        diagnostics = None

    warnings.extend(estimate.warnings)
    result = VerificationReport(report, estimate.value, estimate.std_error, model.descriptor,
                                controller.descriptor, seeds, diagnostics,
                                int(round(1000 * (time.perf_counter() - started))), warnings=tuple(warnings))
    if result.violation:
        log.error('Bound violated: %s under %s at p=%s: empirical %.6g < bound %.6g (se %.3g)',
                  model.descriptor, controller.descriptor, format_exponent(p),
                  result.empirical, report.bound_value, result.std_error)
    return result


def verify_mimo_bound(model, controller, horizon, trials, seed, step=None, burn_in=None,
                      levinson_horizon=DEFAULT_HORIZON):
    '''det E[e e^T] against the determinant bound and prod_i E[e(i)^2]
    against the product bound.'''
    started = time.perf_counter()
    if model.dimension != controller.dimension:
        raise DimensionError('%s has %d channels, %s has %d'
                             % (model.descriptor, model.dimension, controller.descriptor, controller.dimension))
    seeds = _trial_seeds(seed, trials)
    if step is None:
        det_report = bounds.mimo_bound_asymptotic(model, 'mimo_det')
        product_report = bounds.mimo_bound_asymptotic(model, 'mimo_product')
        burn = default_burn_in(model) if burn_in is None else burn_in
        if horizon <= burn:
            raise VerificationError('horizon %d does not exceed the burn-in window %d' % (horizon, burn))
        samples = np.concatenate([run_loop(model, controller, horizon, s).e[burn:] for s in seeds])
    else:
        det_report = bounds.mimo_bound_at_step(model, step, 'mimo_det', horizon=levinson_horizon)
        product_report = bounds.mimo_bound_at_step(model, step, 'mimo_product', horizon=levinson_horizon)
        samples = np.array([run_loop(model, controller, step + 1, s).e[step] for s in seeds])
    estimate = covariance_det_estimate(samples, seed=seed)
    warnings = ('singular_covariance',) if estimate.singular else ()
    return VerificationReport(det_report, estimate.det, estimate.std_error, model.descriptor,
                              controller.descriptor, seeds, None,
                              int(round(1000 * (time.perf_counter() - started))),
                              product_bound=product_report, product_empirical=estimate.moment_product,
                              product_std_error=estimate.product_std_error, warnings=warnings)


@dataclass(frozen=True)
class Cell:
    '''One sweep cell; plain data so it can be shipped to a worker process.'''
    cell_id: int
    model: dict
    controller: dict
    p: float
    replicate: int
    seed: int
    settings: dict


def cells_for(config, replicates=None):
    '''models x controllers x p x replicates, in a fixed order. MIMO models
    take one cell per (controller, replicate).'''
    replicates = config.replicates if replicates is None else replicates
    settings = config.run_settings()
    cells = []
    for model_desc in config.models:
        dimension = model_from_config(model_desc).dimension
        for controller_desc in config.expanded_controllers():
            p_values = config.p_values if dimension == 1 else (2.0,)
            for p in p_values:
                for r in range(replicates):
                    index = len(cells)
                    cells.append(Cell(index, model_desc, controller_desc, p, r,
                                      derive_seed(config.master_seed, index), settings))
    return cells


def run_cell(cell):
    settings = cell.settings
    model = model_from_config(cell.model)
    controller = build_controller(cell.controller, model, settings['levinson_horizon'])
    if model.dimension > 1:
        report = verify_mimo_bound(model, controller, settings['horizon'], settings['trials'], cell.seed,
                                   step=settings['step'], burn_in=settings['burn_in'],
                                   levinson_horizon=settings['levinson_horizon'])
    else:
        report = verify_bound(model, controller, cell.p, settings['horizon'], settings['trials'], cell.seed,
                              step=settings['step'], burn_in=settings['burn_in'],
                              tightness=settings['tightness'], max_lag=settings['max_lag'],
                              mi_samples=settings['mi_samples'],
                              levinson_horizon=settings['levinson_horizon'])
    report.cell_id = cell.cell_id
    return report


def audit_controllers(config, seed=None, strict=True):
    '''Causality audit of every controller descriptor before any cell runs.
    With strict, raises CausalityError naming the first failing controller.'''
    seed = config.master_seed if seed is None else seed
    results = []
    models = [model_from_config(m) for m in config.models]
    for controller_desc in config.expanded_controllers():
        for model in models:
            try:
                controller = build_controller(controller_desc, model, config.levinson_horizon)
            except ConfigError:
                continue
            audit = causality_audit(controller, AUDIT_LENGTH, AUDIT_TRIALS, seed,
                                    positions=range(AUDIT_LENGTH))
            results.append(audit)
            if strict and not audit.passed:
                raise CausalityError('Controller %s fails the causality audit at k=%d'
                                     % (audit.controller_descriptor, audit.violating_index))
            break
    return results


@dataclass
class SweepResult:
    reports: list
    failures: list
    wall_time_ms: int

    @property
    def violations(self):
        return [r for r in self.reports if r.violation]

    def summary(self):
        ratios = [r.gap_ratio for r in self.reports]
        return {
            'cells': len(self.reports) + len(self.failures),
            'violations': len(self.violations),
            'worst_gap_ratio': min(ratios) if ratios else None,
            'max_gap_ratio': max(ratios) if ratios else None,
            'wall_time_ms': self.wall_time_ms,
            'failures': [{'cell_id': cell_id, 'error': error} for cell_id, error in self.failures],
        }


def sweep(config, threads=None, replicates=None):
    started = time.perf_counter()
    cells = cells_for(config, replicates)
    if cells:
        audit_controllers(config)
    threads = config.threads if threads is None else threads
    log.info('Sweeping %d cells on %d worker(s)', len(cells), threads)
    reports, failures = CellManager(run_cell, threads).run(cells)
    reports = sorted(reports, key=lambda r: r.cell_id)
    failures = sorted(failures)
    for cell_id, error in failures:
        log.error('Cell %d failed:\n%s', cell_id, error)
    return SweepResult(reports, failures, int(round(1000 * (time.perf_counter() - started))))


def write_reports(path, reports, record_timing=False):
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for report in reports:
            writer.writerow(report.to_row(record_timing))
