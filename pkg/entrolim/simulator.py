'''The generic feedback loop e_k = d_k + z_k, z_k = g_k(e_0..e_{k-1}).

Policies get the whole signal buffers but may only read the prefix their
causality allows; entries not yet produced hold NaN, so a policy that
looks ahead in a live loop produces a non-finite output and is stopped.
The audits feed fully populated buffers instead, which is what exposes a
look-ahead as a changed output.
'''
import logging
from dataclasses import dataclass, field

import numpy as np

from entrolim.lib import EntrolimError, rng_for

log = logging.getLogger(__name__)

KP = 'KP'
PK = 'PK'


class DimensionError(EntrolimError):
    pass


class CausalityError(EntrolimError):
    pass


class ControllerPolicy(object):
    '''Base for every map used in the loop.

    step(k, inputs, outputs, state) returns the output at time k. A strictly
    causal policy reads inputs[:k] and outputs[:k]; a causal one may also
    read inputs[k]. start(length) returns the per-run state, so one policy
    instance can drive any number of runs.
    '''
    strictly_causal = True

    def __init__(self, dimension=1, initial_output=None):
        self.dimension = dimension
        if initial_output is None:
            initial_output = 0.0 if dimension == 1 else np.zeros(dimension)
        self.initial_output = initial_output

    @property
    def descriptor(self):
        return type(self).__name__.lower()

    def start(self, length):
        return {}

    def step(self, k, inputs, outputs, state):
        raise NotImplementedError

    def respond(self, k, inputs, outputs, state):
        if k == 0 and self.strictly_causal:
            return self.initial_output
        return self.step(k, inputs, outputs, state)

    def disturbance_response(self, d):
        '''z for a whole disturbance path, when z is a fixed causal filter of
        the reconstructed disturbance. None means use the step recursion.'''
        return None

    def __str__(self):
        return self.descriptor


class ComposedController(ControllerPolicy):
    '''The open-loop map g = K(P(.)) (order KP) or g = P(K(.)) (order PK) as
    one strictly causal policy.'''

    def __init__(self, plant, controller, order=KP):
        if order not in (KP, PK):
            raise CausalityError('composition order must be KP or PK (got %r)' % (order,))
        if not plant.strictly_causal and not controller.strictly_causal:
            raise CausalityError('Neither %s nor %s is strictly causal; the loop would be algebraic'
                                 % (plant.descriptor, controller.descriptor))
        if plant.dimension != controller.dimension:
            raise DimensionError('plant has %d channels, controller %d' % (plant.dimension, controller.dimension))
        super().__init__(plant.dimension)
        self.plant = plant
        self.controller = controller
        self.order = order
        if order == KP:
            self.first, self.second = plant, controller
        else:
            self.first, self.second = controller, plant

    @property
    def descriptor(self):
        return 'composed(%s:%s>%s)' % (self.order, self.first.descriptor, self.second.descriptor)

    def start(self, length):
        shape = (length,) if self.dimension == 1 else (length, self.dimension)
        return {
            'mid': np.full(shape, np.nan),
            'first': self.first.start(length),
            'second': self.second.start(length),
        }

    def respond(self, k, inputs, outputs, state):
        return self.step(k, inputs, outputs, state)

    def step(self, k, inputs, outputs, state):
        mid = state['mid']
        if self.first.strictly_causal:
            mid[k] = self.first.respond(k, inputs, mid, state['first'])
        elif k >= 1:
            # The causal first stage needs inputs[k-1], which is known only now.
            mid[k - 1] = self.first.respond(k - 1, inputs, mid, state['first'])
        return self.second.respond(k, mid, outputs, state['second'])


def compose_loop(plant, controller, order=KP):
    return ComposedController(plant, controller, order)


@dataclass
class SimulationTrace:
    d: np.ndarray
    z: np.ndarray
    e: np.ndarray
    seed: int
    model_descriptor: str
    controller_descriptor: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.d) == len(self.z) == len(self.e)):
            raise DimensionError('trace signals differ in length')

    def __len__(self):
        return len(self.e)

    @property
    def dimension(self):
        return 1 if self.e.ndim == 1 else self.e.shape[1]

    def loop_identity_holds(self):
        return bool(np.array_equal(self.e, self.d + self.z))


def _buffer(length, dimension):
    return np.full((length,) if dimension == 1 else (length, dimension), np.nan)


def close_loop(d, controller, z0_offset=None):
    '''Run the loop recurrence on a given disturbance path. Returns (z, e).'''
    d = np.asarray(d, dtype=float)
    length = len(d)
    dimension = 1 if d.ndim == 1 else d.shape[1]
    if dimension != controller.dimension:
        raise DimensionError('disturbance has %d channels, %s has %d'
                             % (dimension, controller.descriptor, controller.dimension))
    if not controller.strictly_causal:
        raise CausalityError('%s is not strictly causal and cannot close the loop on its own' % controller.descriptor)

    if z0_offset is None:
        z = controller.disturbance_response(d)
        if z is not None:
            return z, d + z

    z = _buffer(length, dimension)
    e = _buffer(length, dimension)
    state = controller.start(length)
    for k in range(length):
        zk = controller.respond(k, e, z, state)
        if k == 0 and z0_offset is not None:
            zk = zk + z0_offset
        if not np.all(np.isfinite(zk)):
            raise CausalityError('%s produced a non-finite output at k=%d (did it read e_k?)'
                                 % (controller.descriptor, k))
        z[k] = zk
        e[k] = d[k] + z[k]
    return z, e


def run_loop(model, controller, length, seed, z0_scale=0.0):
    '''Sample d from the model and close the loop. z0_scale > 0 draws a
    Gaussian z_0 offset independent of d.'''
    if length < 1:
        raise DimensionError('length must be >= 1')
    if model.dimension != controller.dimension:
        raise DimensionError('%s has %d channels, %s has %d'
                             % (model.descriptor, model.dimension, controller.descriptor, controller.dimension))
    d = model.sample_path(length, seed)
    z0_offset = None
    if z0_scale:
        rng = rng_for(seed, 1)
        z0_offset = z0_scale * (rng.standard_normal() if model.dimension == 1
                                else rng.standard_normal(model.dimension))
    z, e = close_loop(d, controller, z0_offset)
    log.debug('Ran %s against %s for %d steps (seed %d)', controller.descriptor, model.descriptor, length, seed)
    return SimulationTrace(d, z, e, seed, model.descriptor, controller.descriptor)


@dataclass
class AuditReport:
    passed: bool
    violations: list
    trials: int
    controller_descriptor: str

    @property
    def violating_index(self):
        return self.violations[0] if self.violations else None


def _drive(controller, inputs):
    outputs = _buffer(len(inputs), controller.dimension)
    state = controller.start(len(inputs))
    for k in range(len(inputs)):
        outputs[k] = controller.respond(k, inputs, outputs, state)
    return outputs


def _first_difference(a, b, upto):
    differ = np.nonzero(np.any(np.reshape(a[:upto + 1] != b[:upto + 1], (upto + 1, -1)), axis=1))[0]
    return int(differ[0]) if len(differ) else None


def causality_audit(controller, length, trials, seed, positions=None):
    '''Perturb inputs at positions >= k and check z_0..z_k are unchanged.

    positions fixes the k of each trial; otherwise k is drawn at random. A
    failure is reported, not raised.
    '''
    rng = np.random.default_rng(seed)
    shape = (length,) if controller.dimension == 1 else (length, controller.dimension)
    inputs = rng.standard_normal(shape)
    base = _drive(controller, inputs)
    if positions is None:
        positions = rng.integers(0, length, size=trials)
    violations = set()
    for k in positions:
        k = int(k)
        perturbed = inputs.copy()
        perturbed[k:] += rng.standard_normal(perturbed[k:].shape)
        index = _first_difference(base, _drive(controller, perturbed), k)
        if index is not None:
            violations.add(index)
    if violations:
        log.warning('Causality audit of %s failed at %d index(es), first %d',
                    controller.descriptor, len(violations), min(violations))
    return AuditReport(not violations, sorted(violations), len(positions), controller.descriptor)


def closed_loop_audit(model, controller, length, trials, seed):
    '''Perturb d_j for j >= k in the closed loop and check z_0..z_k are unchanged.'''
    rng = rng_for(seed, 2)
    d = model.sample_path(length, seed)
    base, _ = close_loop(d, controller)
    violations = set()
    for k in rng.integers(0, length, size=trials):
        k = int(k)
        perturbed = d.copy()
        perturbed[k:] += rng.standard_normal(perturbed[k:].shape)
        z, _ = close_loop(perturbed, controller)
        index = _first_difference(base, z, k)
        if index is not None:
            violations.add(index)
    return AuditReport(not violations, sorted(violations), trials, controller.descriptor)
