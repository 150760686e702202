import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter
from sklearn.preprocessing import PolynomialFeatures

from entrolim.lib import EntrolimError
from entrolim.processes import VectorGaussAR, ScalarLinearModel, DEFAULT_HORIZON
from entrolim.simulator import ControllerPolicy, DimensionError

log = logging.getLogger(__name__)

RIDGE_LAMBDA = 1e-8
RANDOM_HIDDEN_UNITS = 8


class ControllerError(EntrolimError):
    pass


def _reconstructed_window(inputs, outputs, k, memory):
    '''d_{k-1}, d_{k-2}, ..., d_{k-memory} with d_j = e_j - z_j; zero before time 0.'''
    window = np.zeros(memory)
    available = min(k, memory)
    if available:
        past = inputs[k - available:k] - outputs[k - available:k]
        window[:available] = past[::-1]
    return window


class ZeroController(ControllerPolicy):
    @property
    def descriptor(self):
        return 'zero' if self.dimension == 1 else 'zero(m=%d)' % self.dimension

    def step(self, k, inputs, outputs, state):
        return self.initial_output

    def disturbance_response(self, d):
        return np.zeros_like(d)


class ConstantController(ControllerPolicy):
    def __init__(self, value, dimension=1):
        value = float(value) if dimension == 1 else np.asarray(value, dtype=float) * np.ones(dimension)
        super().__init__(dimension, initial_output=value)
        self.value = value

    @property
    def descriptor(self):
        return 'constant(c=%g)' % self.value if self.dimension == 1 else 'constant(c=%s)' % list(self.value)

    def step(self, k, inputs, outputs, state):
        return self.value

    def disturbance_response(self, d):
        return np.zeros_like(d) + self.value


class PredictorController(ControllerPolicy):
    '''z_k = -(best linear prediction of d_k from d_0..d_{k-1}); the loop
    error is then the innovation of d.

    Scalar models use the Levinson-Durbin predictors of orders 0..L, where
    L is where the prediction error reaches the innovation variance (L is
    the AR order for pure AR models). Vector AR models use -A d_{k-1}.
    '''

    def __init__(self, model, horizon=DEFAULT_HORIZON):
        if isinstance(model, VectorGaussAR):
            super().__init__(model.dimension)
            self.transition = model.transition
            self.table = None
        elif isinstance(model, ScalarLinearModel):
            super().__init__(1)
            self.transition = None
            self.table = model.predictor_table(horizon)
        else:
            raise ControllerError('No predictor for model %r' % (model,))
        self.model_descriptor = model.descriptor

    @property
    def descriptor(self):
        return 'predictor(%s)' % self.model_descriptor

    @property
    def order(self):
        return 1 if self.table is None else len(self.table) - 1

    def step(self, k, inputs, outputs, state):
        if self.transition is not None:
            return -(self.transition @ (inputs[k - 1] - outputs[k - 1]))
        order = min(k, self.order)
        if order == 0:
            return 0.0
        return -float(np.dot(self.table[order], _reconstructed_window(inputs, outputs, k, order)))

    def disturbance_response(self, d):
        z = np.zeros_like(d)
        if self.transition is not None:
            z[1:] = -(d[:-1] @ self.transition.T)
            return z
        order = self.order
        if order == 0:
            return z
        steady = lfilter(np.concatenate([[0.0], -self.table[order]]), [1.0], d)
        z[order:] = steady[order:]
        for k in range(1, min(order, len(d))):
            z[k] = -float(np.dot(self.table[k], d[k - 1::-1][:k]))
        return z


class RandomCausalController(ControllerPolicy):
    '''z_k = gain_cap * tanh(v . tanh(W x + b)) over the last `memory` errors:
    a random bounded nonlinearity fixed by the seed.'''

    def __init__(self, seed, memory, gain_cap, dimension=1):
        if memory < 0:
            raise ControllerError('memory must be >= 0 (got %r)' % memory)
        if not gain_cap > 0:
            raise ControllerError('gain_cap must be positive (got %r)' % gain_cap)
        super().__init__(dimension)
        self.seed = seed
        self.memory = memory
        self.gain_cap = float(gain_cap)
        rng = np.random.default_rng(seed)
        width = memory * dimension
        self.weights = rng.standard_normal((RANDOM_HIDDEN_UNITS, width)) / math.sqrt(max(width, 1))
        self.bias = rng.standard_normal(RANDOM_HIDDEN_UNITS)
        self.readout = rng.standard_normal((dimension, RANDOM_HIDDEN_UNITS)) / math.sqrt(RANDOM_HIDDEN_UNITS)

    @property
    def descriptor(self):
        return 'random(seed=%d,memory=%d,cap=%g)' % (self.seed, self.memory, self.gain_cap)

    def step(self, k, inputs, outputs, state):
        if self.memory == 0:
            return self.initial_output
        window = np.zeros((self.memory, self.dimension))
        available = min(k, self.memory)
        window[:available] = np.reshape(inputs[k - available:k], (available, self.dimension))[::-1]
        hidden = np.tanh(self.weights @ window.ravel() + self.bias)
        z = self.gain_cap * np.tanh(self.readout @ hidden)
        return float(z[0]) if self.dimension == 1 else z


class LearnedController(ControllerPolicy):
    '''Least-squares regression of -d_k on d_{k-1..k-memory} (optionally on
    their degree-2 polynomial features), applied to the reconstructed
    disturbance at run time.'''

    def __init__(self, traces, memory, features='linear'):
        super().__init__(1)
        if memory < 0:
            raise ControllerError('memory must be >= 0 (got %r)' % memory)
        if features not in ('linear', 'poly'):
            raise ControllerError('features must be linear or poly (got %r)' % (features,))
        self.memory = memory
        self.features = features
        self.training_steps = 0
        if memory == 0:
            self.coefficients = np.zeros(0)
            self.std_errors = np.zeros(0)
            self.powers = np.zeros((0, 0), dtype=int)
            return
        self.expander = PolynomialFeatures(degree=1 if features == 'linear' else 2, include_bias=False)
        design, target = self._training_set(traces)
        design = self.expander.fit_transform(design)
        self.powers = self.expander.powers_
        self.coefficients, self.std_errors = self._fit(design, target)
        log.info('Trained %s on %d samples', self.descriptor, len(target))

    def _training_set(self, traces):
        windows, targets = [], []
        for trace in traces:
            d = np.asarray(trace.d, dtype=float)
            if d.ndim != 1:
                raise DimensionError('learned controllers are scalar; trace has %d channels' % d.shape[1])
            if len(d) <= self.memory:
                continue
            windows.append(sliding_window_view(d, self.memory)[:-1, ::-1])
            targets.append(-d[self.memory:])
        if not windows:
            raise ControllerError('No training trace is longer than memory=%d' % self.memory)
        self.training_steps = sum(len(t) for t in targets)
        return np.concatenate(windows), np.concatenate(targets)

    def _fit(self, design, target):
        gram = design.T @ design
        if np.linalg.matrix_rank(design) < design.shape[1]:
            log.warning('Singular regression for %s; using ridge lambda=%g', self.descriptor, RIDGE_LAMBDA)
            gram = gram + RIDGE_LAMBDA * np.eye(design.shape[1])
            beta = np.linalg.solve(gram, design.T @ target)
        else:
            beta = np.linalg.lstsq(design, target, rcond=None)[0]
        residual = target - design @ beta
        dof = max(len(target) - design.shape[1], 1)
        sigma2 = float(residual @ residual) / dof
        std_errors = np.sqrt(np.maximum(np.diag(np.linalg.pinv(gram)) * sigma2, 0.0))
        return beta, std_errors

    @property
    def descriptor(self):
        return 'learned(memory=%d,features=%s)' % (self.memory, self.features)

    @property
    def taps(self):
        '''Coefficients on d_{k-1}..d_{k-memory} (the linear terms).'''
        return self.coefficients[:self.memory]

    @property
    def tap_std_errors(self):
        return self.std_errors[:self.memory]

    def _expand(self, window):
        return np.prod(window[None, :] ** self.powers, axis=1)

    def step(self, k, inputs, outputs, state):
        if self.memory == 0:
            return 0.0
        return float(self._expand(_reconstructed_window(inputs, outputs, k, self.memory)) @ self.coefficients)

    def disturbance_response(self, d):
        if self.memory == 0:
            return np.zeros_like(d)
        if self.features != 'linear':
            return None
        return lfilter(np.concatenate([[0.0], self.coefficients]), [1.0], d)


class FIRController(ControllerPolicy):
    '''z_k = sum_j taps[j-1] e_{k-j}.'''

    def __init__(self, taps):
        super().__init__(1)
        self.taps = np.asarray(taps, dtype=float)

    @property
    def descriptor(self):
        return 'fir(%s)' % self.taps.tolist()

    def step(self, k, inputs, outputs, state):
        n = min(k, len(self.taps))
        if n == 0:
            return 0.0
        return float(np.dot(self.taps[:n], inputs[k - n:k][::-1]))


class GainMap(ControllerPolicy):
    '''y_k = gain * u_{k-delay}. delay 0 is causal but not strictly causal,
    so it can only sit in a composition next to a strictly causal stage.'''

    def __init__(self, gain, delay=0):
        if delay not in (0, 1):
            raise ControllerError('delay must be 0 or 1 (got %r)' % delay)
        super().__init__(1)
        self.gain = float(gain)
        self.delay = delay

    @property
    def strictly_causal(self):
        return self.delay == 1

    @property
    def descriptor(self):
        return 'gain(%g,delay=%d)' % (self.gain, self.delay)

    def step(self, k, inputs, outputs, state):
        return self.gain * inputs[k - self.delay]


class AnticipatoryController(ControllerPolicy):
    '''Test double that claims strict causality but returns e_k.'''

    @property
    def descriptor(self):
        return 'anticipatory'

    def respond(self, k, inputs, outputs, state):
        return self.step(k, inputs, outputs, state)

    def step(self, k, inputs, outputs, state):
        return inputs[k]


def zero_controller(dim=1):
    return ZeroController(dim)


def constant_controller(value, dim=1):
    return ConstantController(value, dim)


def predictor_controller(model, horizon=DEFAULT_HORIZON):
    return PredictorController(model, horizon)


def random_causal_controller(seed, memory, gain_cap, dim=1):
    return RandomCausalController(seed, memory, gain_cap, dim)


def learned_controller(training_traces, memory, features='linear'):
    return LearnedController(training_traces, memory, features)


def unit_delay(gain=1.0):
    return GainMap(gain, delay=1)


def identity_map():
    return GainMap(1.0, delay=0)
