'''Experiment configuration documents.

A config is a JSON (or YAML) mapping. Each top-level field has a converter
in ExperimentConfig.__fields__; unknown keys and missing required keys are
rejected, and every error names the field path it came from.
'''
import logging
import os
from dataclasses import dataclass, field, replace

import yaml

from entrolim.controllers import (ZeroController, ConstantController, PredictorController,
                                  RandomCausalController, LearnedController, FIRController, GainMap,
                                  AnticipatoryController, ControllerError)
from entrolim.distributions import parse_exponent, is_infinite, DistributionError
from entrolim.lib import EntrolimError
from entrolim.processes import model_from_config, ModelError, DEFAULT_HORIZON
from entrolim.simulator import ComposedController, CausalityError, DimensionError, run_loop, KP, PK

log = logging.getLogger(__name__)

MODES = ('bound_only', 'simulate', 'verify', 'sweep')
THREADS_ENV = 'ENTROLIM_THREADS'


class ConfigError(EntrolimError):
    pass


def _integer(minimum):
    def convert(value, path):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            else:
                raise ConfigError('%s must be an integer (got %r)' % (path, value))
        if value < minimum:
            raise ConfigError('%s must be >= %d (got %d)' % (path, minimum, value))
        return value
    return convert


def _optional(convert):
    def optional(value, path):
        return None if value is None else convert(value, path)
    return optional


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('%s must be a number (got %r)' % (path, value))
    return float(value)


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError('%s must be true or false (got %r)' % (path, value))
    return value


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigError('%s must be a non-empty string (got %r)' % (path, value))
    return value


def _mode(value, path):
    if value not in MODES:
        raise ConfigError('%s must be one of %s (got %r)' % (path, ', '.join(MODES), value))
    return value


def _p_values(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError('%s must be a non-empty list' % path)
    out = []
    for i, p in enumerate(value):
        try:
            out.append(parse_exponent(p))
        except DistributionError as e:
            raise ConfigError('%s[%d]: %s' % (path, i, e))
    return tuple(out)


def _models(value, path):
    if not isinstance(value, list):
        raise ConfigError('%s must be a list of model descriptors' % path)
    for i, desc in enumerate(value):
        try:
            model_from_config(desc)
        except ModelError as e:
            raise ConfigError('%s[%d]: %s' % (path, i, e))
    return tuple(value)


_controller_fields = {
    'zero': {},
    'constant': {'value': 0.0},
    'predictor': {},
    'random': {'seed': 0, 'memory': 4, 'gain_cap': 1.0, 'count': 1},
    'learned': {'memory': 1, 'training_steps': 100000, 'training_seed': 0, 'features': 'linear'},
    'fir': {'taps': None},
    'gain': {'gain': 1.0, 'delay': 0},
    'anticipatory': {},
    'composed': {'plant': None, 'controller': None, 'order': KP},
}


def normalize_controller(desc, path):
    '''Fill defaults and check keys and value types of one controller descriptor.'''
    if not isinstance(desc, dict):
        raise ConfigError('%s must be a mapping (got %r)' % (path, desc))
    kind = desc.get('kind')
    if kind not in _controller_fields:
        raise ConfigError('%s.kind must be one of %s (got %r)' % (path, ', '.join(sorted(_controller_fields)), kind))
    defaults = _controller_fields[kind]
    for k in desc:
        if k != 'kind' and k not in defaults:
            raise ConfigError('Invalid key %s in %s' % (k, path))
    out = {'kind': kind}
    for k, default in defaults.items():
        value = desc.get(k, default)
        if value is None:
            raise ConfigError('%s.%s is required for %s controllers' % (path, k, kind))
        out[k] = value
    for k in ('memory', 'count', 'training_steps', 'training_seed', 'seed', 'delay'):
        if k in out:
            out[k] = _integer(0)(out[k], '%s.%s' % (path, k))
    for k in ('value', 'gain_cap', 'gain'):
        if k in out:
            if isinstance(out[k], bool) or not isinstance(out[k], (int, float)):
                raise ConfigError('%s.%s must be a number (got %r)' % (path, k, out[k]))
            out[k] = float(out[k])
    if kind == 'fir':
        if not isinstance(out['taps'], list) or not all(isinstance(t, (int, float)) for t in out['taps']):
            raise ConfigError('%s.taps must be a list of numbers' % path)
    if kind == 'learned' and out['features'] not in ('linear', 'poly'):
        raise ConfigError('%s.features must be linear or poly (got %r)' % (path, out['features']))
    if kind == 'composed':
        if out['order'] not in (KP, PK):
            raise ConfigError('%s.order must be KP or PK (got %r)' % (path, out['order']))
        out['plant'] = normalize_controller(out['plant'], path + '.plant')
        out['controller'] = normalize_controller(out['controller'], path + '.controller')
    return out


def _controllers(value, path):
    if not isinstance(value, list):
        raise ConfigError('%s must be a list of controller descriptors' % path)
    return tuple(normalize_controller(desc, '%s[%d]' % (path, i)) for i, desc in enumerate(value))


def expand_controllers(descriptors):
    '''A random descriptor with count n stands for n controllers with
    consecutive seeds.'''
    out = []
    for desc in descriptors:
        if desc['kind'] == 'random':
            for i in range(desc['count']):
                out.append(dict(desc, seed=desc['seed'] + i, count=1))
        else:
            out.append(desc)
    return out


def build_controller(desc, model, levinson_horizon=DEFAULT_HORIZON):
    '''Instantiate a normalized controller descriptor for a given model.'''
    kind = desc['kind']
    dimension = model.dimension
    try:
        if kind == 'zero':
            return ZeroController(dimension)
        if kind == 'constant':
            return ConstantController(desc['value'], dimension)
        if kind == 'predictor':
            return PredictorController(model, levinson_horizon)
        if kind == 'random':
            return RandomCausalController(desc['seed'], desc['memory'], desc['gain_cap'], dimension)
        if kind == 'learned':
            trace = run_loop(model, ZeroController(dimension), desc['training_steps'], desc['training_seed'])
            return LearnedController([trace], desc['memory'], desc['features'])
        if kind == 'fir':
            return FIRController(desc['taps'])
        if kind == 'gain':
            return GainMap(desc['gain'], desc['delay'])
        if kind == 'anticipatory':
            return AnticipatoryController(dimension)
        return ComposedController(build_controller(desc['plant'], model, levinson_horizon),
                                  build_controller(desc['controller'], model, levinson_horizon),
                                  desc['order'])
    except (ControllerError, CausalityError, DimensionError) as e:
        raise ConfigError('controller %s: %s' % (kind, e))


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple
    horizon: int
    controllers: tuple = ()
    p_values: tuple = (2.0,)
    trials: int = 1
    master_seed: int = 0
    output_dir: str = 'out'
    mode: str = 'verify'
    step: int = None
    burn_in: int = None
    replicates: int = 1
    threads: int = 1
    max_lag: int = 10
    mi_samples: int = 20000
    tightness: bool = True
    record_timing: bool = False
    levinson_horizon: int = DEFAULT_HORIZON
    z0_scale: float = 0.0
    source: str = field(default=None, compare=False)

    __fields__ = {
        'models': _models,
        'horizon': _integer(1),
        'controllers': _controllers,
        'p_values': _p_values,
        'trials': _integer(1),
        'master_seed': _integer(0),
        'output_dir': _string,
        'mode': _mode,
        'step': _optional(_integer(0)),
        'burn_in': _optional(_integer(0)),
        'replicates': _integer(1),
        'threads': _integer(1),
        'max_lag': _integer(1),
        'mi_samples': _integer(100),
        'tightness': _boolean,
        'record_timing': _boolean,
        'levinson_horizon': _integer(1),
        'z0_scale': _number,
    }
    __required__ = ('models', 'horizon')

    @classmethod
    def _check_values(cls, values):
        if not isinstance(values, dict):
            raise ConfigError('config must be a mapping at the top level')
        for k in values:
            if k not in cls.__fields__:
                raise ConfigError('Invalid key %s in config' % k)
        for k in cls.__required__:
            if k not in values:
                raise ConfigError('Required field %s missing from config' % k)

    @classmethod
    def from_dict(cls, values, source=None):
        cls._check_values(values)
        converted = {k: cls.__fields__[k](v, k) for k, v in values.items()}
        config = cls(source=source, **converted)
        if config.step is not None and config.step >= config.horizon:
            raise ConfigError('step (%d) must be below horizon (%d)' % (config.step, config.horizon))
        return config

    def to_dict(self):
        out = {}
        for k in self.__fields__:
            value = getattr(self, k)
            if k == 'p_values':
                value = ['inf' if is_infinite(p) else p for p in value]
            elif isinstance(value, tuple):
                value = list(value)
            if value is not None:
                out[k] = value
        return out

    def expanded_controllers(self):
        return expand_controllers(self.controllers)

    def run_settings(self):
        return {
            'horizon': self.horizon,
            'trials': self.trials,
            'step': self.step,
            'burn_in': self.burn_in,
            'max_lag': self.max_lag,
            'mi_samples': self.mi_samples,
            'tightness': self.tightness,
            'levinson_horizon': self.levinson_horizon,
        }

    def with_overrides(self, seed=None, output_dir=None, threads=None, environ=os.environ):
        '''CLI flag > environment > config file.'''
        changes = {}
        if seed is not None:
            changes['master_seed'] = _integer(0)(seed, '--seed')
        if output_dir is not None:
            changes['output_dir'] = output_dir
        if threads is None and environ.get(THREADS_ENV):
            try:
                threads = int(environ[THREADS_ENV])
            except ValueError:
                raise ConfigError('%s must be an integer (got %r)' % (THREADS_ENV, environ[THREADS_ENV]))
        if threads is not None:
            changes['threads'] = _integer(1)(threads, '--threads')
        return replace(self, **changes) if changes else self


def parse_config(text, source='<config>'):
    try:
        values = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        if mark is not None:
            raise ConfigError('%s:%d:%d: %s' % (source, mark.line + 1, mark.column + 1,
                                                getattr(e, 'problem', None) or 'syntax error'))
        raise ConfigError('%s: %s' % (source, e))
    try:
        return ExperimentConfig.from_dict(values, source)
    except ConfigError as e:
        raise ConfigError('%s: %s' % (source, e))


def load_config(path):
    '''Read and validate a config file. OSError propagates to the caller.'''
    with open(path, encoding='utf-8') as f:
        text = f.read()
    config = parse_config(text, str(path))
    log.debug('Loaded config %s: %d model(s), %d controller(s)', path, len(config.models),
              len(config.expanded_controllers()))
    return config


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False)
