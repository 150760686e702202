'''entrolim command line: bound tables, traces, verification runs and sweeps.

    entrolim [bound|simulate|verify|sweep|audit] --config PATH [--seed N]
             [--out DIR] [--threads N] [--verbose]

Without a subcommand the config's mode decides. Exit codes: 0 success,
1 other failure, 2 config error, 3 IO error, 4 bound violation,
5 causality audit failure.
'''
import argparse
import csv
import json
import logging
import os
import sys

from entrolim import __version__
from entrolim.bounds import bound_forms, mimo_bound_forms
from entrolim.config import load_config, build_controller, ConfigError
from entrolim.distributions import format_exponent
from entrolim.lib import EntrolimError, derive_seed
from entrolim.processes import model_from_config
from entrolim.simulator import run_loop, CausalityError
from entrolim.tracefile import write_trace
from entrolim.verify import sweep, audit_controllers, write_reports

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VIOLATION = 4
EXIT_CAUSALITY = 5

COMMANDS = ('bound', 'simulate', 'verify', 'sweep', 'audit')
MODE_COMMANDS = {'bound_only': 'bound', 'simulate': 'simulate', 'verify': 'verify', 'sweep': 'sweep'}

BOUND_COLUMNS = ['model', 'form', 'p', 'h_bits', 'C_p', 'direct', 'spectral', 'gw']
AUDIT_COLUMNS = ['controller', 'passed', 'violating_index', 'violations', 'trials']


def _output_dir(config):
    os.makedirs(config.output_dir, exist_ok=True)
    return config.output_dir


def _write_csv(path, columns, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def _write_json(path, data):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def bound_rows(config):
    rows = []
    for desc in config.models:
        model = model_from_config(desc)
        if model.dimension == 1:
            forms = [bound_forms(model, p) for p in config.p_values]
        else:
            forms = [mimo_bound_forms(model)]
        for reports in forms:
            direct = reports['direct']
            rows.append({
                'model': model.descriptor,
                'form': 'lp' if model.dimension == 1 else 'mimo_det',
                'p': format_exponent(direct.p_exponent),
                'h_bits': repr(float(direct.conditional_entropy_bits)),
                'C_p': repr(float(direct.constant_Cp)),
                'direct': repr(float(direct.bound_value)),
                'spectral': repr(float(reports['spectral'].bound_value)),
                'gw': repr(float(reports['gw'].bound_value)),
            })
    return rows


def cmd_bound(config, out=None):
    out = sys.stdout if out is None else out
    rows = bound_rows(config)
    print('%-40s %-8s %5s %12s %12s %12s %12s' % ('model', 'form', 'p', 'h_bits', 'direct', 'spectral', 'gw'),
          file=out)
    for row in rows:
        print('%-40s %-8s %5s %12.6g %12.6g %12.6g %12.6g'
              % (row['model'], row['form'], row['p'], float(row['h_bits']), float(row['direct']),
                 float(row['spectral']), float(row['gw'])), file=out)
    _write_csv(os.path.join(_output_dir(config), 'bounds.csv'), BOUND_COLUMNS, rows)
    return EXIT_OK


def cmd_simulate(config):
    '''One trace per (model, controller, trial), named m<i>_c<j>_s<t>.'''
    directory = os.path.join(_output_dir(config), 'traces')
    os.makedirs(directory, exist_ok=True)
    written = 0
    for mi, desc in enumerate(config.models):
        model = model_from_config(desc)
        for ci, controller_desc in enumerate(config.expanded_controllers()):
            try:
                controller = build_controller(controller_desc, model, config.levinson_horizon)
            except ConfigError as e:
                log.warning('Skipping %s with %s: %s', controller_desc['kind'], model.descriptor, e)
                continue
            for t in range(config.trials):
                seed = derive_seed(config.master_seed, mi, ci, t)
                trace = run_loop(model, controller, config.horizon, seed, z0_scale=config.z0_scale)
                trace.metadata.update({'master_seed': config.master_seed, 'trial': t,
                                       'z0_scale': config.z0_scale})
                write_trace(trace, directory, 'm%d_c%d_s%d' % (mi, ci, t))
                written += 1
    log.info('Wrote %d trace(s) to %s', written, directory)
    return EXIT_OK


def _run_sweep(config, replicates=None):
    result = sweep(config, replicates=replicates)
    directory = _output_dir(config)
    write_reports(os.path.join(directory, 'reports.csv'), result.reports, config.record_timing)
    summary = result.summary()
    summary['master_seed'] = config.master_seed
    if not config.record_timing:
        summary['wall_time_ms'] = 0
    _write_json(os.path.join(directory, 'summary.json'), summary)
    log.info('%d cell(s), %d violation(s), %d failure(s)', summary['cells'], summary['violations'],
             len(result.failures))
    if result.violations:
        return EXIT_VIOLATION
    if result.failures:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_verify(config):
    return _run_sweep(config, replicates=1)


def cmd_sweep(config):
    return _run_sweep(config)


def cmd_audit(config):
    results = audit_controllers(config, strict=False)
    rows = [{
        'controller': audit.controller_descriptor,
        'passed': str(audit.passed).lower(),
        'violating_index': '' if audit.passed else audit.violating_index,
        'violations': len(audit.violations),
        'trials': audit.trials,
    } for audit in results]
    _write_csv(os.path.join(_output_dir(config), 'audit.csv'), AUDIT_COLUMNS, rows)
    failed = [audit for audit in results if not audit.passed]
    for audit in failed:
        log.error('Causality audit failed for %s at k=%d', audit.controller_descriptor, audit.violating_index)
    return EXIT_CAUSALITY if failed else EXIT_OK


_commands = {
    'bound': cmd_bound,
    'simulate': cmd_simulate,
    'verify': cmd_verify,
    'sweep': cmd_sweep,
    'audit': cmd_audit,
}


def build_parser():
    parser = argparse.ArgumentParser(prog='entrolim',
                                     description='Entropy lower bounds on L_p norms of feedback loop errors.')
    parser.add_argument('command', nargs='?', choices=COMMANDS,
                        help='what to run (default: the config mode)')
    parser.add_argument('--config', required=True, help='experiment config (JSON or YAML)')
    parser.add_argument('--seed', type=int, help='override master_seed')
    parser.add_argument('--out', help='override output_dir')
    parser.add_argument('--threads', type=int, help='sweep worker processes (default: $ENTROLIM_THREADS)')
    parser.add_argument('--verbose', action='store_true', help='log at debug level')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    return parser


def setup_logging(verbose):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger('entrolim')
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out,
                                                         threads=args.threads)
        command = args.command or MODE_COMMANDS[config.mode]
        log.debug('Running %s from %s', command, config.source)
        return _commands[command](config)
    except ConfigError as e:
        log.error('%s', e)
        return EXIT_CONFIG
    except CausalityError as e:
        log.error('%s', e)
        return EXIT_CAUSALITY
    except OSError as e:
        log.error('%s', e)
        return EXIT_IO
    except EntrolimError as e:
        log.error('%s', e)
        return EXIT_FAILURE
