import csv
import json
import os

import numpy as np

from entrolim.lib import EntrolimError
from entrolim.simulator import SimulationTrace

SIGNALS = ('d', 'z', 'e')


class TraceFileError(EntrolimError):
    pass


def trace_columns(dimension):
    if dimension == 1:
        return ['k'] + list(SIGNALS)
    return ['k'] + ['%s_%d' % (s, i + 1) for s in SIGNALS for i in range(dimension)]


def write_trace(trace, directory, name):
    '''Write <name>.csv (columns k, d, z, e; d_1.. per channel for MIMO) and
    the <name>.json sidecar. Floats go out as repr so a rerun is
    byte-identical and a reread is exact.'''
    columns = trace_columns(trace.dimension)
    csv_path = os.path.join(directory, name + '.csv')
    with open(csv_path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        signals = [np.reshape(getattr(trace, s), (len(trace), -1)) for s in SIGNALS]
        for k in range(len(trace)):
            row = [k]
            for signal in signals:
                row.extend(repr(float(v)) for v in signal[k])
            writer.writerow(row)

    sidecar = {
        'seed': trace.seed,
        'model': trace.model_descriptor,
        'controller': trace.controller_descriptor,
        'length': len(trace),
        'dimension': trace.dimension,
        'columns': columns,
    }
    sidecar.update(trace.metadata)
    json_path = os.path.join(directory, name + '.json')
    with open(json_path, 'w') as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write('\n')
    return csv_path, json_path


def read_trace(csv_path):
    json_path = os.path.splitext(csv_path)[0] + '.json'
    with open(json_path) as f:
        sidecar = json.load(f)
    with open(csv_path, newline='') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = np.array([[float(cell) for cell in row[1:]] for row in reader])
    dimension = sidecar['dimension']
    if header != trace_columns(dimension):
        raise TraceFileError('%s: unexpected columns %s' % (csv_path, header))
    rows = np.reshape(rows, (len(rows), len(SIGNALS) * dimension))
    d, z, e = (rows[:, i * dimension:(i + 1) * dimension] for i in range(len(SIGNALS)))
    if dimension == 1:
        d, z, e = d[:, 0], z[:, 0], e[:, 0]
    metadata = {k: v for k, v in sidecar.items()
                if k not in ('seed', 'model', 'controller', 'length', 'dimension', 'columns')}
    return SimulationTrace(d, z, e, sidecar['seed'], sidecar['model'], sidecar['controller'], metadata)
