import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from entrolim.controllers import predictor_controller, zero_controller
from entrolim.processes import GaussARMA, VectorGaussAR
from entrolim.simulator import run_loop
from entrolim.tracefile import write_trace, read_trace, trace_columns, TraceFileError


def test_columns():
    assert trace_columns(1) == ['k', 'd', 'z', 'e']
    assert trace_columns(2) == ['k', 'd_1', 'd_2', 'z_1', 'z_2', 'e_1', 'e_2']


def test_round_trip(tmp_path):
    model = GaussARMA([0.9])
    trace = run_loop(model, predictor_controller(model), 200, 5)
    trace.metadata.update({'master_seed': 1, 'trial': 0})
    csv_path, json_path = write_trace(trace, str(tmp_path), 'm0_c0_s0')
    back = read_trace(csv_path)
    assert_array_equal(back.d, trace.d)
    assert_array_equal(back.z, trace.z)
    assert_array_equal(back.e, trace.e)
    assert back.seed == 5
    assert back.controller_descriptor == trace.controller_descriptor
    assert back.metadata == {'master_seed': 1, 'trial': 0}
    assert back.loop_identity_holds()

    with open(json_path) as f:
        sidecar = json.load(f)
    assert sidecar['length'] == 200
    assert sidecar['model'] == model.descriptor


def test_vector(tmp_path):
    model = VectorGaussAR(np.diag([0.5, -0.3]), np.eye(2))
    trace = run_loop(model, zero_controller(2), 50, 6)
    csv_path, _ = write_trace(trace, str(tmp_path), 'vector')
    with open(csv_path) as f:
        assert f.readline().strip() == 'k,d_1,d_2,z_1,z_2,e_1,e_2'
    back = read_trace(csv_path)
    assert back.dimension == 2
    assert_array_equal(back.e, trace.e)


def test_rerun_is_byte_identical(tmp_path):
    model = GaussARMA([0.5], [0.3])
    for name in ('a', 'b'):
        write_trace(run_loop(model, zero_controller(), 100, 7), str(tmp_path), name)
    assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()
    sidecars = [json.loads((tmp_path / (name + '.json')).read_text()) for name in ('a', 'b')]
    assert sidecars[0] == sidecars[1]


def test_bad_header(tmp_path):
    trace = run_loop(GaussARMA([0.5]), zero_controller(), 10, 8)
    csv_path, _ = write_trace(trace, str(tmp_path), 'bad')
    text = (tmp_path / 'bad.csv').read_text().replace('k,d,z,e', 'k,x,y,z', 1)
    (tmp_path / 'bad.csv').write_text(text)
    with pytest.raises(TraceFileError):
        read_trace(csv_path)
