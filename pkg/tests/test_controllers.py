import numpy as np
import pytest
from numpy.testing import assert_allclose

from entrolim.controllers import (ControllerError, ConstantController, LearnedController, PredictorController,
                                  RandomCausalController, GainMap, FIRController, constant_controller,
                                  learned_controller, predictor_controller, random_causal_controller,
                                  zero_controller)
from entrolim.distributions import GeneralizedGaussian
from entrolim.processes import IID, GaussARMA, GenGaussAR, VectorGaussAR
from entrolim.simulator import SimulationTrace, close_loop, run_loop


def training_traces(model, steps, seed=0):
    return [run_loop(model, zero_controller(), steps, seed)]


class TestPredictor(object):
    def test_ar1_gives_innovation(self):
        model = GaussARMA([0.9])
        trace = run_loop(model, predictor_controller(model), 200000, 1)
        assert_allclose(np.var(trace.e[1:]), 1.0, rtol=0.015)
        assert_allclose(trace.z[1:], -0.9 * trace.d[:-1], rtol=1e-12, atol=1e-12)

    def test_uniform_innovation_max(self):
        model = GenGaussAR([0.9], GeneralizedGaussian.uniform(1.0))
        trace = run_loop(model, predictor_controller(model), 100000, 2)
        assert np.max(np.abs(trace.e[1:])) <= 1.0 + 1e-9
        assert np.max(np.abs(trace.e[1:])) > 0.99

    def test_iid_is_zero(self):
        controller = predictor_controller(IID(GeneralizedGaussian.laplace()))
        assert controller.order == 0
        z, e = close_loop(np.arange(10.0), controller)
        assert np.all(z == 0.0)

    def test_arma_reaches_innovation(self):
        model = GaussARMA([0.5], [0.6])
        trace = run_loop(model, predictor_controller(model), 200000, 3)
        assert_allclose(np.var(trace.e[100:]), 1.0, rtol=0.015)

    def test_vector(self):
        a = np.array([[0.5, 0.2], [0.0, 0.3]])
        model = VectorGaussAR(a, np.eye(2))
        trace = run_loop(model, predictor_controller(model), 100000, 4)
        assert_allclose(trace.z[1:], -(trace.d[:-1] @ a.T), atol=1e-12)
        assert_allclose(np.cov(trace.e[1:], rowvar=False), np.eye(2), atol=0.03)

    def test_unsupported(self):
        with pytest.raises(ControllerError):
            PredictorController(object())


class TestConstant(object):
    def test_shift(self):
        c = 0.5
        trace = run_loop(IID(GeneralizedGaussian.uniform(1.0)), constant_controller(c), 100000, 5)
        assert np.all(trace.e >= c - 1.0) and np.all(trace.e <= c + 1.0)
        assert_allclose(np.max(np.abs(trace.e)), 1.0 + c, atol=0.01)
        assert trace.z[0] == c

    def test_vector(self):
        controller = ConstantController([1.0, 2.0], dimension=2)
        trace = run_loop(VectorGaussAR(np.zeros((2, 2)), np.eye(2)), controller, 10, 1)
        assert_allclose(trace.z, np.tile([1.0, 2.0], (10, 1)))


class TestRandom(object):
    def test_memory_zero_is_zero_map(self):
        trace = run_loop(GaussARMA([0.5]), random_causal_controller(3, 0, 1.0), 100, 1)
        assert np.all(trace.z == 0.0)

    def test_same_seed_same_map(self):
        a, b = RandomCausalController(8, 3, 2.0), RandomCausalController(8, 3, 2.0)
        model = GaussARMA([0.5])
        assert np.array_equal(run_loop(model, a, 100, 1).z, run_loop(model, b, 100, 1).z)
        c = RandomCausalController(9, 3, 2.0)
        assert not np.array_equal(run_loop(model, a, 100, 1).z, run_loop(model, c, 100, 1).z)

    def test_bounded(self):
        trace = run_loop(GaussARMA([0.9]), RandomCausalController(1, 5, 0.7), 1000, 2)
        assert np.max(np.abs(trace.z)) <= 0.7

    def test_vector(self):
        controller = RandomCausalController(2, 2, 1.0, dimension=2)
        trace = run_loop(VectorGaussAR(0.5 * np.eye(2), np.eye(2)), controller, 50, 3)
        assert trace.z.shape == (50, 2)

    def test_rejects(self):
        with pytest.raises(ControllerError):
            RandomCausalController(1, -1, 1.0)
        with pytest.raises(ControllerError):
            RandomCausalController(1, 2, 0.0)


class TestLearned(object):
    def test_ar1_tap(self):
        controller = learned_controller(training_traces(GaussARMA([0.9]), 100000), 1)
        assert_allclose(controller.taps, [-0.9], atol=0.01)
        assert controller.training_steps == 99999

    def test_iid_taps_vanish(self):
        controller = learned_controller(training_traces(IID(GeneralizedGaussian.gaussian()), 100000), 3)
        assert np.all(np.abs(controller.taps) < 4 * controller.tap_std_errors)

    def test_in_loop_near_bound(self):
        model = GaussARMA([0.9])
        controller = learned_controller(training_traces(model, 100000, seed=1), 1)
        trace = run_loop(model, controller, 200000, 2)
        variance = np.mean(trace.e[1:] ** 2)
        assert 1.0 - 0.02 < variance < 1.02

    def test_poly_features(self):
        model = GaussARMA([0.9])
        controller = LearnedController(training_traces(model, 50000), 2, features='poly')
        assert controller.disturbance_response(np.zeros(5)) is None
        assert_allclose(controller.taps, [-0.9, 0.0], atol=0.03)
        trace = run_loop(model, controller, 2000, 3)
        assert np.all(np.isfinite(trace.e))

    def test_fast_path_matches_recursion(self):
        model = GaussARMA([0.5, 0.2])
        controller = LearnedController(training_traces(model, 20000), 2)
        d = model.sample_path(300, 4)
        z_fast, _ = close_loop(d, controller)
        z_step, _ = close_loop(d, controller, z0_offset=0.0)
        assert_allclose(z_fast, z_step, atol=1e-12)

    def test_singular_falls_back_to_ridge(self):
        trace = SimulationTrace(np.zeros(200), np.zeros(200), np.zeros(200), 0, 'flat', 'zero')
        controller = LearnedController([trace], 2)
        assert_allclose(controller.taps, [0.0, 0.0])

    def test_rejects(self):
        with pytest.raises(ControllerError):
            LearnedController([], 1)
        with pytest.raises(ControllerError):
            LearnedController([], 1, features='cubic')


def test_fir_and_gain():
    d = np.arange(1.0, 6.0)
    z, e = close_loop(d, FIRController([0.5]))
    assert z[0] == 0.0
    assert_allclose(z[1:], 0.5 * e[:-1])
    assert GainMap(1.0, 1).strictly_causal
    assert not GainMap(1.0, 0).strictly_causal
    with pytest.raises(ControllerError):
        GainMap(1.0, 2)
