import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swsynth.cube import Box
from swsynth.expnet import ExpNetwork, ExpUnit, eval_batch, network_from_reals
from swsynth.numerics import LogValue
from swsynth.sigmoidal import approximate_exp_1d, lift_to_two_layer, unit_range


@pytest.mark.parametrize("kind", ["step", "sigmoid", "relu"])
def test_exp_1d_example(kind):
    a = approximate_exp_1d(1.0, 1.0, 0.1, kind)
    if kind == "relu":
        assert a.u == 25
    else:
        assert a.u == math.ceil((math.e - 1 / math.e) / 0.1) == 24
    assert a.achieved_err <= 0.1
    t = np.linspace(-1, 1, 20001)
    assert np.max(np.abs(np.exp(t) - a(t))) <= 0.1


def test_exp_1d_zero():
    a = approximate_exp_1d(0.0, 2.0, 0.1, "step")
    assert a.u == 0 and a.achieved_err == 0.0


def test_step_error_half_tol():
    a = approximate_exp_1d(1.0, 1.0, 0.1, "step")
    assert a.achieved_err <= 0.05 * (1 + 1e-12)


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(0.1, 3.0), st.floats(0.01, 0.5), st.sampled_from(["step", "sigmoid", "relu"]))
def test_exp_1d_within_tol(c, M, tol, kind):
    a = approximate_exp_1d(c, M, tol, kind)
    t = np.linspace(-M, M, 3001)
    assert a.achieved_err <= tol
    assert np.max(np.abs(c * np.exp(t) - a(t))) <= tol


@given(st.floats(0.1, 5), st.floats(0.1, 2.0), st.floats(0.02, 0.5))
def test_step_monotone(c, M, tol):
    a = approximate_exp_1d(c, M, tol, "step")
    vals = a(np.linspace(-M, M, 2000))
    assert np.all(np.diff(vals) >= 0)


def test_exp_1d_rejects():
    with pytest.raises(ValueError, match="infeasible"):
        approximate_exp_1d(1.0, 10.0, 1e-3, "step")
    with pytest.raises(ValueError):
        approximate_exp_1d(1.0, 1.0, 0.0, "step")
    with pytest.raises(ValueError):
        approximate_exp_1d(1.0, 1.0, 0.1, "tanh")


def test_unit_range_interval_arithmetic():
    K = Box((0.0, -1.0), (1.0, 2.0))
    u = ExpUnit(LogValue(1, 0.0), (2.0, -1.0), 0.5)
    assert unit_range(u, K) == (0.5 - 2.0, 0.5 + 2.0 + 1.0)


def test_lift_empty():
    res = lift_to_two_layer(ExpNetwork(2), Box.unit(2), 0.2, "step")
    assert res.network.m == 0 and res.probe_err == 0.0 and res.network.transfer == "step"


@pytest.mark.parametrize("kind", ["step", "sigmoid", "relu"])
def test_lift_constant_unit(kind):
    net = network_from_reals(2, [1.5], [[0.0, 0.0]], [0.3])
    res = lift_to_two_layer(net, Box.unit(2), 0.2, kind)
    assert res.network.m == 1
    assert res.probe_err == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["step", "sigmoid", "relu"])
def test_lift_two_units(kind):
    net = network_from_reals(2, [0.5, -0.3], [[1.0, 0.5], [-0.7, 1.2]], [0.1, 0.0])
    res = lift_to_two_layer(net, Box.unit(2), 0.2, kind)
    assert res.tol == pytest.approx(0.05)
    assert res.probe_err <= 0.1
    assert res.probe_err <= res.achieved_sum + 1e-12
    assert res.achieved_sum <= 0.1
    assert res.network.m == res.unit_count == sum(a.u for a in res.per_unit)
    assert res.unit_count <= res.hu
    dense = Box.unit(2).halton(4000, seed=9)
    assert np.max(np.abs(eval_batch(net, dense) - eval_batch(res.network, dense))) <= 0.1


def test_lift_errors():
    relu = network_from_reals(1, [1.0], [[1.0]], transfer="relu")
    with pytest.raises(ValueError, match="transfer mismatch"):
        lift_to_two_layer(relu, Box.unit(1), 0.2, "step")
    net = network_from_reals(1, [1.0, 1.0], [[0.5], [30.0]])
    with pytest.raises(ValueError, match="unit 1"):
        lift_to_two_layer(net, Box.unit(1), 0.2, "step")
