import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swsynth import expansion as ex
from swsynth.combinatorics import multinomial_power_bound, zn_bound
from swsynth.expnet import ExpNetwork, eval_batch, eval_network
from swsynth.numerics import LogValue


def _real_terms(s):
    return {z: float(c) for z, c in s.terms.items()}


def test_pow_constant():
    assert _real_terms(ex.pow_expand(ex.constant(2, 0.7), 9)) == {(0, 0): 1.0}


def test_pow_hand_example():
    base = ex.from_terms(1, 1.0, {-1: 1.0, 1: 1.0})
    got = _real_terms(ex.pow_expand(base, 2))
    assert got.keys() == {(-2,), (0,), (2,)}
    assert got[(0,)] == pytest.approx(2.0) and got[(2,)] == pytest.approx(1.0)


def test_pow_rejects_bad_exponent():
    with pytest.raises(ValueError):
        ex.pow_expand(ex.constant(1, 1.0), 0)


def test_pow_guard():
    base = ex.from_terms(3, 1.0, {(1, 0, 0): 1.0, (0, -1, 0): 1.0, (0, 0, 1): 1.0})
    with pytest.raises(ValueError, match="infeasible"):
        ex.pow_expand(base, 200, max_terms=10**4)


def test_affine_examples():
    assert len(ex.affine_combine(-1.0, ex.constant(1, 1.0), 1.0)) == 0
    empty = ex.affine_combine(0.0, ex.constant(1, 1.0), 0.0)
    assert _real_terms(ex.affine_combine(1.0, empty, 1.0)) == {(0,): 1.0}
    got = _real_terms(ex.affine_combine(-1.0, ex.from_terms(1, 1.0, {1: 2.5}), 1.0))
    assert got == {(0,): 1.0, (1,): -2.5}


def test_scale_mismatch():
    with pytest.raises(ValueError):
        ex.multiply(ex.constant(1, 1.0), ex.constant(1, 2.0))
    with pytest.raises(ValueError):
        ex.add(ex.constant(1, 1.0), ex.constant(2, 1.0))


def test_to_network_examples():
    empty = ex.affine_combine(-1.0, ex.constant(1, 1.0), 1.0)
    net = ex.to_network(empty)
    assert net.m == 0 and eval_network(net, [0.3]) == 0.0
    net = ex.to_network(ex.constant(2, 0.5, 5.0))
    assert net.m == 1 and eval_network(net, [1.0, -2.0]) == pytest.approx(5.0)
    s = ex.from_terms(1, 0.5, {-1: 1.5, 0: -0.25, 3: 0.75})
    net = ex.to_network(s)
    assert net.m == 3
    xs = np.linspace(-2, 2, 100)
    for x, v in zip(xs, eval_batch(net, xs[:, None])):
        ref = 1.5 * math.exp(-0.5 * x) - 0.25 + 0.75 * math.exp(1.5 * x)
        assert v == pytest.approx(ref, rel=1e-12)
        assert float(ex.evaluate(s, [x])) == pytest.approx(ref, rel=1e-12)


def test_keys_lexicographic():
    s = ex.from_terms(2, 1.0, {(1, 0): 1.0, (-1, 2): 1.0, (-1, -2): 1.0, (0, 0): 1.0})
    assert [tuple(k) for k in s.keys] == sorted(s.support)


def test_cancellation_flag_propagates():
    a = ex.from_terms(1, 1.0, {0: 1.0, 1: 1.0})
    b = ex.from_terms(1, 1.0, {0: 1.0, -1: -(1.0 - 1e-14)})
    prod = ex.multiply(a, b)
    assert prod.n_flagged >= 1


def _brute_support(base_keys, e):
    return {tuple(map(sum, zip(*combo))) for combo in itertools.product(base_keys, repeat=e)}


@pytest.mark.parametrize("d,e", [(d, e) for d in (1, 2) for e in range(1, 7)])
def test_support_matches_brute_force(d, e):
    keys = [tuple(0 for _ in range(d))]
    for i in range(d):
        for sgn in (1, -1):
            z = [0] * d
            z[i] = sgn
            keys.append(tuple(z))
    rng = np.random.default_rng(d * 10 + e)
    base = ex.from_terms(d, 0.3, {z: float(rng.uniform(0.5, 2.0)) for z in keys})
    got = ex.pow_expand(base, e)
    assert got.support == _brute_support(keys, e)
    assert got.max_l1 <= e
    assert len(got) < zn_bound(e, d)
    assert math.log(len(got)) < multinomial_power_bound(e, d)[0].log_abs


coeffs = st.floats(min_value=0.1, max_value=3.0)


@given(st.lists(coeffs, min_size=3, max_size=3), st.integers(1, 4), st.integers(1, 4))
def test_power_additivity(cs, e1, e2):
    base = ex.from_terms(1, 0.4, {-1: cs[0], 0: cs[1], 1: cs[2]})
    whole = ex.pow_expand(base, e1 + e2)
    parts = ex.multiply(ex.pow_expand(base, e1), ex.pow_expand(base, e2))
    for x in np.linspace(-2, 2, 25):
        a, b = float(ex.evaluate(whole, [x])), float(ex.evaluate(parts, [x]))
        assert a == pytest.approx(b, rel=1e-9)


@given(st.lists(st.floats(min_value=-2.0, max_value=2.0).filter(lambda c: abs(c) > 1e-2), min_size=5, max_size=5), st.integers(1, 5))
def test_pow_matches_direct_evaluation(cs, e):
    keys = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
    base = ex.from_terms(2, 0.5, dict(zip(keys, cs)))
    p = ex.pow_expand(base, e)
    net = ex.to_network(p)
    pts = np.random.default_rng(e).uniform(-1, 1, (20, 2))
    direct = np.array([sum(c * math.exp(0.5 * (z[0] * x + z[1] * y)) for z, c in zip(keys, cs)) for x, y in pts]) ** e
    absolute = np.array([sum(abs(c) * math.exp(0.5 * (z[0] * x + z[1] * y)) for z, c in zip(keys, cs)) for x, y in pts]) ** e
    got = eval_batch(net, pts)
    assert np.all(np.abs(got - direct) <= 1e-9 * absolute)


def test_add_and_evaluate_batch():
    a = ex.from_terms(1, 1.0, {0: 1.0, 1: 2.0})
    b = ex.from_terms(1, 1.0, {1: -2.0, 2: 3.0})
    s = ex.add(a, b)
    assert _real_terms(s) == pytest.approx({(0,): 1.0, (2,): 3.0})
    vals, flags = ex.evaluate_batch(s, [[0.0], [1.0]])
    assert vals[0] == pytest.approx(4.0) and vals[1] == pytest.approx(1 + 3 * math.e**2)
    assert not flags.any()
