import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from swsynth.combinatorics import l1_count_brute, multinomial_power_bound
from swsynth.cube import (
    Box,
    HyperCube,
    check_membership_inequalities,
    constant_network,
    eval_g,
    eval_g_checked,
    eval_p,
    expand_indicator,
    expand_indicator_symbolic,
    inside_samples,
    lemma1_unit_bound,
    log_g_batch,
    make_spec,
    membership_sum,
    outside_samples,
)
from swsynth.expnet import eval_batch, eval_network
from swsynth.numerics import LogValue

R2 = math.sqrt(2)


@pytest.fixture
def example_spec():
    return make_spec(HyperCube((0.0, 0.0), 0.5), 2.0, 0.1, 2 * R2)


def test_geometry():
    c = HyperCube((0.0, 1.0), 0.5)
    assert c.contains([0.5, 1.5]) and not c.contains([0.51, 1.0])
    assert len(c.corners()) == 4 and len(c.face_midpoints()) == 4
    b = Box((0.0, 0.0), (1.0, 2.0))
    assert b.diameter == pytest.approx(math.sqrt(5))
    assert b.intersects_cube(HyperCube((1.2, 1.0), 0.3)) and not b.intersects_cube(HyperCube((1.4, 1.0), 0.3))
    assert b.inside_cube(HyperCube((0.5, 1.0), 1.0))
    with pytest.raises(ValueError):
        HyperCube((0.0,), 0.0)
    with pytest.raises(ValueError):
        Box((0.0,), (-1.0,))


def test_spec_example_values(example_spec):
    sp = example_spec
    assert sp.s == pytest.approx(math.log(8) / 0.5, rel=1e-15)
    ref_gamma = mpmath.power(8, -4 * mpmath.sqrt(2)) / mpmath.sqrt(2)
    assert float(sp.gamma) == pytest.approx(float(ref_gamma), rel=1e-13)
    assert sp.n == 4
    assert sp.k_int == math.floor(2 * 8 ** (4 * R2)) + 1
    assert sp.alpha.log_abs == pytest.approx(sp.gamma.log_abs - math.log(2))


def test_spec_rejects():
    cube = HyperCube((0.0,), 0.5)
    for args in ((1.0, 0.1, 1.0), (2.0, 0.0, 1.0), (2.0, 0.1, 0.0)):
        with pytest.raises(ValueError):
            make_spec(cube, *args)
    with pytest.raises(ValueError):
        make_spec(cube, 2.0, 0.1, 1.0, domain=Box((5.0,), (6.0,)))


def test_k_floor_skipped_when_huge():
    sp = make_spec(HyperCube((0.0, 0.0), 0.01), 2.0, 0.1, R2)
    assert sp.floor_skipped and sp.k_int is None
    assert sp.log_k == pytest.approx(0.5 * math.log(4) + R2 / 0.01 * math.log(8), rel=1e-15)


def test_eval_p_at_center(example_spec):
    lp = eval_p(example_spec, [0.0, 0.0])
    assert lp.sign == 1
    assert lp.log_abs == pytest.approx(-example_spec.s * (0.75 + 2 * R2), rel=1e-14)
    assert math.exp(lp.log_abs) == pytest.approx(3.4e-7, rel=0.02)


def test_eval_p_grows_along_axes(example_spec):
    vals = [eval_p(example_spec, [t, 0.0]).log_abs for t in (0.0, 1.0, 5.0, 50.0, 500.0)]
    assert vals == sorted(vals) and vals[-1] > 100


def test_eval_g_at_center_matches_oracle(example_spec):
    sp = example_spec
    lp = eval_p(sp, [0.0, 0.0]).log_abs
    ref = mpmath.exp(oracles.log_g(lp, sp.n, math.log(sp.k_int)))
    assert eval_g(sp, [0.0, 0.0]) == pytest.approx(float(ref), rel=1e-12)


def test_eval_g_far_outside_is_flagged_zero(example_spec):
    g, flag = eval_g_checked(example_spec, [100.0, 0.0])
    assert g == 0.0 and flag
    g, flag = eval_g_checked(example_spec, [0.0, 0.0])
    assert 0 < g < 1 and not flag
    with pytest.raises(ValueError):
        eval_g(example_spec, [0.0])


def test_batch_matches_scalar(example_spec):
    pts = np.random.default_rng(0).uniform(-2, 2, (50, 2))
    batch = np.exp(log_g_batch(example_spec, pts)[0])
    for p, v in zip(pts, batch):
        assert v == pytest.approx(eval_g(example_spec, p), rel=1e-12, abs=1e-300)


def test_membership_examples(example_spec):
    sp = example_spec
    assert membership_sum(sp, [[0.0, 0.0]])[0] == pytest.approx(4 * 8**-1.5, rel=1e-14)
    assert membership_sum(sp, [[2 * 0.5 * 2.0, 0.0]])[0] > 2 * R2
    corners = sp.cube.corners()
    assert np.all(membership_sum(sp, corners) <= R2 * (1 + 1e-12))
    # at a corner each coordinate contributes 8**-2.5 + 8**-0.5
    assert membership_sum(sp, corners).max() == pytest.approx(2 * (8**-2.5 + 8**-0.5), rel=1e-14)


def test_membership_rejects_misplaced(example_spec):
    with pytest.raises(ValueError):
        check_membership_inequalities(example_spec, [[0.6, 0.0]], [])
    with pytest.raises(ValueError):
        check_membership_inequalities(example_spec, [], [[0.9, 0.0]])


@given(
    st.integers(1, 3),
    st.floats(0.05, 0.3),
    st.floats(1.2, 3.0),
    st.integers(0, 2**16),
)
def test_membership_random_specs(d, r, omega, seed):
    rng = np.random.default_rng(seed)
    K = Box((0.0,) * d, (1.0,) * d)
    sp = make_spec(HyperCube(tuple(rng.uniform(0, 1, d)), r), omega, 0.1, K.diameter)
    rep = check_membership_inequalities(sp, inside_samples(sp, 300, seed), outside_samples(sp, K, 300, seed))
    assert rep.total_violations == 0


def test_p_positive_and_below_one_on_K():
    K = Box.unit(2)
    sp = make_spec(HyperCube((0.3, 0.6), 0.15), 2.0, 0.1, K.diameter, domain=K)
    pts = K.halton(2000, seed=4)
    for y in pts[:300]:
        lp = eval_p(sp, y)
        assert lp.sign == 1 and lp.log_abs < 0


def test_g_monotone_in_p():
    n, log_k = 4, math.log(40)
    from swsynth.numerics import stable_one_minus_pn_pow_kn

    ps = np.linspace(1e-3, 0.999, 200)
    gs = [stable_one_minus_pn_pow_kn(LogValue(1, math.log(p)), n, log_k) for p in ps]
    assert all(a > b for a, b in zip(gs, gs[1:]))


def test_lemma1_claims_measured():
    # regression pins: the claims are recorded, not asserted as theorems
    K = Box.unit(2)
    sp = make_spec(HyperCube((0.5, 0.5), 0.2), 2.0, 0.1, R2, domain=K)
    ins = K.clip(inside_samples(sp, 10**4))
    outs = outside_samples(sp, K, 10**4)
    g_in = float(np.exp(log_g_batch(sp, ins)[0]).min())
    g_out = float(np.exp(log_g_batch(sp, outs)[0]).max())
    assert g_in == pytest.approx(0.9835127290890271, rel=1e-9)
    assert g_out == pytest.approx(0.010136421713896069, rel=1e-9)
    assert g_in > 1 - sp.eps and g_out < sp.eps


def test_lemma1_bound_examples():
    b = lemma1_unit_bound(2, 0.5, R2, 2.0, 0.5)
    assert float(b) == pytest.approx(float(oracles.lemma1_bound(2, 0.5, R2, 2, 0.5)), rel=1e-12)
    assert float(b) == pytest.approx(3.98e19, rel=1e-2)
    b = lemma1_unit_bound(2, 2 - 1e-12, R2, 2.0, 0.5)
    assert float(b) == pytest.approx((2 * math.e) ** 2, rel=1e-9)
    b = lemma1_unit_bound(1, 0.5, 1.0, 2.0, 1.0)
    assert float(b) == pytest.approx(2 * math.e * (4**4 + 1), rel=1e-12)


def test_degenerate_spec_is_constant():
    K = Box.unit(2)
    sp = make_spec(HyperCube((0.5, 0.5), 0.5), 2.0, 0.2, K.diameter, domain=K)
    assert sp.degenerate
    assert eval_g(sp, [0.1, 0.9]) == pytest.approx(0.9)
    net = expand_indicator(sp)
    assert net.m == 1 and "degenerate" in net.flags
    assert eval_network(net, [0.3, 0.3]) == pytest.approx(0.9)
    assert eval_network(constant_network(2, 0.9), [0.0, 0.0]) == pytest.approx(0.9)


def test_expand_d1_five_units():
    sp = make_spec(HyperCube((0.2,), 0.25), 2.0, 0.4, 1.0, k_override=2, n_override=1)
    s = expand_indicator_symbolic(sp)
    assert sorted(k[0] for k in s.support) == [-2, -1, 0, 1, 2]
    net = expand_indicator(sp)
    assert net.m == 5 and "k-override" in net.flags and "n-override" in net.flags
    pts = np.linspace(-0.5, 1.5, 100)[:, None]
    for p, v in zip(pts, eval_batch(net, pts)):
        assert v == pytest.approx(eval_g(sp, p), rel=1e-9)


def test_expand_d2_at_most_13():
    sp = make_spec(HyperCube((0.0, 0.0), 0.25), 2.0, 0.4, R2, k_override=2, n_override=1)
    assert expand_indicator(sp).m <= l1_count_brute(2, 2) == 13


def test_expand_guard():
    sp = make_spec(HyperCube((0.0, 0.0), 0.25), 2.0, 0.1, R2)
    with pytest.raises(ValueError, match="infeasible"):
        expand_indicator(sp)
    sp = make_spec(HyperCube((0.0, 0.0), 0.25), 2.0, 0.1, R2, k_override=30, n_override=4)
    with pytest.raises(ValueError, match="infeasible"):
        expand_indicator(sp)


@pytest.mark.parametrize("d,n,k", [(1, 1, 2), (1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 2, 2), (2, 1, 5)])
def test_expand_count_below_lemma_bound(d, n, k):
    sp = make_spec(HyperCube((0.1,) * d, 0.3), 2.0, 0.3, math.sqrt(d), k_override=k, n_override=n)
    count = expand_indicator(sp).m
    tight, loose = multinomial_power_bound(n * k**n, d)
    assert math.log(count) < loose.log_abs
    assert count <= l1_count_brute(n * k**n, d)
