import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import G_quad, fd_directional, g_reference
from plap.grid import interval
from plap.nonlinearity import (G_floor, G_fun, ProblemSpec, TruncationData, floor_value, g_fun,
                               g_prime, hopf_cole, hopf_cole_inv, primitive, reaction,
                               reaction_prime)

P_VALUES = [1.5, 2.0, 3.0, 4.0]
MU_VALUES = [0.5, 1.0, 2.0]


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("mu", MU_VALUES)
def test_g_matches_direct_formula(p, mu):
    lo = floor_value(p, mu)
    for s in np.linspace(lo - 0.5, 3.0, 41):
        assert g_fun(s, p, mu) == pytest.approx(g_reference(s, p, mu), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("mu", MU_VALUES)
def test_G_matches_adaptive_quadrature(p, mu):
    lo = floor_value(p, mu)
    for s in np.linspace(lo * 0.999, 3.0, 13):
        assert G_fun(s, p, mu) == pytest.approx(G_quad(s, p, mu), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("mu", MU_VALUES)
def test_G_is_constant_below_floor(p, mu):
    lo = floor_value(p, mu)
    assert G_fun(lo, p, mu) == pytest.approx(G_floor(p, mu), rel=1e-10)
    assert G_fun(lo - 1.0, p, mu) == pytest.approx(G_floor(p, mu), rel=1e-10)
    assert g_fun(lo - 1.0, p, mu) == 0.0


@pytest.mark.parametrize("p", P_VALUES)
def test_g_prime_matches_finite_difference(p):
    mu = 1.0
    for s in [-0.3, 0.2, 1.7]:
        fd = fd_directional(lambda t: g_fun(float(t), p, mu), s, 1.0, h=1e-5)
        assert g_prime(s, p, mu) == pytest.approx(fd, rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(-20, 5), p=st.sampled_from(P_VALUES), mu=st.sampled_from(MU_VALUES))
def test_hopf_cole_round_trip(u, p, mu):
    # exp(a u) must stay resolvable next to 1
    assume(mu / (p - 1.0) * u > -25.0)
    v = hopf_cole(np.array([u]), p, mu)
    assert v[0] >= floor_value(p, mu)
    back = hopf_cole_inv(v, p, mu)[0]
    # rounding of v near the floor is amplified by exp(-a u)
    a = mu / (p - 1.0)
    cond = 1e-15 * (1.0 + abs(u)) * np.exp(-a * min(u, 0.0))
    assert back == pytest.approx(u, rel=1e-10, abs=cond + 1e-12)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), p=st.sampled_from(P_VALUES))
def test_hopf_cole_is_increasing(a, b, p):
    va, vb = hopf_cole(np.array([a, b]), p, 1.0)
    assert (va - vb) * (a - b) >= 0


def _reaction_args(p, mu, lam):
    return np.array([1.3]), np.array([-0.7]), np.array([-0.4]), p, mu, lam


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("lam", [-2.0, 0.0, 4.0])
def test_primitive_and_reaction_are_consistent(p, lam):
    args = _reaction_args(p, 1.0, lam)
    for s in [-1.5, -0.2, 0.3, 2.0]:
        fd = fd_directional(lambda t: primitive(np.array([t]), *args)[0], s, 1.0, h=1e-5)
        assert reaction(np.array([s]), *args)[0] == pytest.approx(fd, rel=1e-7, abs=1e-10)
        fd2 = fd_directional(lambda t: reaction(np.array([t]), *args)[0], s, 1.0, h=1e-5)
        assert reaction_prime(np.array([s]), *args)[0] == pytest.approx(fd2, rel=1e-6, abs=1e-8)


def test_reaction_is_frozen_below_truncation():
    args = _reaction_args(2.0, 1.0, 3.0)
    r1 = reaction(np.array([-0.5]), *args)
    r2 = reaction(np.array([-0.9]), *args)
    assert r1 == pytest.approx(r2)


def test_problem_spec_validation():
    g = interval(0, 1, 9)
    one = np.ones(9)
    ProblemSpec(g, 2, 1, 0, one, -one)
    for kw in (dict(p=1.0), dict(mu=0.0), dict(k=-1.0), dict(c=np.zeros(9)),
               dict(c=-one), dict(h=np.ones(8)), dict(h=np.full(9, np.inf))):
        args = dict(grid=g, p=2, mu=1, lam=0, c=one, h=-one)
        args.update(kw)
        with pytest.raises(ValueError):
            ProblemSpec(**args)


def test_hopf_cole_inverse_rejects_floor():
    with pytest.raises(ValueError):
        hopf_cole_inv(np.array([floor_value(2.0, 1.0)]), 2.0, 1.0)


def test_truncation_rejects_singular_level():
    with pytest.raises(ValueError):
        TruncationData.from_lower(np.array([0.0, -1e3, 0.0]), 2.0, 1.0)
    tr = TruncationData.from_lower(np.array([0.0, -1.0, 0.0]), 2.0, 1.0)
    assert tr.alpha[1] == pytest.approx(np.expm1(-1.0))
    assert tr.gap == pytest.approx(np.exp(-1.0))
