import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import gamma1_closed_form, gamma1_shooting
from plap.grid import interval, radial
from plap.nonlinearity import ProblemSpec
from plap.spectra import gamma1, k0, k0_bisection, m_p, m_p_lambda_pm, sufficient_condition


def test_gamma1_p2_equals_discrete_laplacian_eigenvalue():
    n = 129
    g = interval(0, 1, n)
    dx = 1.0 / (n - 1)
    exact = 4.0 / dx ** 2 * np.sin(np.pi * dx / 2) ** 2
    rep = gamma1(np.ones(n), 2.0, g)
    assert rep.value == pytest.approx(exact, rel=1e-9)
    # eigenfunction is positive inside and normalised
    w = rep.minimizer.values
    assert np.all(w[1:-1] > 0)


def test_shooting_oracle_matches_closed_form():
    for p in (1.5, 2.0, 3.0, 4.0):
        assert gamma1_shooting(p) == pytest.approx(gamma1_closed_form(p), rel=1e-9)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_gamma1_converges_to_shooting_value(p):
    ref = gamma1_shooting(p)
    errs = [abs(gamma1(np.ones(n), p, interval(0, 1, n)).value / ref - 1) for n in (65, 257)]
    assert errs[1] < 5e-3
    assert errs[1] < errs[0]


def test_gamma1_on_ball_is_pi_squared_for_three_dimensions():
    # first Dirichlet eigenvalue of the unit ball in R^3 is pi^2
    rep = gamma1(np.ones(257), 2.0, radial(1.0, 3, 257))
    assert rep.value == pytest.approx(np.pi ** 2, rel=1e-4)


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.1, 10), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_gamma1_is_homogeneous_in_weight(t, p):
    g = interval(0, 1, 33)
    c = 1 + 0.5 * np.sin(5 * g.nodes)
    a = gamma1(c, p, g, restarts=4).value
    b = gamma1(t * c, p, g, restarts=4).value
    assert b == pytest.approx(a / t, rel=1e-8)


def test_gamma1_decreases_with_weight():
    g = interval(0, 1, 65)
    c = np.ones(g.n)
    assert gamma1(c, 2.0, g).value > gamma1(c + np.exp(-20 * (g.nodes - 0.5) ** 2), 2.0, g).value


def test_gamma1_rejects_bad_weight():
    g = interval(0, 1, 17)
    with pytest.raises(ValueError):
        gamma1(np.zeros(17), 2.0, g)


def test_m_p_for_constant_datum_is_affine():
    g = interval(0, 1, 129)
    gam = gamma1(np.ones(129), 2.0, g).value
    for kappa in (1.0, 5.0, 20.0):
        assert m_p(np.full(129, kappa), 2.0, 1.0, g).value == pytest.approx(1 - kappa / gam, rel=1e-9)


def test_m_p_nonpositive_datum_is_one():
    g = interval(0, 1, 33)
    rep = m_p(-np.ones(33), 3.0, 1.0, g)
    assert rep.value == 1.0 and rep.status == "not_attained"


@pytest.mark.parametrize("p,mu", [(2.0, 1.0), (3.0, 0.5), (1.5, 2.0)])
def test_k0_closed_form_agrees_with_bisection(p, mu):
    g = interval(0, 1, 65)
    h = 0.5 + np.sin(3 * g.nodes)
    a = k0(h, p, mu, g).value
    b = k0_bisection(h, p, mu, g, rel=1e-9)
    assert a == pytest.approx(b, rel=1e-6)
    assert m_p(0.99 * a * h, p, mu, g).value > 0 > m_p(1.01 * a * h, p, mu, g).value


def test_k0_infinite_without_positive_part():
    g = interval(0, 1, 17)
    assert k0(-np.ones(17), 2.0, 1.0, g).is_infinite


def test_m_p_lambda_pm_restricts_to_vanishing_weight():
    g = interval(0, 1, 65)
    c = np.where(g.nodes < 0.5, 1.0, 0.0)
    spec = ProblemSpec(g, 2.0, 1.0, 1.0, c, np.ones(65))
    plus, minus = m_p_lambda_pm(spec)
    assert plus.constraint_active is not None
    # on the right half only: gamma1 of an interval of length 1/2 is 4 pi^2
    assert plus.value == pytest.approx(1 - 1 / (4 * np.pi ** 2), rel=2e-3)
    assert minus.value == 1.0


def test_sufficient_condition_reports_case():
    g = interval(0, 1, 65)
    out = sufficient_condition(np.ones(65), 2.0, 1.0, g)
    assert out["case"] in ("i", "ii", "iii")
    assert set(out) >= {"lhs", "rhs", "holds", "margin"}
