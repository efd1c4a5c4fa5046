import numpy as np
import pytest

from plap.grid import interval, radial
from plap.nonlinearity import ProblemSpec
from plap.operators import EnergyModel
from plap.solvers import (build_lower_solution, estimate_lower_bound, multistart, solution_diameter,
                          solve_Plambda, solve_source, upper_solution)
from plap.spectra import gamma1
from plap.verify import strict_sign


def _exact_log_cosh(n):
    g = interval(0, 1, n)
    spec = ProblemSpec(g, 2.0, 1.0, 0.0, np.ones(n), -np.ones(n))
    exact = np.log(np.cosh(g.nodes - 0.5) / np.cosh(0.5))
    return spec, exact


def test_closed_form_solution_second_order():
    errs = []
    for n in (65, 129, 257):
        spec, exact = _exact_log_cosh(n)
        reps = solve_Plambda(spec)
        assert reps[0].converged and reps[0].lineage.startswith("uniqueness")
        errs.append(np.max(np.abs(reps[0].solution.values - exact)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    assert errs[2] < 1e-5


@pytest.mark.parametrize("p,mu", [(1.5, 1.0), (3.0, 0.5)])
def test_coercive_case_converges_with_small_residual(p, mu):
    g = interval(0, 1, 129)
    spec = ProblemSpec(g, p, mu, -2.0, np.ones(129), np.cos(3 * g.nodes) - 1.2)
    rep = solve_Plambda(spec)[0]
    assert rep.converged
    assert rep.residual_P < 1e-6
    assert rep.residual_P <= 10 * max(rep.residual_Q, 1e-14)


def test_radial_problem_converges():
    g = radial(1.0, 2, 65)
    spec = ProblemSpec(g, 2.0, 1.0, -1.0, np.ones(65), -np.ones(65))
    rep = solve_Plambda(spec)[0]
    assert rep.converged and strict_sign(rep.solution, g, -1.0)


def test_multistart_agrees_for_nonpositive_lambda():
    g = interval(0, 1, 65)
    spec = ProblemSpec(g, 2.0, 1.0, -3.0, np.ones(65), np.sin(4 * g.nodes) - 0.5)
    reps = multistart(spec, range(6))
    assert all(r.converged for r in reps)
    assert solution_diameter(reps) < 1e-7


def test_lower_solution_is_below_solution():
    g = interval(0, 1, 129)
    spec = ProblemSpec(g, 2.0, 1.0, 3.0, np.ones(129), -np.ones(129))
    tr = build_lower_solution(spec)
    reps = [r for r in solve_Plambda(spec, trunc=tr) if r.converged]
    assert reps
    for r in reps:
        assert np.all(r.solution.values >= tr.lower - 1e-8)
    assert estimate_lower_bound(spec.with_(lam=0.0)) > 0


def test_two_solutions_for_negative_datum():
    g = interval(0, 1, 129)
    gam = gamma1(np.ones(129), 2.0, g).value
    spec = ProblemSpec(g, 2.0, 1.0, gam, np.ones(129), -np.ones(129))
    reps = [r for r in solve_Plambda(spec) if r.converged]
    assert len(reps) == 2
    assert reps[0].lineage == "box[alpha,0]"
    assert strict_sign(reps[0].solution, g, -1.0)
    assert np.max(np.abs(reps[0].solution.values - reps[1].solution.values)) > 1e-3
    assert reps[1].energy > reps[0].energy


def test_no_solution_at_first_eigenvalue_with_positive_datum():
    g = interval(0, 1, 129)
    gam = gamma1(np.ones(129), 2.0, g).value
    spec = ProblemSpec(g, 2.0, 1.0, gam, np.ones(129), np.ones(129), k=0.5)
    reps = solve_Plambda(spec)
    assert not any(r.converged for r in reps)
    assert all(r.lineage for r in reps)


def test_summary_fields():
    spec, _ = _exact_log_cosh(33)
    s = solve_Plambda(spec)[0].summary()
    assert {"status", "lineage", "energy", "sup_norm", "min_value", "residual_inf"} <= set(s)


def test_source_and_upper_solution():
    g = interval(0, 1, 65)
    spec = ProblemSpec(g, 3.0, 1.0, 2.0, np.ones(65), -np.ones(65))
    w = solve_source(spec, np.ones(65))
    assert np.all(w[1:-1] > 0)
    pos = spec.with_(h=np.ones(65), k=0.1)
    up = upper_solution(pos)
    assert up is not None
    m = EnergyModel(pos)
    assert np.all(m.residual(up)[m.ifree] >= -1e-10)
