import numpy as np
import pytest

from oracles import fold_lambda_shooting
from plap.continuation import (detect_fold, nonexistence_evidence, refine_spec, region_diagram,
                               scalar_fold_toy, solvable, trace_k, trace_lambda)
from plap.grid import interval
from plap.nonlinearity import ProblemSpec
from plap.spectra import gamma1


def _spec(h, n=129, p=2.0):
    g = interval(0, 1, n)
    return ProblemSpec(g, p, 1.0, 0.0, np.ones(n), np.full(n, float(h)))


def test_scalar_fold_toy_turns_at_zero():
    lams, xs, fold = scalar_fold_toy()
    assert fold is not None
    assert abs(lams[fold]) < 0.05
    assert xs[-1] < 0 < xs[0]
    np.testing.assert_allclose(xs ** 2, lams, atol=1e-10)


@pytest.fixture(scope="module")
def positive_branch():
    spec = _spec(1.0).with_(k=0.1 * np.pi ** 2)
    gam = gamma1(spec.c, 2.0, spec.grid).value
    br = trace_lambda(spec, (0.0, gam), step=gam / 100)
    return spec, gam, br


def test_fold_matches_shooting_oracle(positive_branch):
    spec, gam, br = positive_branch
    fold = detect_fold(br, spec, width=1e-3 * gam)
    assert fold is not None
    lo, hi = fold[1]
    assert hi - lo <= 1e-3 * gam
    ref = fold_lambda_shooting(0.1 * np.pi ** 2)
    assert fold[0] == pytest.approx(ref, rel=2e-3)


def test_branch_turns_back_after_fold(positive_branch):
    _, _, br = positive_branch
    ps = br.params
    i = int(np.argmax(ps))
    assert 0 < i < len(ps) - 1
    assert any(q.fold_flag for q in br.points)
    sup = [q.sup_norm for q in br.points]
    assert sup[-1] > sup[i] > sup[0]
    for q in br.points:
        assert q.residual < 1e-6


def test_no_solution_past_fold(positive_branch):
    spec, gam, br = positive_branch
    lo, hi = detect_fold(br, spec, width=1e-3 * gam)[1]
    assert nonexistence_evidence(spec.with_(lam=hi + 0.01 * gam))


def test_negative_datum_branch_has_no_fold():
    spec = _spec(-1.0, n=65)
    gam = gamma1(spec.c, 2.0, spec.grid).value
    br = trace_lambda(spec, (0.0, 1.5 * gam), step=gam / 20)
    assert br.params[-1] >= 1.5 * gam - 1e-9
    assert np.all(np.diff(br.params) > 0)
    assert detect_fold(br) is None


def test_k_branch_from_zero():
    spec = _spec(1.0, n=65).with_(lam=2.0)
    br = trace_k(spec, (0.0, 3.0), 0.25)
    assert br.params[0] == 0.0 and br.points[0].sup_norm == 0.0
    assert br.params[-1] >= 3.0 - 1e-9
    sup = [q.sup_norm for q in br.points]
    assert np.all(np.diff(sup) > 0)


def test_solvable_reports_certificate():
    ok, rep = solvable(_spec(-1.0, n=65).with_(lam=1.0))
    assert ok and rep.converged


def test_refine_spec_keeps_data():
    spec = _spec(1.0, n=33)
    fine = refine_spec(spec, 4)
    assert fine.grid.n == 129
    assert fine.grid.nodes[-1] == spec.grid.nodes[-1]
    np.testing.assert_allclose(fine.h, 1.0)


def test_small_region_diagram():
    spec = _spec(1.0, n=65)
    gam = gamma1(spec.c, 2.0, spec.grid).value
    diag = region_diagram(spec, [0.3 * gam, 0.7 * gam, 1.3 * gam, 1.7 * gam])
    assert all(v is not None for v in diag.kbar.values())
    assert all(diag.ktilde2[l] is not None for l in diag.ktilde2)
    assert all(diag.monotonicity())
