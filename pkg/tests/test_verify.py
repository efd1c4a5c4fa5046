import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plap.grid import Field, interval, radial
from plap.nonlinearity import ProblemSpec
from plap.solvers import solve_Plambda
from plap.verify import (FAIL, INCONCLUSIVE, PASS, PropertyReport, check_comparison,
                         check_lower_bound, check_nonuniqueness_counterexample, check_picone,
                         check_uniqueness, counterexample_residuals, default_suite, perturbed_pair,
                         random_positive_pair, random_spec, strict_sign)


def test_failing_report_needs_witness():
    with pytest.raises(ValueError):
        PropertyReport("x", FAIL, 1.0)
    with pytest.raises(ValueError):
        PropertyReport("x", "maybe", 1.0)
    rep = PropertyReport("x", FAIL, 1.0, witness={"v": np.float64(2.0)}, details={"a": np.arange(2)})
    assert json.loads(json.dumps(rep.to_json()))["witness"] == {"v": 2.0}


def test_strict_sign():
    g = interval(0, 1, 17)
    bump = Field(g, np.sin(np.pi * g.nodes))
    assert strict_sign(bump, g, 1.0)
    assert strict_sign(Field(g, -bump.values), g, -1.0)
    touching = bump.values.copy()
    touching[1] = 0.0
    assert not strict_sign(Field(g, touching), g, 1.0)
    assert strict_sign(Field(radial(1, 2, 17), 1 - radial(1, 2, 17).nodes ** 2), radial(1, 2, 17))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.sampled_from([1.5, 2.0, 3.0, 4.0]),
       kind=st.sampled_from(["interval", "radial"]))
def test_picone_identity_on_random_pairs(seed, p, kind):
    g = interval(0, 1, 129) if kind == "interval" else radial(1.0, 3, 129)
    u, v = random_positive_pair(g, np.random.default_rng(seed))
    rep = check_picone(u, v, p)
    assert rep.status == PASS
    assert rep.details["max_identity_gap"] <= 1e-10
    assert rep.details["min_L"] >= -1e-10


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_picone_equality_on_proportional_pair(p):
    g = interval(0, 1, 65)
    u, _ = random_positive_pair(g, np.random.default_rng(0))
    rep = check_picone(u, Field(g, 3.0 * u.values), p)
    assert rep.status == PASS and rep.details["equality"]


def test_picone_needs_positive_v():
    g = interval(0, 1, 33)
    u, v = random_positive_pair(g, np.random.default_rng(0))
    assert check_picone(u, Field(g, -v.values), 2.0).status == INCONCLUSIVE


def test_counterexample_residuals_shrink_quadratically():
    r = [counterexample_residuals(n)[1] for n in (128, 256, 512)]
    assert r[0] / r[1] > 3.5 and r[1] / r[2] > 3.5
    assert counterexample_residuals(128)[0] == 0.0
    rep = check_nonuniqueness_counterexample(128)
    assert rep.status == PASS
    # both fields solve it, yet the zero field lies below the other: no comparison principle
    assert rep.details["comparison"] == INCONCLUSIVE


def test_comparison_on_perturbed_pair():
    g = interval(0, 1, 129)
    spec = ProblemSpec(g, 2.0, 1.0, -1.0, np.ones(129), -np.ones(129))
    lo, up = perturbed_pair(spec, np.random.default_rng(4))
    assert check_comparison(spec, lo, up).status == PASS
    assert check_comparison(spec, up, lo).status == INCONCLUSIVE
    assert check_comparison(spec.with_(lam=1.0), lo, up).status == INCONCLUSIVE


def test_uniqueness_on_random_specs():
    rng = np.random.default_rng(11)
    for _ in range(2):
        rep = check_uniqueness(random_spec(rng, 65), seeds=range(6))
        assert rep.status == PASS, rep.details
    assert check_uniqueness(random_spec(rng, 65).with_(lam=1.0)).status == INCONCLUSIVE


def test_lower_bound_holds_for_both_solutions():
    g = interval(0, 1, 129)
    spec = ProblemSpec(g, 2.0, 1.0, 0.5 * np.pi ** 2, np.ones(129), -np.ones(129))
    sols = [r.solution for r in solve_Plambda(spec) if r.converged]
    assert len(sols) == 2
    rep = check_lower_bound(spec, sols)
    assert rep.status == PASS
    assert check_lower_bound(spec, [Field(g, -10 * rep.details["M"] * np.ones(129))]).status == FAIL


def test_default_suite_is_clean_and_reproducible():
    a = [r.to_json() for r in default_suite(0, n=65)]
    b = [r.to_json() for r in default_suite(0, n=65)]
    assert a == b
    assert all(r["status"] != FAIL for r in a)
    assert sum(r["status"] == PASS for r in a) >= len(a) - 1
