"""Executable property checks: comparison, Picone, the p = 4 counterexample,
lower bounds and multistart uniqueness."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, interval, radial, values_of
from .nonlinearity import ProblemSpec
from .operators import (GeneralQuasilinearProblem, nodal_slope, residual_P,
                        residual_general)
from .solvers import (InfeasibleError, build_lower_solution, estimate_lower_bound,
                      multistart, solution_diameter, solve_Plambda)

log = logging.getLogger("plap")

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class PropertyReport:
    id: str
    status: str
    tolerance: float
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == FAIL and not self.witness:
            raise ValueError("a failing report needs a witness")

    @property
    def passed(self):
        return self.status == PASS

    def to_json(self):
        def clean(d):
            out = {}
            for k, v in d.items():
                if isinstance(v, np.ndarray):
                    v = v.tolist()
                elif isinstance(v, (np.floating, np.integer)):
                    v = v.item()
                elif isinstance(v, float) and not np.isfinite(v):
                    v = str(v)
                out[k] = v
            return out

        return {"id": self.id, "status": self.status, "tolerance": self.tolerance,
                "witness": clean(self.witness), "details": clean(self.details)}


# -- discrete strict sign ----------------------------------------------------

def strict_sign(u, grid, sign=1.0, tol=0.0):
    """u >> 0 (sign=+1) or u << 0 (sign=-1) in the discrete sense.

    Every interior node has the given strict sign and the boundary slope
    points strictly inward (outward for sign=-1)."""
    uv = sign * np.asarray(values_of(u), dtype=float)
    inner = grid.free.copy()
    if not np.all(uv[inner] > tol):
        return False
    sl = nodal_slope(uv, grid)
    ok = sl[-1] < 0
    if grid.kind == "interval":
        ok = ok and sl[0] > 0
    return bool(ok)


# -- comparison ----------------------------------------------------------------

def check_comparison(spec, u1, u2, tol=1e-8, sign_tol=1e-8, problem=None, p=None):
    """u1 <= u2 + tol for a verified lower/upper pair when lam <= 0.

    With problem (a GeneralQuasilinearProblem) the check only applies when
    its declared gradient growth matches the operator exponent; otherwise
    the hypotheses are not met and the result is inconclusive.
    """
    pid = "comparison"
    if problem is not None:
        exp = problem.gradient_exponent
        pp = p if p is not None else (spec.p if spec is not None else None)
        if exp is None or pp is None or exp != pp:
            return PropertyReport(pid, INCONCLUSIVE, tol, details={
                "reason": "gradient growth differs from the operator exponent",
                "gradient_exponent": exp, "p": pp})
        r1 = residual_general(u1, problem, pp).values
        r2 = residual_general(u2, problem, pp).values
        sign1, sign2 = -r1, -r2
    else:
        if spec.lam > 0:
            return PropertyReport(pid, INCONCLUSIVE, tol,
                                  details={"reason": "lam > 0 lies outside the comparison regime"})
        sign1 = residual_P(values_of(u1), spec)
        sign2 = residual_P(values_of(u2), spec)
    free = (spec.grid if spec is not None else u1.grid).free
    if np.max(sign1[free]) > sign_tol or np.min(sign2[free]) < -sign_tol:
        return PropertyReport(pid, INCONCLUSIVE, tol, details={
            "reason": "residual signs do not certify a lower/upper pair",
            "lower_residual_max": float(np.max(sign1[free])),
            "upper_residual_min": float(np.min(sign2[free]))})
    gap = values_of(u1) - values_of(u2)
    j = int(np.argmax(gap))
    if gap[j] <= tol:
        return PropertyReport(pid, PASS, tol, details={"max_gap": float(gap[j])})
    return PropertyReport(pid, FAIL, tol, witness={
        "node": j, "u1": float(values_of(u1)[j]), "u2": float(values_of(u2)[j]),
        "gap": float(gap[j])})


def perturbed_pair(spec, rng, size=0.5, tol=1e-11):
    """Solutions with the datum lowered and raised by random bumps.

    The first is a lower and the second an upper solution of spec."""
    x = spec.grid.nodes - spec.grid.nodes[0]
    L = x[-1]

    def bump():
        ctr = rng.uniform(0, L)
        wid = rng.uniform(0.1, 0.5) * L
        return size * (0.2 + np.exp(-((x - ctr) / wid) ** 2))

    out = []
    for sgn in (-1.0, 1.0):
        if spec.k > 0:
            s = spec.with_(h=spec.h + sgn * bump() / spec.k)
        else:
            s = spec.with_(h=sgn * bump(), k=1.0)
        reps = [r for r in solve_Plambda(s, tol=tol) if r.converged]
        if not reps:
            return None
        out.append(reps[0].solution)
    return tuple(out)


# -- Picone ---------------------------------------------------------------------

def _picone_terms(u, v, grid, p, step=1e-30):
    """Cellwise L and R at midpoints of cells where v > 0 at the midpoint.

    R uses a complex-step derivative of u^p / v^(p-1) along the cell."""
    uv, vv = values_of(u).astype(float), values_of(v).astype(float)
    dx = grid.dx
    su = np.diff(uv) / dx
    sv = np.diff(vv) / dx
    um = 0.5 * (uv[:-1] + uv[1:])
    vm = 0.5 * (vv[:-1] + vv[1:])
    ok = vm > 0
    um, vm, su, sv = um[ok], vm[ok], su[ok], sv[ok]
    q = um / vm
    L = (np.abs(su) ** p + (p - 1) * q ** p * np.abs(sv) ** p
         - p * q ** (p - 1) * np.abs(sv) ** (p - 2) * sv * su)
    zu = um + 1j * step * su
    zv = vm + 1j * step * sv
    dquot = np.imag(zu ** p / zv ** (p - 1)) / step
    R = np.abs(su) ** p - dquot * np.abs(sv) ** (p - 2) * sv
    w = grid.weights[ok]
    return L, R, w, ok


def check_picone(u, v, p, tol=1e-10, grid=None):
    grid = grid if grid is not None else u.grid
    pid = "picone"
    uv, vv = values_of(u), values_of(v)
    free = grid.free
    if np.any(uv < 0) or np.any(vv[free] <= 0):
        return PropertyReport(pid, INCONCLUSIVE, tol,
                              details={"reason": "requires u >= 0 and v > 0 inside"})
    L, R, w, _ = _picone_terms(u, v, grid, p)
    scale = np.maximum(1.0, np.abs(L))
    diff = np.abs(L - R) / scale
    j = int(np.argmax(diff))
    l1 = float(np.sum(w * np.abs(L)))
    kfit = float(np.dot(uv, vv) / np.dot(vv, vv))
    prop_err = float(np.max(np.abs(uv - kfit * vv)))
    details = {"max_identity_gap": float(diff[j]), "min_L": float(L.min()),
               "L1": l1, "equality": l1 <= tol, "fitted_k": kfit,
               "proportional_error": prop_err}
    if diff[j] > tol:
        return PropertyReport(pid, FAIL, tol, witness={"cell": j, "L": float(L[j]),
                                                      "R": float(R[j])}, details=details)
    jm = int(np.argmin(L))
    if L[jm] < -tol * max(1.0, float(np.max(np.abs(L)))):
        return PropertyReport(pid, FAIL, tol, witness={"cell": jm, "L": float(L[jm])},
                              details=details)
    if l1 <= tol and prop_err > 1e-6 * max(1.0, float(np.max(np.abs(uv)))):
        return PropertyReport(pid, FAIL, tol, witness={"L1": l1, "proportional_error": prop_err},
                              details=details)
    return PropertyReport(pid, PASS, tol, details=details)


def random_positive_pair(grid, rng, modes=5):
    """Two independent fields, zero on the Dirichlet boundary, v > 0 inside."""
    x = grid.nodes
    if grid.kind == "interval":
        t = (x - grid.a) / (grid.b - grid.a)
        base = np.sin(np.pi * t)
        extra = [np.sin(j * np.pi * t) for j in range(2, modes + 2)]
    else:
        t = x / grid.b
        base = np.cos(0.5 * np.pi * t)
        extra = [np.cos((j - 0.5) * np.pi * t) for j in range(2, modes + 2)]

    def one():
        coef = rng.normal(size=len(extra)) * 0.3 / np.arange(1, len(extra) + 1)
        f = base * (1.0 + 0.3 * np.tanh(sum(c * e for c, e in zip(coef, extra))))
        f[~grid.free] = 0.0
        return Field(grid, np.abs(f) * rng.uniform(0.5, 2.0))

    return one(), one()


# -- counterexample to comparison ------------------------------------------------

def counterexample_problem(grid):
    """-Delta_4 u - |grad u|^2 = 0: gradient growth 2, operator exponent 4."""
    return GeneralQuasilinearProblem(lambda x, s, xi: -np.abs(xi) ** 2,
                                     np.zeros(grid.n), gradient_exponent=2.0)


def counterexample_residuals(n, R=1.0, N=2):
    g = radial(R, N, n + 1)
    prob = counterexample_problem(g)
    u0 = Field(g, np.zeros(g.n))
    u2 = Field(g, (R * R - g.nodes ** 2) / 8.0)
    r0 = float(np.max(np.abs(residual_general(u0, prob, 4.0).values)))
    r2 = float(np.max(np.abs(residual_general(u2, prob, 4.0).values)))
    return r0, r2, u2


def check_nonuniqueness_counterexample(n=128, R=1.0, levels=4, min_ratio=1.8, cap=0.5):
    """Both 0 and (R^2 - r^2)/8 solve the mismatched-growth problem.

    Residuals of the second field are measured at n, 2n, ... cells; the
    check passes when the first is below cap, each doubling reduces it by
    at least min_ratio, the zero field has residual exactly 0, and the two
    fields differ."""
    pid = "nonuniqueness_counterexample"
    sizes = [n * 2 ** j for j in range(levels)]
    res, zero = [], []
    u2 = None
    for m in sizes:
        r0, r2, u2 = counterexample_residuals(m, R)
        res.append(r2)
        zero.append(r0)
    ratios = [a / b if b > 0 else np.inf for a, b in zip(res, res[1:])]
    centre = float(u2.values[0])
    details = {"cells": sizes, "residuals": res, "ratios": ratios,
               "zero_residuals": zero, "centre_value": centre,
               "comparison": check_comparison(None, Field(u2.grid, np.zeros(u2.grid.n)), u2,
                                              problem=counterexample_problem(u2.grid),
                                              p=4.0).status}
    bad = []
    if res[0] > cap:
        bad.append(("first_residual", res[0]))
    if any(r < min_ratio for r in ratios):
        bad.append(("ratio", min(ratios)))
    if any(z != 0.0 for z in zero):
        bad.append(("zero_residual", max(zero)))
    if centre <= 0:
        bad.append(("centre", centre))
    if bad:
        return PropertyReport(pid, FAIL, cap, witness=dict(bad), details=details)
    return PropertyReport(pid, PASS, cap, details=details)


# -- lower bound ------------------------------------------------------------------

def lower_bound_value(spec):
    """Surrogate M with min u > -M for all solutions, and its source."""
    try:
        return estimate_lower_bound(spec), "fixed_point"
    except InfeasibleError:
        tr = build_lower_solution(spec)
        return float(-np.min(tr.lower)), "lower_solution"


def check_lower_bound(spec, solutions, tol=1e-8):
    pid = "lower_bound"
    if spec.lam < 0:
        return PropertyReport(pid, INCONCLUSIVE, tol, details={"reason": "requires lam >= 0"})
    try:
        M, how = lower_bound_value(spec)
    except InfeasibleError as exc:
        return PropertyReport(pid, INCONCLUSIVE, tol, details={"reason": str(exc)})
    hp = np.maximum(spec.h, 0.0)
    doubled = spec.with_(h=spec.h + hp)
    try:
        M2, _ = lower_bound_value(doubled)
    except InfeasibleError:
        M2 = float("nan")
    mins = [float(np.min(values_of(u))) for u in solutions]
    details = {"M": M, "source": how, "M_doubled_positive_part": M2, "minima": mins}
    for i, m in enumerate(mins):
        if not m > -M - tol:
            return PropertyReport(pid, FAIL, tol, witness={"solution": i, "min": m, "M": M},
                                  details=details)
    if how == "fixed_point" and not abs(M2 - M) <= 1e-9 * max(1.0, M):
        return PropertyReport(pid, FAIL, tol, witness={"M": M, "M_doubled": M2},
                              details=details)
    return PropertyReport(pid, PASS, tol, details=details)


# -- uniqueness ----------------------------------------------------------------------

def check_uniqueness(spec, seeds=range(20), tol=1e-6, threads=1):
    pid = "uniqueness"
    if spec.lam > 0:
        return PropertyReport(pid, INCONCLUSIVE, tol, details={"reason": "requires lam <= 0"})
    reps = multistart(spec, list(seeds), tol=1e-11, threads=threads)
    conv = [r for r in reps if r.converged]
    diam = solution_diameter(conv)
    details = {"starts": len(reps), "converged": len(conv), "diameter": diam}
    if len(conv) < 2:
        return PropertyReport(pid, INCONCLUSIVE, tol, details=details)
    if diam <= tol:
        return PropertyReport(pid, PASS, tol, details=details)
    return PropertyReport(pid, FAIL, tol, witness={"diameter": diam}, details=details)


def random_spec(rng, n=129, lam_max=0.0, kind="interval"):
    """Random smooth data with lam <= lam_max and a datum that keeps the
    zeroth-order problem solvable."""
    grid = interval(0.0, 1.0, n) if kind == "interval" else radial(1.0, 2, n)
    x = grid.nodes
    p = float(rng.choice([1.5, 2.0, 3.0]))
    mu = float(rng.choice([0.5, 1.0, 2.0]))
    lam = float(rng.uniform(-5.0, lam_max))
    c = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform() + 3 * x)
    h = -1.0 + 0.8 * np.cos(rng.uniform(1, 6) * x + rng.uniform(0, 6))
    return ProblemSpec(grid, p, mu, lam, c, h)


def default_suite(seed=0, n=129):
    """Reports in a fixed order; reproducible for a fixed seed."""
    rng = np.random.default_rng(seed)
    reports = [check_nonuniqueness_counterexample(128)]
    g = interval(0.0, 1.0, n)
    for _ in range(5):
        u, v = random_positive_pair(g, rng)
        reports.append(check_picone(u, v, float(rng.choice([1.5, 2.0, 3.0]))))
    u, _ = random_positive_pair(g, rng)
    reports.append(check_picone(u, Field(g, 2.0 * u.values), 3.0))
    spec = ProblemSpec(g, 2.0, 1.0, -1.0, np.ones(n), -np.ones(n))
    pair = perturbed_pair(spec, rng)
    if pair is None:
        reports.append(PropertyReport("comparison", INCONCLUSIVE, 1e-8,
                                      details={"reason": "pair construction failed"}))
    else:
        reports.append(check_comparison(spec, *pair))
    rs = random_spec(rng, n)
    reports.append(check_uniqueness(rs, seeds=range(seed, seed + 8)))
    neg = ProblemSpec(g, 2.0, 1.0, 0.5 * np.pi ** 2, np.ones(n), -np.ones(n))
    sols = [r.solution for r in solve_Plambda(neg) if r.converged]
    reports.append(check_lower_bound(neg, sols))
    return reports
