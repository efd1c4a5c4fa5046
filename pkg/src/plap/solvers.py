"""Solution pipelines for the transformed problem.

All minimisation happens in the transformed unknown v; reports carry
both v and u = inverse transform of v.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._newton import mountain_pass_path, newton_critical, projected_newton, spd_solve
from .grid import Field, values_of
from .nonlinearity import (G_fun, TruncationData, g_fun, g_prime, hopf_cole,
                           hopf_cole_inv)
from .operators import EnergyModel, SourceModel, residual_P

log = logging.getLogger("plap")


class InfeasibleError(RuntimeError):
    pass


@dataclass
class SolveReport:
    status: str
    v: Field | None
    solution: Field | None
    energy: float
    grad_norm: float
    iterations: int
    lineage: str
    notes: list = field(default_factory=list)
    residual_P: float = float("nan")
    residual_Q: float = float("nan")
    definite: bool | None = None

    @property
    def converged(self):
        return self.status == "converged"

    def summary(self):
        u = self.solution.values if self.solution is not None else None
        return {
            "status": self.status,
            "lineage": self.lineage,
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "sup_norm": float(np.max(np.abs(u))) if u is not None else None,
            "min_value": float(np.min(u)) if u is not None else None,
            "residual_inf": self.residual_P,
            "notes": list(self.notes),
        }


@dataclass
class OrderedPair:
    lower: Field
    upper: Field

    def __post_init__(self):
        if np.any(self.lower.values > self.upper.values):
            raise ValueError("lower field exceeds upper field somewhere")


def default_guard(spec):
    return 1e3 * max(1.0, float(np.max(np.abs(spec.datum))))


def _make_report(model, res, lineage, notes=None):
    spec = model.spec
    v = model.full(res.x)
    notes = list(notes or [])
    if not np.all(np.isfinite(v)):
        notes.append("iterate left the finite range")
        return SolveReport("diverged", None, None, float("nan"), float("inf"),
                           res.iterations, lineage, notes, float("nan"),
                           float("inf"), None)
    vf = Field(spec.grid, v)
    a = spec.a
    uf = None
    rp = float("nan")
    if np.all(v > -1.0 / a):
        uf = hopf_cole_inv(vf, spec.p, spec.mu)
        rp = float(np.max(np.abs(residual_P(uf.values, spec))))
    else:
        notes.append("transformed field reaches the singular level")
    energy = model.energy(v)
    return SolveReport(res.status, vf, uf, energy, res.grad_norm, res.iterations,
                       lineage, notes, rp, model.grad_norm(v), res.definite)


def _stationary(rep, model, tol):
    """Unconstrained stationarity of a box minimiser, up to rounding."""
    x = rep.v.values[model.ifree]
    return rep.residual_Q <= max(10 * tol, 10 * model.ffloor(x))


# -- auxiliary convex problems ------------------------------------------

def solve_source(spec, source, tol=1e-11, start=None):
    """Solve -Delta_p w = source with zero Dirichlet data (convex)."""
    model = SourceModel(spec, source)
    x0 = np.zeros(model.ifree.size) if start is None else values_of(start)[model.ifree]
    scale = max(1.0, float(np.max(np.abs(source))))
    res = projected_newton(model.fe, model.fg, model.fb, x0, model.fm,
                           tol=tol * scale, max_iter=500, floor=model.ffloor)
    if res.status != "converged":
        raise InfeasibleError(f"source problem did not converge ({res.status})")
    return model.full(res.x)


def estimate_lower_bound(spec, max_iter=200, safety=2.0):
    """Self-consistent surrogate M with min u > -M for every solution u.

    Iterates M <- safety * max(-w) where -Delta_p w = -lam+ c M^(p-1) - h-.
    Only the negative part of the datum enters.
    """
    lam = max(spec.lam, 0.0)
    hneg = np.maximum(-spec.datum, 0.0)
    if lam == 0.0:
        w = solve_source(spec, -hneg)
        return safety * max(0.0, -float(w.min()))
    M = 1.0
    w = None
    for _ in range(max_iter):
        w = solve_source(spec, -lam * spec.c * M ** (spec.p - 1.0) - hneg, start=w)
        Mn = safety * max(0.0, -float(w.min()))
        if abs(Mn - M) <= 1e-9 * max(1.0, Mn):
            return Mn
        if Mn > 1e8:
            raise InfeasibleError("lower-bound fixed point diverges")
        M = Mn
    raise InfeasibleError("lower-bound fixed point did not settle")


class TruncatedLowerModel(EnergyModel):
    """Transformed energy for the auxiliary problem with datum d < 0 and the
    zeroth-order term truncated at level -kt in the original unknown."""

    def __init__(self, spec, kt, d):
        super().__init__(spec, None)
        self.kt = float(kt)
        self.d = np.asarray(d, dtype=float)
        self.vk = float(np.expm1(-spec.a * kt) / spec.a)
        self.low = self.d - spec.lam * spec.c * kt ** (spec.p - 1.0)

    def _y(self, v):
        return np.maximum(1.0 + self.spec.a * v, 0.0)

    def F(self, v):
        s = self.spec
        p, a = s.p, s.a
        up = v >= self.vk
        t = np.where(up, v, self.vk)
        top = s.lam * s.c * np.asarray(G_fun(t, p, s.mu)) + self.d * ((1 + a * t) ** p - 1) / (a * p)
        yk = 1.0 + a * self.vk
        below = top + self.low * (self._y(v) ** p - yk ** p) / (a * p)
        return np.where(up, top, below)

    def f(self, v):
        s = self.spec
        up = v >= self.vk
        y = self._y(v)
        top = s.lam * s.c * np.asarray(g_fun(v, s.p, s.mu)) + self.d * y ** (s.p - 1)
        return np.where(up, top, self.low * y ** (s.p - 1))

    def f_prime(self, v):
        s = self.spec
        up = v >= self.vk
        y = np.maximum(self._y(v), 1e-300)
        top = s.lam * s.c * np.asarray(g_prime(v, s.p, s.mu, self.epsilon_reg)) + self.d * s.mu * y ** (s.p - 2)
        return np.where(up, top, self.low * s.mu * y ** (s.p - 2))


def build_lower_solution(spec, tol=1e-10, max_doublings=12):
    """Lower solution below every solution, and its transform."""
    p, mu, a = spec.p, spec.mu, spec.a
    hneg = np.maximum(-spec.datum, 0.0)
    if spec.lam <= 0:
        w = solve_source(spec, -hneg)
        M = 2.0 * max(0.0, -float(w.min()))
        return TruncationData.from_lower(w - M, p, mu, M=M)
    try:
        M = estimate_lower_bound(spec)
    except InfeasibleError:
        M = None
    kt = max(2.0 * M, 1.0) if M is not None else 1.0
    d = -hneg - 1.0
    for _ in range(max_doublings):
        w2 = solve_source(spec, -spec.lam * spec.c * kt ** (p - 1.0) + d)
        lo = np.maximum(np.expm1(a * w2) / a, -1.0 / a)
        model = TruncatedLowerModel(spec, kt, d)
        res = projected_newton(model.fe, model.fg, model.fb,
                               np.zeros(model.ifree.size), model.fm,
                               lo=lo[model.ifree], hi=np.zeros(model.ifree.size),
                               tol=tol, max_iter=500, floor=model.ffloor)
        if res.status == "converged":
            v = model.full(res.x)
            if np.all(v > -1.0 / a):
                u = np.log1p(a * v) / a
                if u.min() > -kt:
                    return TruncationData.from_lower(u, p, mu, k_trunc=kt, M=M)
        log.debug("truncated lower problem hit level -%g; doubling", kt)
        kt *= 2.0
    raise InfeasibleError("could not build a lower solution")


# -- solvers -------------------------------------------------------------

def solve_between(spec, pair, trunc=None, tol=1e-9, max_iter=500, sign_tol=1e-8):
    """Minimise the transformed energy over the box lower <= v <= upper."""
    model = EnergyModel(spec, trunc)
    lo = pair.lower.values[model.ifree]
    hi = pair.upper.values[model.ifree]
    notes = []
    rl = model.residual(pair.lower.values)[model.ifree]
    ru = model.residual(pair.upper.values)[model.ifree]
    if np.max(rl) > sign_tol:
        notes.append(f"lower field residual sign violated by {np.max(rl):.3g}")
    if np.min(ru) < -sign_tol:
        notes.append(f"upper field residual sign violated by {-np.min(ru):.3g}")
    x0 = np.clip(np.zeros_like(lo), lo, hi)
    res = projected_newton(model.fe, model.fg, model.fb, x0, model.fm, lo=lo, hi=hi,
                           tol=tol, max_iter=max_iter, floor=model.ffloor)
    rep = _make_report(model, res, "solve_between", notes)
    if rep.converged and not _stationary(rep, model, tol):
        rep.notes.append("box constraint active at the minimiser")
    return rep


def find_local_min(spec, start, trunc=None, tol=1e-9, max_iter=500, guard=None):
    """Damped Newton descent from start, guarded against blow-up."""
    model = EnergyModel(spec, trunc)
    x0 = values_of(start)[model.ifree]
    guard = default_guard(spec) if guard is None else guard
    res = projected_newton(model.fe, model.fg, model.fb, x0, model.fm, tol=tol,
                           max_iter=max_iter, guard=guard, floor=model.ffloor)
    notes = []
    if res.status == "diverged":
        notes.append("iterate left the guard ball: evidence of nonexistence, not proof")
    return _make_report(model, res, "find_local_min", notes)


def newton_solve(spec, start, trunc=None, tol=1e-9, max_iter=60, guard=None):
    """Newton on the gradient (any Morse index) from start."""
    model = EnergyModel(spec, trunc)
    guard = default_guard(spec) if guard is None else guard
    res = newton_critical(model.fg, model.fb, values_of(start)[model.ifree],
                          model.fm, tol=tol, max_iter=max_iter, guard=guard,
                          floor=model.ffloor)
    return _make_report(model, res, "newton")


def _stiffness_bands(model):
    d = np.zeros(model.grid.n)
    cw = model.rho / model.dx
    d[:-1] += cw
    d[1:] += cw
    idx = model.ifree
    return d[idx], -cw[idx[:-1]]


def mountain_pass(spec, e1, e2, trunc=None, points=41, max_sweeps=300, tol=1e-9):
    """Discretised mountain pass between e1 and e2, polished by Newton."""
    model = EnergyModel(spec, trunc)
    x1 = values_of(e1)[model.ifree].astype(float)
    x2 = values_of(e2)[model.ifree].astype(float)
    sd, so = _stiffness_bands(model)

    def inner(a, b):
        return float(a @ (sd * b) + 2.0 * (a[:-1] @ (so * b[1:])))

    def precond(x, g):
        v = model.full(x)
        d, o = kernels.plap_hessian(np.ascontiguousarray(v), model.rho, model.dx,
                                    spec.p, model.epsilon_reg)
        idx = model.ifree
        return spd_solve(d[idx] + 1e-3 * sd, o[idx[:-1]] + 1e-3 * so, g)

    E1, E2 = model.fe(x1), model.fe(x2)
    path = mountain_pass_path(model.fe, model.fg, x1, x2, precond, inner,
                              points=points, max_sweeps=max_sweeps, level_tol=1e-8,
                              patience=5)
    notes = [f"path sweeps={path.sweeps} level={path.level:.10g}"]
    if not path.level > max(E1, E2):
        notes.append("path maximum does not exceed the endpoint energies")
        res = newton_critical(model.fg, model.fb, path.saddle, model.fm, tol=tol,
                              floor=model.ffloor)
        res.status = "diverged"
        return _make_report(model, res, "mountain_pass", notes)
    guard = max(default_guard(spec), 10.0 * float(np.max(np.abs(x2))))
    order = np.argsort(-path.energies[1:-1]) + 1
    best = None
    for j in order[:5]:
        res = newton_critical(model.fg, model.fb, path.path[j], model.fm, tol=tol,
                              max_iter=80, guard=guard, floor=model.ffloor)
        if res.status != "converged":
            continue
        far = min(np.max(np.abs(res.x - x1)), np.max(np.abs(res.x - x2)))
        if far < 1e-6:
            notes.append("polished point collapsed onto an endpoint")
            continue
        best = res
        break
    if best is None:
        res = newton_critical(model.fg, model.fb, path.saddle, model.fm, tol=tol,
                              floor=model.ffloor)
        status = "max_iter" if path.stabilized else "max_iter"
        res.status = status
        notes.append("saddle polish failed")
        return _make_report(model, res, "mountain_pass", notes)
    rep = _make_report(model, best, "mountain_pass", notes)
    if not rep.energy > max(E1, E2) - 1e-12 * max(1, abs(rep.energy)):
        rep.notes.append("saddle energy below an endpoint energy")
    return rep


def ray_endpoint(spec, e1, trunc=None, t0=1.0, max_doublings=60, cap=1e12):
    """Point t*phi with phi > 0 on the support of c and energy below e1.

    For small lam the energy only turns negative far out along the ray
    (roughly at t ~ exp(gamma1/lam)), hence the cap well beyond the
    blow-up guard used by the local solvers."""
    model = EnergyModel(spec, trunc)
    phi = solve_source(spec, spec.c)
    phi = phi / np.max(phi)
    E1 = model.energy(values_of(e1))
    margin = 0.1 * max(1.0, abs(E1))
    t = t0
    for _ in range(max_doublings):
        if t > cap:
            break
        v = t * phi
        Ev = model.energy(v)
        if not np.isfinite(Ev):
            break
        if Ev < E1 - margin and np.max(np.abs(v - values_of(e1))) > 1e-3:
            return Field(spec.grid, v)
        t *= 2.0
    return None


def upper_solution(spec, lam0=None, gamma=None):
    """l*w with -Delta_p w = lam0 c |w|^(p-2) w + k h, scaled until it is a
    discrete upper solution of the transformed problem (datum >= 0)."""
    from .spectra import gamma1

    if gamma is None:
        gamma = gamma1(spec.c, spec.p, spec.grid).value
    lam0 = 0.5 * (max(spec.lam, 0.0) + gamma) if lam0 is None else lam0
    model = _EigenShiftModel(spec, lam0)
    res = projected_newton(model.fe, model.fg, model.fb, np.zeros(model.ifree.size),
                           model.fm, tol=1e-11, max_iter=500, floor=model.ffloor)
    if res.status != "converged":
        return None
    w = model.full(res.x)
    qm = EnergyModel(spec, None)
    for l in np.geomspace(1.0, 1e-4, 60):
        beta = l * w
        r = qm.residual(beta)[qm.ifree]
        if np.all(r >= -1e-10):
            return Field(spec.grid, beta)
    for l in np.geomspace(1.0, 1e4, 60):
        beta = l * w
        if np.all(qm.residual(beta)[qm.ifree] >= -1e-10):
            return Field(spec.grid, beta)
    return None


class _EigenShiftModel(EnergyModel):
    def __init__(self, spec, lam0):
        super().__init__(spec, None)
        self.lam0 = lam0

    def F(self, v):
        s = self.spec
        return self.lam0 * s.c * np.abs(v) ** s.p / s.p + s.datum * v

    def f(self, v):
        s = self.spec
        return self.lam0 * s.c * np.abs(v) ** (s.p - 1) * np.sign(v) + s.datum

    def f_prime(self, v):
        s = self.spec
        e = self.epsilon_reg
        return self.lam0 * s.c * (s.p - 1) * (v * v + e * e) ** ((s.p - 2) / 2)


def _distinct(reports, tol=1e-6):
    out = []
    for r in reports:
        if all(np.max(np.abs(r.v.values - q.v.values)) > tol * max(1.0, q.v.sup())
               for q in out):
            out.append(r)
    return out


def _certify(rep, spec, trunc, res_tol):
    if not rep.converged:
        return rep
    if rep.solution is None:
        rep.status = "infeasible"
        return rep
    if rep.residual_P > res_tol:
        rep.notes.append(f"original-problem residual {rep.residual_P:.3g} above {res_tol:.3g}")
        rep.status = "max_iter"
    if np.any(rep.v.values < trunc.alpha - 1e-8):
        rep.notes.append("solution dips below the truncation level")
        rep.status = "infeasible"
    return rep


def solve_Plambda(spec, trunc=None, tol=1e-9, mp_points=41, second=True, max_iter=500):
    """Full pipeline; returns converged reports first, then failures."""
    if trunc is None:
        try:
            trunc = build_lower_solution(spec)
        except InfeasibleError as exc:
            return [SolveReport("infeasible", None, None, float("nan"), float("inf"), 0,
                                "build_lower_solution", [str(exc)])]
    res_tol = max(1e-6, 1e3 * tol)
    zero = Field(spec.grid, np.zeros(spec.grid.n))
    failures = []
    first = None
    if spec.lam <= 0:
        rep = _certify(find_local_min(spec, zero, trunc, tol=tol, max_iter=max_iter), spec, trunc, res_tol)
        rep.lineage = "uniqueness:find_local_min"
        return [rep]
    if np.all(spec.datum <= 0):
        pair = OrderedPair(Field(spec.grid, np.minimum(trunc.alpha, 0.0)), zero)
        rep = _certify(solve_between(spec, pair, trunc, tol=tol, max_iter=max_iter), spec, trunc, res_tol)
        rep.lineage = "box[alpha,0]"
        if rep.converged and _stationary(rep, EnergyModel(spec, trunc), tol):
            first = rep
        else:
            failures.append(rep)
    if first is None:
        rep = _certify(find_local_min(spec, zero, trunc, tol=tol, max_iter=max_iter), spec, trunc, res_tol)
        if rep.converged:
            first = rep
        else:
            failures.append(rep)
    if first is None:
        pair = OrderedPair(Field(spec.grid, np.minimum(trunc.alpha, 0.0)), zero)
        rep = _certify(solve_between(spec, pair, trunc, tol=tol, max_iter=max_iter), spec, trunc, res_tol)
        rep.lineage = "box[alpha,0]"
        if rep.converged and _stationary(rep, EnergyModel(spec, trunc), tol):
            first = rep
        else:
            rep.status = "max_iter" if rep.converged else rep.status
            rep.notes.append("box minimiser is not a critical point")
            failures.append(rep)
    if first is None:
        return failures
    found = [first]
    if second:
        e2 = ray_endpoint(spec, first.v, trunc)
        if e2 is None:
            failures.append(SolveReport("diverged", None, None, float("nan"), float("inf"),
                                        0, "ray_endpoint", ["no low-energy ray point"]))
        else:
            rep = _certify(mountain_pass(spec, first.v, e2, trunc, points=mp_points, tol=tol),
                           spec, trunc, res_tol)
            (found if rep.converged else failures).append(rep)
    found = _distinct(found)
    return found + failures


# -- multistart ------------------------------------------------------------

def random_start(grid, rng, amplitude=1.0, modes=6):
    x = np.asarray(grid.nodes)
    L = grid.b - grid.a
    v = np.zeros_like(x)
    for j in range(1, modes + 1):
        if grid.kind == "interval":
            basis = np.sin(j * np.pi * (x - grid.a) / L)
        else:
            basis = np.cos((j - 0.5) * np.pi * x / grid.b)
        v += rng.normal() / j * basis
    v *= amplitude / max(np.max(np.abs(v)), 1e-12)
    v[~grid.free] = 0.0
    return Field(grid, v)


def multistart(spec, seeds, trunc=None, tol=1e-10, amplitude=None, threads=1):
    """find_local_min from random starts; one report per seed."""
    if trunc is None:
        trunc = build_lower_solution(spec)
    amp = amplitude if amplitude is not None else 2.0 * max(1.0, float(np.max(np.abs(spec.datum))))

    def one(seed):
        rng = np.random.default_rng(seed)
        return find_local_min(spec, random_start(spec.grid, rng, amp * rng.uniform(0.1, 1)),
                              trunc, tol=tol)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, seeds))
    return [one(s) for s in seeds]


def solution_diameter(reports):
    vals = [r.solution.values for r in reports if r.converged and r.solution is not None]
    if len(vals) < 2:
        return 0.0
    arr = np.array(vals)
    return float(np.max(arr.max(axis=0) - arr.min(axis=0)))


def hopf_cole_field(u, spec):
    return hopf_cole(u, spec.p, spec.mu)
