"""Branch tracing in lam or k, fold location and the (lam, k) region diagram."""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ._newton import newton_critical
from .grid import Field, values_of
from .nonlinearity import TruncationData, hopf_cole
from .operators import EnergyModel, residual_P
from .solvers import default_guard, newton_solve, solve_Plambda

log = logging.getLogger("plap")

PARAM_ATTR = {"lambda": "lam", "k": "k"}


@dataclass
class BranchPoint:
    param: float
    energy: float
    min_value: float
    sup_norm: float
    residual: float
    residual_Q: float = float("nan")
    fold_flag: bool = False
    solution: Field | None = None


@dataclass
class Branch:
    parameter: str
    points: list = field(default_factory=list)
    fold: tuple | None = None
    truncated: bool = False
    notes: list = field(default_factory=list)

    @property
    def params(self):
        return np.array([q.param for q in self.points])

    def solutions(self):
        return [q for q in self.points if q.solution is not None]

    def rows(self):
        for q in self.points:
            yield (q.param, q.energy, q.min_value, q.sup_norm, int(q.fold_flag))


@dataclass
class RegionDiagram:
    lambda_samples: np.ndarray
    kbar: dict
    ktilde1: dict
    ktilde2: dict
    gamma1: float
    k0: float
    at_gamma1: dict = field(default_factory=dict)
    unresolved: list = field(default_factory=list)
    branches: dict = field(default_factory=dict)

    def monotonicity(self):
        """(kbar non-increasing, ktilde1 non-decreasing, kbar < k0, kt1 <= kt2)."""
        kb = [self.kbar[l] for l in sorted(self.kbar) if self.kbar[l] is not None]
        k1 = [self.ktilde1[l] for l in sorted(self.ktilde1) if self.ktilde1[l] is not None]
        tol = 1e-9
        ok_b = all(b <= a + tol * max(1, a) for a, b in zip(kb, kb[1:]))
        ok_1 = all(b >= a - tol * max(1, a) for a, b in zip(k1, k1[1:]))
        below = all(v < self.k0 for v in kb)
        order = all(self.ktilde1[l] <= self.ktilde2[l] + 1e-12
                    for l in self.ktilde1
                    if self.ktilde1[l] is not None and self.ktilde2.get(l) is not None)
        return ok_b, ok_1, below, order


def _set_param(spec, name, value):
    return spec.with_(**{PARAM_ATTR[name]: float(value)})


def loose_truncation(spec, depth):
    """Truncation at the constant level -depth in the original unknown.

    Solutions of the transformed problem that stay above the level are
    exactly the solutions of the original problem, so any depth works as
    long as the traced fields keep clear of it."""
    return TruncationData.from_lower(np.full(spec.grid.n, -float(depth)), spec.p, spec.mu)


class _Tracer:
    def __init__(self, spec, name, tol, trunc_depth):
        self.spec = spec
        self.name = name
        self.tol = tol
        self.depth = trunc_depth

    def model(self, value):
        s = _set_param(self.spec, self.name, value)
        return EnergyModel(s, loose_truncation(s, self.depth))

    def deepen_if_needed(self, v):
        a = self.spec.a
        if np.all(v > -1.0 / a):
            umin = float(np.min(np.log1p(a * v) / a))
            while umin < -0.5 * self.depth:
                self.depth *= 2.0
        return self.depth

    def residual(self, model, x):
        return model.fg(x)

    def converged(self, model, x):
        r = float(np.max(np.abs(model.fg(x) / model.fm), initial=0.0))
        return r <= max(self.tol, model.ffloor(x)), r

    def jac(self, model, x):
        d, o = model.fb(x)
        return sp.diags([o, d, o], [-1, 0, 1], format="csc")

    def bordered(self, model, x, row_x, row_p):
        J = self.jac(model, x)
        dp = model.param_derivative(model.full(x), PARAM_ATTR[self.name])[model.ifree]
        A = sp.bmat([[J, sp.csc_matrix(dp[:, None])],
                     [sp.csr_matrix(row_x[None, :]), sp.csr_matrix([[row_p]])]],
                    format="csc")
        return A, dp

    def tangent(self, x, value, prev=None):
        model = self.model(value)
        m = model.fm
        if prev is None:
            J = self.jac(model, x)
            dp = model.param_derivative(model.full(x), PARAM_ATTR[self.name])[model.ifree]
            tx = -splu(J).solve(dp)
            tp = 1.0
        else:
            px, pp = prev
            A, _ = self.bordered(model, x, px * m, pp)
            rhs = np.zeros(x.size + 1)
            rhs[-1] = 1.0
            t = splu(A).solve(rhs)
            tx, tp = t[:-1], t[-1]
        nrm = np.sqrt(float(np.dot(tx * m, tx)) + tp * tp)
        tx, tp = tx / nrm, tp / nrm
        if prev is not None and float(np.dot(prev[0] * m, tx)) + prev[1] * tp < 0:
            tx, tp = -tx, -tp
        return tx, tp

    def correct_natural(self, x0, value, max_iter=25):
        try:
            model = self.model(value)
        except ValueError:
            return x0, False, 0
        res = newton_critical(model.fg, model.fb, x0, model.fm, tol=self.tol,
                              max_iter=max_iter, guard=self.guard(),
                              floor=model.ffloor)
        return res.x, res.status == "converged", res.iterations

    def correct_arclength(self, xp, pp, tx, tp, max_iter=25):
        x, p = xp.copy(), pp
        m = self.model(pp).fm
        for it in range(1, max_iter + 1):
            try:
                model = self.model(p)
            except ValueError:
                return x, p, False, it
            g = model.fg(x)
            N = float(np.dot(tx * m, x - xp)) + tp * (p - pp)
            ok, r = self.converged(model, x)
            if ok and abs(N) <= 1e-12:
                return x, p, True, it - 1
            try:
                A, _ = self.bordered(model, x, tx * m, tp)
                step = splu(A).solve(-np.concatenate((g, [N])))
            except RuntimeError:
                return x, p, False, it
            if not np.all(np.isfinite(step)):
                return x, p, False, it
            x = x + step[:-1]
            p = p + step[-1]
            if np.max(np.abs(x)) > self.guard():
                return x, p, False, it
        try:
            ok, _ = self.converged(self.model(p), x)
        except ValueError:
            ok = False
        return x, p, ok, max_iter

    def guard(self):
        return 1e3 * default_guard(self.spec)


def _point(tracer, x, value, keep):
    model = tracer.model(value)
    v = model.full(x)
    a = tracer.spec.a
    s = _set_param(tracer.spec, tracer.name, value)
    if np.all(v > -1.0 / a):
        u = np.log1p(a * v) / a
        res = float(np.max(np.abs(residual_P(u, s))))
    else:
        u = np.full_like(v, -np.inf)
        res = float("inf")
    return BranchPoint(float(value), float(model.energy(v)), float(np.min(u)),
                       float(np.max(np.abs(u))), res, model.grad_norm(v), False,
                       Field(s.grid, u) if keep and np.all(np.isfinite(u)) else None)


def trace(spec, name, start, stop, step, seed=None, step_min=None, max_points=1000,
          tol=1e-9, keep_every=10, sup_stop=None, stop_at_fold=False):
    """Continue solutions of the problem in parameter name from start.

    seed is a solution Field (original unknown) at start; when omitted the
    first solution returned by the full pipeline is used. The branch stops
    when the parameter leaves [min(start,stop), max(start,stop)], when the
    sup-norm exceeds sup_stop, or when the step falls below step_min.
    """
    if name not in PARAM_ATTR:
        raise ValueError(f"parameter must be one of {sorted(PARAM_ATTR)}")
    step_min = step / 64.0 if step_min is None else step_min
    direction = 1.0 if stop >= start else -1.0
    lo_p, hi_p = min(start, stop), max(start, stop)
    s0 = _set_param(spec, name, start)
    if seed is None:
        reps = [r for r in solve_Plambda(s0, tol=tol, second=False) if r.converged]
        if not reps:
            br = Branch(name, truncated=True)
            br.notes.append("no seed solution at the starting parameter")
            return br
        seed = reps[0].solution
    u0 = values_of(seed)
    a = spec.a
    depth = max(1.0, 4.0 * max(0.0, -float(np.min(u0))))
    tracer = _Tracer(spec, name, tol, depth)
    sup_stop = sup_stop if sup_stop is not None else default_guard(spec)
    model = tracer.model(start)
    x = model.full(np.zeros(model.ifree.size))
    x = np.expm1(a * u0) / a
    x = x[model.ifree]
    x, ok, _ = tracer.correct_natural(x, start)
    br = Branch(name)
    if not ok:
        br.truncated = True
        br.notes.append("seed is not a solution at the starting parameter")
        return br
    p = float(start)
    br.points.append(_point(tracer, x, p, True))
    tx, tp = tracer.tangent(x, p)
    if tp * direction < 0:
        tx, tp = -tx, -tp
    ds = step
    mode = "natural"
    count = 1
    while len(br.points) < max_points:
        tracer.deepen_if_needed(model.full(x))
        if mode == "natural":
            pn = p + direction * ds
            xp = x + (tx / tp) * (pn - p) if abs(tp) > 1e-12 else x
            xn, ok, its = tracer.correct_natural(xp, pn, max_iter=8)
            if not ok or its > 6:
                mode = "arclength"
                log.debug("switching to arclength at %s=%g", name, p)
                continue
        else:
            xp, pp = x + ds * tx, p + ds * tp
            xn, pn, ok, its = tracer.correct_arclength(xp, pp, tx, tp)
        if not ok:
            ds *= 0.5
            if ds < step_min:
                br.truncated = True
                br.notes.append(f"branch lost at {name}={p:.10g}")
                break
            continue
        try:
            txn, tpn = tracer.tangent(xn, pn, (tx, tp))
        except RuntimeError:
            ds *= 0.5
            if ds < step_min:
                br.truncated = True
                br.notes.append(f"singular bordered system at {name}={p:.10g}")
                break
            continue
        fold = tp * tpn < 0
        if fold and ds > 2 * step_min and mode == "arclength":
            ds *= 0.5
            continue
        if mode == "natural" and tpn * direction < 0:
            mode = "arclength"
            ds *= 0.5
            continue
        x, p, tx, tp = xn, pn, txn, tpn
        count += 1
        pt = _point(tracer, x, p, keep_every and count % keep_every == 0)
        if fold:
            pt.fold_flag = True
            pt.solution = pt.solution or _point(tracer, x, p, True).solution
            if stop_at_fold:
                br.points.append(pt)
                break
        br.points.append(pt)
        if its <= 3:
            ds = min(step, 1.5 * ds)
        if p < lo_p - 1e-12 or p > hi_p + 1e-12:
            break
        if pt.sup_norm > sup_stop:
            br.notes.append(f"sup-norm exceeded {sup_stop:.3g}")
            break
    if br.points and br.points[-1].solution is None:
        x_last = br.points[-1]
        x_last.solution = _point(tracer, x, p, True).solution
    return br


def trace_lambda(spec, lambda_range, step=None, seed=None, **kw):
    from .spectra import gamma1

    if step is None:
        step = gamma1(spec.c, spec.p, spec.grid).value / 100.0
    start, stop = lambda_range
    kw.setdefault("step_min", step / 64.0)
    return trace(spec, "lambda", start, stop, step, seed=seed, **kw)


def trace_k(spec, k_range, step, seed=None, **kw):
    start, stop = k_range
    return trace(spec, "k", start, stop, step, seed=seed, **kw)


# -- folds -----------------------------------------------------------------

def fold_estimate(branch):
    """Turning-point estimate from the first tangent sign change.

    Returns (param, index) with the vertex of the parabola through the three
    points around the extreme parameter value, or None."""
    idx = [i for i, q in enumerate(branch.points) if q.fold_flag]
    if not idx:
        return None
    i = idx[0]
    lo, hi = max(0, i - 1), min(len(branch.points) - 1, i + 1)
    ps = branch.params[lo:hi + 1]
    if ps.size < 3:
        return float(ps.max()), i
    s = np.arange(ps.size, dtype=float)
    c2, c1, c0 = np.polyfit(s, ps, 2)
    if c2 == 0:
        return float(ps.max()), i
    sv = -c1 / (2 * c2)
    est = c0 + c1 * sv + c2 * sv * sv
    return float(est), i


def solvable(spec, warm=None, tol=1e-9):
    """True when a certified solution is found: warm-started Newton first,
    then the full pipeline. False is evidence of nonexistence only."""
    if warm is not None:
        a = spec.a
        u = values_of(warm)
        if np.all(np.isfinite(u)):
            rep = newton_solve(spec, np.expm1(a * u) / a,
                               trunc=loose_truncation(spec, max(1.0, 4 * max(0.0, -u.min()))),
                               tol=tol)
            if rep.converged and rep.solution is not None and \
                    rep.residual_P <= max(1e-6, 1e3 * tol):
                return True, rep
    reps = solve_Plambda(spec, tol=tol, second=False)
    good = [r for r in reps if r.converged]
    return (True, good[0]) if good else (False, reps[0] if reps else None)


def bisect_solvability(spec, name, lo, hi, width, warm=None, test=None, tol=1e-9):
    """Shrink [lo, hi] (solvable at lo, not at hi) to width; returns the
    final bracket and the last solution found at its left edge."""
    test = test or (lambda s, w: solvable(s, w, tol))
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok, rep = test(_set_param(spec, name, mid), warm)
        if ok:
            lo = mid
            if rep is not None and rep.solution is not None:
                warm = rep.solution
        else:
            hi = mid
    return lo, hi, warm


def detect_fold(branch, spec=None, width=None, tol=1e-9):
    """(param, window) of the first turning point, or None.

    Without spec only the tangent sign change is used and the window is the
    spacing of the bracketing branch points. With spec the location is
    refined by bisection on solvability to the requested width."""
    est = fold_estimate(branch)
    if est is None:
        return None
    value, i = est
    pts = branch.points
    ps = branch.params
    peak = max(range(max(0, i - 2), min(len(pts), i + 2)), key=lambda t: ps[t])
    lo = float(ps[peak])
    if spec is None:
        spacing = float(np.max(np.abs(np.diff(ps[max(0, i - 1):i + 2])))) if len(ps) > 1 else 0.0
        branch.fold = (value, (lo, lo + spacing))
        return branch.fold
    width = width if width is not None else 1e-3 * max(abs(lo), 1.0)
    warm = pts[peak].solution
    name = branch.parameter
    hi = max(value, lo) + width
    grow = width
    while True:
        ok, rep = solvable(_set_param(spec, name, hi), warm, tol)
        if not ok:
            break
        lo = hi
        warm = rep.solution
        grow *= 2.0
        hi = lo + grow
        if grow > 1e3 * width * max(1, abs(lo)):
            return None
    lo, hi, _ = bisect_solvability(spec, name, lo, hi, width, warm, tol=tol)
    branch.fold = (0.5 * (lo + hi), (lo, hi))
    return branch.fold


def scalar_fold_toy(lam_start=1.0, lam_stop=1.0, ds=0.05, steps=80):
    """Pseudo-arclength on x^2 = lam; returns (lams, xs, fold index)."""
    x, lam = np.sqrt(lam_start), lam_start
    tx, tl = -1.0, -2.0 * x
    n = np.hypot(tx, tl)
    tx, tl = tx / n, tl / n
    lams, xs, fold = [lam], [x], None
    for i in range(steps):
        xp, lp = x + ds * tx, lam + ds * tl
        xn, ln = xp, lp
        for _ in range(30):
            F = np.array([xn * xn - ln, tx * (xn - xp) + tl * (ln - lp)])
            if np.max(np.abs(F)) < 1e-14:
                break
            J = np.array([[2 * xn, -1.0], [tx, tl]])
            dxn, dln = np.linalg.solve(J, -F)
            xn, ln = xn + dxn, ln + dln
        J = np.array([[2 * xn, -1.0], [tx, tl]])
        t = np.linalg.solve(J, [0.0, 1.0])
        t /= np.linalg.norm(t)
        if fold is None and t[1] * tl < 0:
            fold = i + 1
        x, lam, tx, tl = xn, ln, t[0], t[1]
        lams.append(lam)
        xs.append(x)
    return np.array(lams), np.array(xs), fold


# -- nonexistence evidence ----------------------------------------------------

def refine_spec(spec, factor):
    """The same problem on a grid with factor times as many cells."""
    from .grid import make_grid

    g = spec.grid
    n = (g.n - 1) * factor + 1
    if g.kind == "interval":
        ng = make_grid("interval", n, a=g.a, b=g.b)
    else:
        ng = make_grid("radial", n, R=g.b, N=g.dim)
    c = np.interp(ng.nodes, g.nodes, spec.c)
    h = np.interp(ng.nodes, g.nodes, spec.h)
    return spec.with_(grid=ng, c=c, h=h)


def nonexistence_evidence(spec, factors=(1, 2, 4), tol=1e-9):
    """True when every pipeline fails at each of the mesh resolutions."""
    for f in factors:
        s = spec if f == 1 else refine_spec(spec, f)
        ok, _ = solvable(s, None, tol)
        if ok:
            return False
    return True


# -- region diagram -------------------------------------------------------------

def _negative_interior(u, grid):
    from .verify import strict_sign

    return strict_sign(u, grid, -1.0)


def k_column(spec, lam, k_stop, k_step, gamma, tol=1e-9, width=None):
    """Threshold values of k at fixed lam, traced from the zero solution at k=0."""
    s = spec.with_(lam=float(lam), k=0.0)
    k_start, seed = 0.0, Field(s.grid, np.zeros(s.grid.n))
    if s.p != 2:
        # the linearisation at v = 0 degenerates for p != 2; seed off zero
        k_start = 0.1 * k_step
        ok, rep = solvable(s.with_(k=k_start), None, tol)
        seed = rep.solution if ok else None
    br = Branch("k", truncated=True)
    if seed is not None:
        br = trace(s, "k", k_start, k_stop, k_step, seed=seed, tol=tol, keep_every=1,
                   stop_at_fold=True)
    width = width if width is not None else 1e-3 * k_step * 100
    out = {"branch": br, "kbar": None, "ktilde1": None, "ktilde2": None}
    if not br.points:
        return out
    fold_pts = [q for q in br.points if q.fold_flag]
    fold = None
    if fold_pts:
        fold = detect_fold(br, s, width=width, tol=tol)
    if lam < gamma:
        out["kbar"] = fold[0] if fold else None
        return out
    out["ktilde2"] = fold[0] if fold else None
    negs = [q for q in br.points[1:] if q.solution is not None]
    last_neg = None
    first_not = None
    for q in negs:
        if _negative_interior(q.solution, s.grid):
            last_neg = q
        else:
            first_not = q
            break
    if last_neg is not None and first_not is not None:
        lo, hi = last_neg.param, first_not.param
        warm = last_neg.solution

        def neg_test(sp_, w):
            ok, rep = solvable(sp_, w, tol)
            if ok and rep.solution is not None and _negative_interior(rep.solution, sp_.grid):
                return True, rep
            return False, None

        lo, hi, _ = bisect_solvability(s, "k", lo, hi, width, warm, test=neg_test)
        out["ktilde1"] = 0.5 * (lo + hi)
    elif last_neg is not None and fold is not None:
        out["ktilde1"] = out["ktilde2"]
    return out


def region_diagram(spec, lambda_grid, k_stop=None, k_step=None, tol=1e-9, threads=1,
                   gamma=None, kzero=None):
    """kbar on lam < gamma1 and ktilde1, ktilde2 on lam > gamma1."""
    from .spectra import gamma1, k0

    gamma = gamma if gamma is not None else gamma1(spec.c, spec.p, spec.grid).value
    kzero = kzero if kzero is not None else k0(spec.h, spec.p, spec.mu, spec.grid).value
    k_stop = k_stop if k_stop is not None else 2.0 * kzero
    k_step = k_step if k_step is not None else kzero / 50.0
    lams = np.asarray(lambda_grid, dtype=float)

    def column(lam):
        return lam, k_column(spec, lam, k_stop, k_step, gamma, tol,
                             width=1e-3 * kzero)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            cols = list(ex.map(column, lams))
    else:
        cols = [column(l) for l in lams]
    diag = RegionDiagram(lams, {}, {}, {}, gamma, kzero)
    for lam, col in cols:
        diag.branches[float(lam)] = col["branch"]
        if lam < gamma:
            diag.kbar[float(lam)] = col["kbar"]
            if col["kbar"] is None:
                diag.unresolved.append(float(lam))
        elif lam > gamma:
            diag.ktilde1[float(lam)] = col["ktilde1"]
            diag.ktilde2[float(lam)] = col["ktilde2"]
            if col["ktilde2"] is None:
                diag.unresolved.append(float(lam))
    return diag


def solvable_at_gamma1(spec, ks, gamma=None, tol=1e-9):
    """Solvability at lam = gamma1 for each k (evidence, three meshes)."""
    from .spectra import gamma1

    gamma = gamma if gamma is not None else gamma1(spec.c, spec.p, spec.grid).value
    out = {}
    for k in ks:
        s = spec.with_(lam=gamma, k=float(k))
        out[float(k)] = not nonexistence_evidence(s, tol=tol)
    return out


def hopf_cole_branch(branch, spec):
    """Transformed fields of the stored branch solutions."""
    return [(q.param, hopf_cole(q.solution, spec.p, spec.mu)) for q in branch.solutions()]


__all__ = [
    "Branch", "BranchPoint", "RegionDiagram", "trace", "trace_lambda", "trace_k",
    "detect_fold", "fold_estimate", "solvable", "bisect_solvability",
    "scalar_fold_toy", "nonexistence_evidence", "refine_spec", "k_column",
    "region_diagram", "solvable_at_gamma1", "hopf_cole_branch", "loose_truncation",
]
