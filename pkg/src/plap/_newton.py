"""Newton-type kernels on free-node vectors with tridiagonal Hessians."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded, solveh_banded

log = logging.getLogger("plap")


def spd_solve(d, o, rhs):
    ab = np.zeros((2, d.shape[0]))
    ab[0, 1:] = o
    ab[1] = d
    return solveh_banded(ab, rhs, check_finite=False)


def tri_solve(d, o, rhs):
    ab = np.zeros((3, d.shape[0]))
    ab[0, 1:] = o
    ab[1] = d
    ab[2, :-1] = o
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def shifted_newton_direction(d, o, g, m, shift0=0.0):
    """Solve (H + tau*diag(m)) x = -g with the smallest tau making it SPD.

    Returns (direction, tau)."""
    if d.shape[0] == 0:
        return np.zeros(0), 0.0
    tau = shift0
    scale = float(np.max(np.abs(d) / m)) or 1.0
    for _ in range(60):
        try:
            return -spd_solve(d + tau * m, o, g), tau
        except LinAlgError:
            tau = max(1e-10 * scale, 10.0 * tau)
    return -g / m, np.inf


@dataclass
class MinResult:
    x: np.ndarray
    status: str
    energy: float
    grad_norm: float
    iterations: int
    definite: bool = False


def projected_newton(f, grad, bands, x0, m, lo=None, hi=None, tol=1e-9,
                     max_iter=400, guard=np.inf, floor=None):
    """Minimise f over the box lo <= x <= hi (bounds may be None).

    Newton steps on the free set with an SPD shift when needed, bound-
    binding variables moved by scaled gradient steps, projected Armijo.
    Stationarity is measured by max |x - P(x - g/m)| which equals the
    strong residual on inactive nodes. floor(x), when given, raises the
    tolerance to the rounding floor of the residual at x.
    """
    n = x0.shape[0]
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        return MinResult(x0, "infeasible", np.nan, np.inf, 0)
    x = np.clip(x0, lo, hi)
    E = f(x)
    g = grad(x)
    stat = np.inf
    for it in range(1, max_iter + 1):
        r = g / m
        stat = float(np.max(np.abs(x - np.clip(x - r, lo, hi)))) if n else 0.0
        if stat <= tol or (floor is not None and stat <= floor(x)):
            d, o = bands(x)
            free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
            definite = _is_definite(d, o, free)
            return MinResult(x, "converged", E, stat, it - 1, definite)
        eps_b = min(1e-9, stat)
        binding = ((x <= lo + eps_b) & (g > 0)) | ((x >= hi - eps_b) & (g < 0))
        free = ~binding
        d, o = bands(x)
        step = -r.copy()
        idx = np.nonzero(free)[0]
        if idx.size:
            df, of = _restrict(d, o, idx)
            dirf, _ = shifted_newton_direction(df, of, g[idx], m[idx])
            step[idx] = dirf
        t = 1.0
        accepted = False
        for _ in range(40):
            xt = np.clip(x + t * step, lo, hi)
            Et = f(xt)
            dec = float(np.dot(g, xt - x))
            if np.isfinite(Et) and (Et <= E + 0.1 * dec and dec < 0):
                accepted = True
                break
            if np.isfinite(Et) and abs(Et - E) <= 1e-13 * (1 + abs(E)):
                # energy change at rounding level: judge by stationarity
                gt = grad(xt)
                st = float(np.max(np.abs(xt - np.clip(xt - gt / m, lo, hi))))
                if st < stat:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # scaled projected gradient as a fallback
            t = 1.0
            for _ in range(60):
                xt = np.clip(x - t * r, lo, hi)
                Et = f(xt)
                if np.isfinite(Et) and Et < E:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            return MinResult(x, "max_iter", E, stat, it)
        x, E = xt, Et
        g = grad(x)
        if np.max(np.abs(x)) > guard:
            return MinResult(x, "diverged", E, stat, it)
    return MinResult(x, "max_iter", E, stat, max_iter)


def _restrict(d, o, idx):
    df = d[idx]
    consecutive = np.diff(idx) == 1
    of = np.where(consecutive, o[idx[:-1]], 0.0)
    return df, of


def _is_definite(d, o, free):
    idx = np.nonzero(free)[0]
    if idx.size == 0:
        return True
    df, of = _restrict(d, o, idx)
    try:
        spd_solve(df, of, np.ones(idx.size))
        return True
    except LinAlgError:
        return False


def newton_critical(grad, bands, x0, m, tol=1e-9, max_iter=60, guard=np.inf,
                    floor=None):
    """Plain Newton for grad = 0 (any Morse index), merit |grad/m|_2."""
    x = x0.copy()
    g = grad(x)
    res = float(np.max(np.abs(g / m)))
    def done(x, res):
        return res <= tol or (floor is not None and res <= floor(x))

    for it in range(1, max_iter + 1):
        if done(x, res):
            return MinResult(x, "converged", np.nan, res, it - 1)
        d, o = bands(x)
        try:
            step = -tri_solve(d, o, g)
        except (LinAlgError, ValueError):
            return MinResult(x, "max_iter", np.nan, res, it)
        if not np.all(np.isfinite(step)):
            return MinResult(x, "max_iter", np.nan, res, it)
        merit = np.linalg.norm(g / m)
        t = 1.0
        ok = False
        for _ in range(30):
            xt = x + t * step
            gt = grad(xt)
            if np.all(np.isfinite(gt)) and np.linalg.norm(gt / m) < (1 - 1e-4 * t) * merit:
                ok = True
                break
            t *= 0.5
        if not ok:
            return MinResult(x, "max_iter", np.nan, res, it)
        x, g = xt, gt
        res = float(np.max(np.abs(g / m)))
        if np.max(np.abs(x)) > guard:
            return MinResult(x, "diverged", np.nan, res, it)
    status = "converged" if done(x, res) else "max_iter"
    return MinResult(x, status, np.nan, res, max_iter)


@dataclass
class PathResult:
    saddle: np.ndarray
    level: float
    sweeps: int
    stabilized: bool
    path: np.ndarray
    energies: np.ndarray


def _equidistribute(path, inner):
    seg = np.array([np.sqrt(max(inner(b - a, b - a), 0.0))
                    for a, b in zip(path[:-1], path[1:])])
    total = seg.sum()
    if total <= 0:
        return path, 0.0
    s = np.concatenate(([0.0], np.cumsum(seg))) / total
    targets = np.linspace(0.0, 1.0, path.shape[0])
    out = np.empty_like(path)
    for j, t in enumerate(targets):
        i = min(np.searchsorted(s, t, side="right") - 1, path.shape[0] - 2)
        w = 0.0 if s[i + 1] == s[i] else (t - s[i]) / (s[i + 1] - s[i])
        out[j] = (1 - w) * path[i] + w * path[i + 1]
    return out, total


def mountain_pass_path(f, grad, e1, e2, precond=None, inner=None, points=41,
                       max_sweeps=400, level_tol=1e-9, patience=8):
    """Discretised mountain-pass search between e1 and e2.

    Every sweep the highest interior node takes an Armijo-backtracked
    descent step orthogonal to the path (step 1.0 first), then the path is
    re-equidistributed. precond(x, g) maps a gradient to a descent
    direction (identity by default); inner is the matching inner product
    used for tangents and arclength.
    """
    precond = precond or (lambda x, g: g)
    inner = inner or (lambda a, b: float(np.dot(a, b)))
    ts = np.linspace(0.0, 1.0, points)
    path = np.array([(1 - t) * e1 + t * e2 for t in ts])
    E = np.array([f(x) for x in path])
    history = []
    stable = 0
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        j = int(np.argmax(E[1:-1])) + 1
        tang = path[j + 1] - path[j - 1]
        tn = inner(tang, tang)
        g = grad(path[j])
        d = precond(path[j], g)
        if tn > 0:
            d = d - inner(d, tang) / tn * tang
        slope = float(np.dot(g, d))
        if slope > 0:
            t = 1.0
            for _ in range(40):
                xt = path[j] - t * d
                Et = f(xt)
                if np.isfinite(Et) and Et <= E[j] - 1e-4 * t * slope:
                    path[j], E[j] = xt, Et
                    break
                t *= 0.5
        path, length = _equidistribute(path, inner)
        if length == 0:
            break
        E = np.array([f(x) for x in path])
        level = float(E[1:-1].max())
        if history and abs(history[-1] - level) <= level_tol * max(1.0, abs(level)):
            stable += 1
        else:
            stable = 0
        history.append(level)
        if stable >= patience:
            break
    kmax = int(np.argmax(E[1:-1])) + 1
    return PathResult(path[kmax].copy(), float(E[kmax]), sweep, stable >= patience,
                      path, E)
