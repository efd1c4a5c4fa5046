"""Variational constants: first eigenvalue, m_p and its variants, k0,
and the Sobolev-type sufficient condition for m_p > 0.

Every infimum is computed as the maximum of a scale-invariant quotient
D(w)/A(w), A(w) = sum_cells w_i |s_i|^p, by L-BFGS in the coordinates
z = U w where U^T U is the p = 2 stiffness matrix.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky_banded, solve_banded
from scipy.optimize import minimize

from . import kernels
from .grid import Field, norm_W1p, values_of

INF = "+inf"


@dataclass
class SpectralReport:
    value: float
    minimizer: Field | None
    iterations: int
    residual: float
    status: str = "ok"
    constraint_active: str | None = None

    @property
    def is_infinite(self):
        return self.status == INF

    def json_value(self):
        return INF if self.is_infinite else self.value


@dataclass
class _QuotientMax:
    ratio: float
    w: np.ndarray
    iterations: int
    residual: float


def _restricted_stiffness(grid, idx):
    cw = np.asarray(grid.radial_factor) / np.asarray(grid.dx)
    d = np.zeros(grid.n)
    d[:-1] += cw
    d[1:] += cw
    df = d[idx]
    of = np.where(np.diff(idx) == 1, -cw[idx[:-1]], 0.0)
    return df, of


def maximize_quotient(grid, p, dfun, allowed=None, restarts=20, seed=0,
                      maxiter=4000, start=None):
    """max over w of D(w)/A(w); dfun(w_full) -> (D, dD/dw on all nodes).

    allowed masks nodes that may be nonzero (on top of Dirichlet nodes).
    Returns None when no node is free.
    """
    free = grid.free.copy()
    if allowed is not None:
        free &= allowed
    idx = np.nonzero(free)[0]
    if idx.size == 0:
        return None
    n = grid.n
    rho = np.ascontiguousarray(grid.radial_factor)
    dx = np.ascontiguousarray(grid.dx)
    df, of = _restricted_stiffness(grid, idx)
    ab = np.zeros((2, idx.size))
    ab[0, 1:] = of
    ab[1] = df
    U = cholesky_banded(ab)  # upper form: U[0,1:] superdiag, U[1] diag
    Ut = np.zeros_like(U)
    Ut[0] = U[1]
    Ut[1, :-1] = U[0, 1:]

    def w_of(z):
        return solve_banded((0, 1), U, z, check_finite=False)

    def z_of(w):
        out = U[1] * w
        out[:-1] += U[0, 1:] * w[1:]
        return out

    def full(w):
        v = np.zeros(n)
        v[idx] = w
        return v

    def obj(z):
        v = full(w_of(z))
        A = p * kernels.plap_energy(v, rho, dx, p)
        gA = p * kernels.plap_gradient(v, rho, dx, p)[idx]
        D, gD = dfun(v)
        gD = gD[idx]
        J = -D / A
        gJ = -(gD * A - D * gA) / (A * A)
        return J, solve_banded((1, 0), Ut, gJ, check_finite=False)

    rng = np.random.default_rng(seed)
    starts = []
    w0 = start[idx] if start is not None else solve_banded(
        (1, 1), np.vstack([np.r_[0.0, of], df, np.r_[of, 0.0]]),
        np.asarray(grid.node_weights)[idx], check_finite=False)
    starts.append(z_of(w0))
    for _ in range(max(restarts - 1, 0)):
        starts.append(rng.normal(size=idx.size) + np.abs(rng.normal()) * starts[0] / np.linalg.norm(starts[0]) * np.sqrt(idx.size))
    best = None
    total_it = 0
    for z0 in starts:
        z0 = z0 / np.linalg.norm(z0)
        r = minimize(obj, z0, jac=True, method="L-BFGS-B",
                     options={"maxiter": maxiter, "ftol": 1e-16, "gtol": 1e-13,
                              "maxcor": 20})
        total_it += r.nit
        if best is None or r.fun < best.fun - 1e-14 * abs(best.fun):
            best = r
    z = best.x
    w = full(w_of(z))
    _, gz = obj(z)
    return _QuotientMax(-float(best.fun), w, total_it,
                        float(np.linalg.norm(gz) * np.linalg.norm(z)))


def _weighted_power(grid, weight, p):
    m = np.asarray(grid.node_weights) * weight

    def dfun(v):
        av = np.abs(v)
        return float(np.dot(m, av ** p)), p * m * av ** (p - 1) * np.sign(v)
    return dfun


def _normalized(grid, w, p, positive=True):
    nrm = norm_W1p(w, p, grid)
    w = w / nrm
    if positive and np.sum(w) < 0:
        w = -w
    return Field(grid, w)


def gamma1(c, p, grid, restarts=20, seed=0):
    """First eigenvalue of -Delta_p u = gamma c |u|^(p-2) u."""
    c = values_of(c)
    if np.any(c < 0) or not np.any(c > 0):
        raise ValueError("weight must be nonnegative and positive somewhere")
    q = maximize_quotient(grid, p, _weighted_power(grid, c, p), restarts=restarts, seed=seed)
    if q is None or q.ratio <= 0:
        return SpectralReport(float("nan"), None, 0, float("inf"), "failed")
    return SpectralReport(1.0 / q.ratio, _normalized(grid, q.w, p), q.iterations,
                          q.residual / q.ratio)


def _mp_from_weight(h, p, coef, grid, allowed=None, restarts=20, seed=0, label=None):
    """inf over unit w (vanishing off `allowed`) of A(w) - coef*sum m h |w|^p."""
    h = values_of(h)
    if coef == 0.0 or not np.any(h > 0):
        free = grid.free if allowed is None else grid.free & allowed
        if not np.any(free):
            return SpectralReport(math.inf, None, 0, 0.0, INF, label)
        status = "ok" if coef == 0.0 or not np.any(h < 0) and np.all(h == 0) else "not_attained"
        return SpectralReport(1.0, None, 0, 0.0, status, label)
    q = maximize_quotient(grid, p, _weighted_power(grid, h, p), allowed=allowed,
                          restarts=restarts, seed=seed)
    if q is None:
        return SpectralReport(math.inf, None, 0, 0.0, INF, label)
    if q.ratio <= 0:
        return SpectralReport(1.0, None, q.iterations, q.residual, "not_attained", label)
    return SpectralReport(1.0 - coef * q.ratio, _normalized(grid, q.w, p),
                          q.iterations, q.residual, "ok", label)


def m_p(h, p, mu, grid, restarts=20, seed=0):
    """inf over ||w|| = 1 of int |grad w|^p - (mu/(p-1))^(p-1) h |w|^p."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    return _mp_from_weight(h, p, (mu / (p - 1.0)) ** (p - 1.0), grid,
                           restarts=restarts, seed=seed)


def support_mask(c, rel=1e-14):
    c = values_of(c)
    return c > rel * np.max(c)


def m_p_lambda_pm(spec, restarts=20, seed=0):
    """The pair of infima with mu replaced by the sup norms of its positive
    and negative parts; for lam != 0, fields must vanish where c > 0."""
    grid = spec.grid
    allowed = None
    label = None
    if spec.lam != 0.0:
        allowed = ~support_mask(spec.c)
        label = "w = 0 on the support of c"
    out = []
    for mnorm in (spec.mu_plus, spec.mu_minus):
        coef = (mnorm / (spec.p - 1.0)) ** (spec.p - 1.0)
        out.append(_mp_from_weight(spec.datum, spec.p, coef, grid, allowed,
                                   restarts, seed, label))
    return tuple(out)


def k0(h, p, mu, grid, restarts=20, seed=0):
    """Largest k with m_p(k h) > 0, as a SpectralReport."""
    h = values_of(h)
    if not np.any(h > 0):
        return SpectralReport(math.inf, None, 0, 0.0, INF)
    q = maximize_quotient(grid, p, _weighted_power(grid, h, p), restarts=restarts, seed=seed)
    a = mu / (p - 1.0)
    if q is None or not q.ratio > 1e-300:
        val = k0_bisection(h, p, mu, grid, seed=seed)
        return SpectralReport(val, None, 0, float("nan"), "bisection")
    return SpectralReport(a ** (1.0 - p) / q.ratio, _normalized(grid, q.w, p),
                          q.iterations, q.residual / q.ratio)


def k0_bisection(h, p, mu, grid, k_hi=None, rel=1e-6, seed=0, restarts=4):
    """Bisection on the sign of m_p(k h)."""
    lo, hi = 0.0, k_hi or 1.0
    while m_p(hi * values_of(h), p, mu, grid, restarts, seed).value > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            return math.inf
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if m_p(mid * values_of(h), p, mu, grid, restarts, seed).value > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- sufficient condition -------------------------------------------------

def _capacity_constant(grid, p):
    """min over nodes j of min A(u) subject to u_j = 1 (monotone profile)."""
    seg = np.asarray(grid.dx) * np.asarray(grid.radial_factor) ** (-1.0 / (p - 1.0))
    right = np.cumsum(seg[::-1])[::-1]        # sum over cells i >= j
    left = np.concatenate(([0.0], np.cumsum(seg)))[:-1]  # cells i < j
    idx = np.nonzero(grid.free)[0]
    cap = right[idx] ** (1.0 - p)
    if grid.kind == "interval":
        cap = cap + left[idx] ** (1.0 - p)
    return float(cap.min())


def sobolev_case(grid, p):
    N = grid.dim
    if p > N:
        return "iii"
    if p == N:
        return "ii"
    return "i"


def sufficient_condition(h, p, mu, grid, q=None, restarts=8, seed=0):
    """Check ||h+||_X < ((p-1)/mu)^(p-1) S with the discrete optimal S.

    The space X and the constant S follow the relation between p and the
    dimension (1 for an interval). Returns a dict with holds, margin,
    case, S and lhs. The constant is discrete, so this is a desk-scale
    surrogate of the continuum statement.
    """
    h = values_of(h)
    N = grid.dim
    case = sobolev_case(grid, p)
    hp = np.maximum(h, 0.0)
    mw = np.asarray(grid.node_weights)
    if case == "ii":
        if q is None or q <= 1:
            raise ValueError("p equal to the dimension needs an exponent q > 1")
    elif q is not None:
        raise ValueError("q only applies when p equals the dimension")
    if case == "iii":
        S = _capacity_constant(grid, p)
        lhs = float(np.dot(mw, hp))
    else:
        if case == "i":
            t = N * p / (N - p)
            r = N / p
        else:
            t = N * q / (q - 1.0)
            r = q
        lhs = float(np.dot(mw, hp ** r) ** (1.0 / r))

        def dfun(v):
            av = np.abs(v)
            s = float(np.dot(mw, av ** t))
            val = s ** (p / t)
            grad = p * s ** (p / t - 1.0) * mw * av ** (t - 1.0) * np.sign(v)
            return val, grad
        qm = maximize_quotient(grid, p, dfun, restarts=restarts, seed=seed)
        S = 1.0 / qm.ratio
    rhs = ((p - 1.0) / mu) ** (p - 1.0) * S
    return {"holds": bool(lhs < rhs), "margin": rhs - lhs, "case": case, "S": S,
            "lhs": lhs, "rhs": rhs, "surrogate": "discrete constant"}
