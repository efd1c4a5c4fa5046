"""Scalar nonlinearities of the transformed problem.

With a = mu/(p-1), the exponential change of unknown
v = (exp(a u) - 1)/a turns the gradient term into a zeroth-order one,
and the reaction becomes lam*c*g(v) + (1 + a v)^(p-1) * k*h.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma

import numpy as np
from scipy.special import roots_jacobi

from . import kernels
from .grid import Field, Grid, values_of

GAUSS_NODES = 80


def _arr(s):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=float)))


def _shape_like(s, out):
    return float(out[0]) if np.ndim(s) == 0 else out.reshape(np.shape(s))


@lru_cache(maxsize=32)
def _jacobi_rule(p):
    x, w = roots_jacobi(GAUSS_NODES, 0.0, p - 1.0)
    t = (1.0 + x) / 2.0
    return np.ascontiguousarray(t), np.ascontiguousarray(w / 2.0 ** p)


def floor_value(p, mu):
    """The value -(p-1)/mu below which g vanishes."""
    return -(p - 1.0) / mu


def g_fun(s, p, mu):
    return _shape_like(s, kernels.g_values(_arr(s), float(p), float(mu)))


def g_prime(s, p, mu, eps=0.0):
    """Derivative of g; eps > 0 regularises |phi|^(p-2) for Jacobians."""
    return _shape_like(s, kernels.g_prime_values(_arr(s), float(p), float(mu), float(eps)))


def G_fun(s, p, mu):
    p = float(p)
    tq, wq = _jacobi_rule(p)
    return _shape_like(s, kernels.G_values(_arr(s), p, float(mu), tq, wq))


def G_floor(p, mu):
    a = mu / (p - 1.0)
    return gamma(p) / p ** p / a ** p


def H_fun(s, p, mu):
    return np.asarray(g_fun(s, p, mu)) * np.asarray(s) / p - np.asarray(G_fun(s, p, mu))


# -- problem data -------------------------------------------------------

@dataclass(eq=False)
class ProblemSpec:
    """Data of -Delta_p u = lam c |u|^(p-2) u + mu |grad u|^p + k h."""
    grid: Grid
    p: float
    mu: float
    lam: float
    c: np.ndarray
    h: np.ndarray
    k: float = 1.0
    mu_plus: float | None = None
    mu_minus: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p = float(self.p)
        self.mu = float(self.mu)
        self.lam = float(self.lam)
        self.k = float(self.k)
        self.c = np.array(values_of(self.c), dtype=float)
        self.h = np.array(values_of(self.h), dtype=float)
        if self.p <= 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.k < 0:
            raise ValueError(f"k must be nonnegative, got {self.k}")
        for name, arr in (("c", self.c), ("h", self.h)):
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} must have one value per node")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(self.c < 0) or not np.any(self.c > 0):
            raise ValueError("c must be nonnegative and positive somewhere")
        if self.mu_plus is None:
            self.mu_plus = self.mu

    @property
    def a(self):
        return self.mu / (self.p - 1.0)

    @property
    def datum(self):
        return self.k * self.h

    def with_(self, **kw):
        args = dict(grid=self.grid, p=self.p, mu=self.mu, lam=self.lam, c=self.c,
                    h=self.h, k=self.k, mu_plus=self.mu_plus,
                    mu_minus=self.mu_minus, meta=dict(self.meta))
        args.update(kw)
        return ProblemSpec(**args)


@dataclass(eq=False)
class TruncationData:
    """Lower solution of the original problem and its transform."""
    lower: np.ndarray
    alpha: np.ndarray
    gap: float
    k_trunc: float | None = None
    M: float | None = None

    @classmethod
    def from_lower(cls, lower, p, mu, **kw):
        lower = np.asarray(lower, dtype=float)
        a = mu / (p - 1.0)
        alpha = np.expm1(a * lower) / a
        gap = float(np.min(alpha) + 1.0 / a)
        if gap <= 0:
            raise ValueError("transformed lower solution reaches the singular level")
        return cls(lower, alpha, gap, **kw)

    @classmethod
    def trivial(cls, spec):
        return cls.from_lower(np.zeros(spec.grid.n), spec.p, spec.mu)


# -- reaction terms -----------------------------------------------------

def reaction(s, c, hk, alpha, p, mu, lam):
    """f_lambda at nodes: values are frozen at alpha below it."""
    a = mu / (p - 1.0)
    t = np.where(s >= alpha, s, alpha)
    out = (1.0 + a * t) ** (p - 1.0) * hk
    if lam != 0.0:
        out = out + lam * c * np.asarray(g_fun(t, p, mu))
    return out


def reaction_prime(s, c, hk, alpha, p, mu, lam, eps=0.0):
    a = mu / (p - 1.0)
    upper = s >= alpha
    t = np.where(upper, s, alpha)
    out = mu * (1.0 + a * t) ** (p - 2.0) * hk
    if lam != 0.0:
        out = out + lam * c * np.asarray(g_prime(t, p, mu, eps))
    return np.where(upper, out, 0.0)


def _primitive_upper(s, c, hk, p, mu, lam):
    a = mu / (p - 1.0)
    out = (1.0 + a * s) ** p * hk / (a * p)
    if lam != 0.0:
        out = out + lam * c * np.asarray(G_fun(s, p, mu))
    return out


def primitive(s, c, hk, alpha, p, mu, lam):
    """F_lambda: C^1 in s, affine below alpha with slope f_lambda(alpha)."""
    upper = s >= alpha
    t = np.where(upper, s, alpha)
    top = _primitive_upper(t, c, hk, p, mu, lam)
    below = top + reaction(alpha, c, hk, alpha, p, mu, lam) * (s - alpha)
    return np.where(upper, top, below)


def _node_args(spec, trunc, x_index):
    idx = slice(None) if x_index is None else x_index
    return spec.c[idx], spec.datum[idx], trunc.alpha[idx]


def f_lambda(x_index, s, spec, trunc):
    c, hk, al = _node_args(spec, trunc, x_index)
    return reaction(np.asarray(s, dtype=float), c, hk, al, spec.p, spec.mu, spec.lam)


def F_lambda(x_index, s, spec, trunc):
    c, hk, al = _node_args(spec, trunc, x_index)
    return primitive(np.asarray(s, dtype=float), c, hk, al, spec.p, spec.mu, spec.lam)


# -- change of unknown ----------------------------------------------------

def hopf_cole(u, p, mu):
    a = mu / (p - 1.0)
    vals = np.expm1(a * values_of(u)) / a
    return Field(u.grid, vals) if isinstance(u, Field) else vals


def hopf_cole_inv(v, p, mu):
    a = mu / (p - 1.0)
    vals = values_of(v)
    bad = np.nonzero(vals <= -1.0 / a)[0]
    if bad.size:
        raise ValueError(f"value at node {bad[0]} is at or below {-1.0 / a:g}; "
                         "the inverse transform is undefined there")
    out = np.log1p(a * vals) / a
    return Field(v.grid, out) if isinstance(v, Field) else out
