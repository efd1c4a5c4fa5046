"""Discrete energy of the transformed problem and strong-form residuals.

Layout: cell slopes s_i = (v_{i+1} - v_i)/dx_i, cell measures w_i and
rho_i = w_i/dx_i, dual-cell node measures m_j. Then

    energy(v) = sum_i w_i |s_i|^p / p - sum_j m_j F(x_j, v_j)

and the strong residual at a node is (gradient of energy)_j / m_j.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import Field, values_of
from .nonlinearity import (TruncationData, g_fun, primitive, reaction,
                           reaction_prime)


class IndefiniteJacobian(np.linalg.LinAlgError):
    pass


class EnergyModel:
    def __init__(self, spec, trunc=None, epsilon_reg=None):
        if epsilon_reg is None:
            # a wide regularisation understates the curvature near flat
            # cells when p < 2 and makes Newton overshoot there
            epsilon_reg = 1e-6 if spec.p >= 2 else 1e-10
        if not 0.0 <= epsilon_reg <= 1e-4:
            raise ValueError(f"epsilon_reg must lie in [0, 1e-4], got {epsilon_reg}")
        self.spec = spec
        self.trunc = trunc if trunc is not None else TruncationData.trivial(spec)
        self.epsilon_reg = float(epsilon_reg)
        g = spec.grid
        self.grid = g
        self.rho = np.ascontiguousarray(g.radial_factor)
        self.dx = np.ascontiguousarray(g.dx)
        self.mw = np.asarray(g.node_weights)
        self.free = g.free
        self.ifree = np.nonzero(self.free)[0]

    @property
    def p(self):
        return self.spec.p

    def _args(self):
        s = self.spec
        return s.c, s.datum, self.trunc.alpha, s.p, s.mu, s.lam

    def full(self, x):
        """Embed free-node values into a nodal vector."""
        v = np.zeros(self.grid.n)
        v[self.ifree] = x
        return v

    # reaction hooks; subclasses swap in other zeroth-order terms
    def F(self, v):
        return primitive(v, *self._args())

    def f(self, v):
        return reaction(v, *self._args())

    def f_prime(self, v):
        return reaction_prime(v, *self._args(), eps=self.epsilon_reg)

    def energy(self, v):
        v = np.ascontiguousarray(values_of(v), dtype=float)
        e = kernels.plap_energy(v, self.rho, self.dx, self.p)
        return e - float(np.dot(self.mw, self.F(v)))

    def gradient(self, v):
        v = np.ascontiguousarray(values_of(v), dtype=float)
        gr = kernels.plap_gradient(v, self.rho, self.dx, self.p)
        gr -= self.mw * self.f(v)
        gr[~self.free] = 0.0
        return gr

    def hess_bands(self, v):
        """Regularised Hessian as (diag, off) over all nodes."""
        v = np.ascontiguousarray(values_of(v), dtype=float)
        d, o = kernels.plap_hessian(v, self.rho, self.dx, self.p, self.epsilon_reg)
        d = d - self.mw * self.f_prime(v)
        return d, o

    # free-node views used by the solvers
    def fe(self, x):
        return self.energy(self.full(x))

    def fg(self, x):
        return self.gradient(self.full(x))[self.ifree]

    def fb(self, x):
        return self.free_bands(self.full(x))

    def ffloor(self, x):
        """Rounding floor of the strong residual at x.

        Two sources: cancellation between fluxes of size |s|^(p-1), and the
        rounding of the nodal values themselves amplified by the operator
        curvature |s|^(p-2) (large at near-flat cells when p < 2). Slopes
        below the resolution of the nodal values are clipped."""
        eps = np.finfo(float).eps
        v = np.ascontiguousarray(self.full(x))
        p = self.p
        vmax = float(np.max(np.abs(v), initial=0.0))
        s = np.abs(np.diff(v)) / self.dx
        s_res = eps * max(vmax, 1e-300) / self.dx
        flux = self.rho * s ** (p - 1.0)
        curv = self.rho * (p - 1.0) * np.maximum(s, s_res) ** (p - 2.0) / self.dx
        size = np.zeros(self.grid.n)
        size[:-1] += 1e3 * flux + 10.0 * curv * vmax
        size[1:] += 1e3 * flux + 10.0 * curv * vmax
        size = size / self.mw + 1e3 * np.abs(self.f(v))
        return eps * float(np.max(size[self.ifree], initial=0.0))

    @property
    def fm(self):
        return self.mw[self.ifree]

    def free_bands(self, v):
        d, o = self.hess_bands(v)
        idx = self.ifree
        return d[idx], o[idx[:-1]]

    def residual(self, v):
        """Strong residual -Delta_p v - f_lambda(v) at free nodes, 0 elsewhere."""
        return self.gradient(v) / self.mw

    def grad_norm(self, v):
        return float(np.max(np.abs(self.residual(v))))

    def param_derivative(self, v, name):
        """d(gradient)/d(param) for param in {"lam", "k"}, upper branch."""
        s = self.spec
        v = values_of(v)
        a = s.a
        t = np.maximum(v, self.trunc.alpha)
        if name == "lam":
            d = -self.mw * s.c * np.asarray(g_fun(t, s.p, s.mu))
        elif name == "k":
            d = -self.mw * (1.0 + a * t) ** (s.p - 1.0) * s.h
        else:
            raise ValueError(f"unknown parameter {name!r}")
        d[~self.free] = 0.0
        return d


def energy(v, model):
    return model.energy(v)


def energy_gradient(v, model):
    return Field(model.grid, model.gradient(v))


def jacobian(v, model):
    """Symmetric tridiagonal Jacobian of the gradient on free nodes (CSR)."""
    d, o = model.free_bands(v)
    return sp.diags([o, d, o], [-1, 0, 1], format="csr")


def check_definite(d, o):
    """Raise IndefiniteJacobian unless the tridiagonal matrix is SPD."""
    piv = d[0]
    if piv <= 0:
        raise IndefiniteJacobian("non-positive pivot at row 0")
    for i in range(1, d.shape[0]):
        piv = d[i] - o[i - 1] ** 2 / piv
        if piv <= 0:
            raise IndefiniteJacobian(f"non-positive pivot at row {i}")


# -- strong residuals -----------------------------------------------------

def neg_divergence(u, grid, p):
    """Conservative -Delta_p u at every node (garbage at Dirichlet nodes)."""
    u = np.ascontiguousarray(values_of(u), dtype=float)
    gr = kernels.plap_gradient(u, np.ascontiguousarray(grid.radial_factor),
                               np.ascontiguousarray(grid.dx), float(p))
    return gr / grid.node_weights


def _expm1_ratio(x):
    out = np.ones_like(x)
    m = np.abs(x) > 1e-8
    out[m] = np.expm1(x[m]) / x[m]
    out[~m] = 1.0 + x[~m] / 2.0 + x[~m] ** 2 / 6.0
    return out


def gradient_term(u, grid, p, mu):
    """Discrete -mu |grad u|^p compatible with the exponential change of unknown.

    Each cell flux rho |s|^(p-2) s is weighted by the ratio between the
    secant slope of exp(a u) over the cell and exp(a u) at the node; the
    first-order part of that weight reproduces -mu times the average of
    |s|^p over the two neighbouring cells.
    """
    u = np.ascontiguousarray(values_of(u), dtype=float)
    a = mu / (p - 1.0)
    flux = kernels.plap_flux(u, np.ascontiguousarray(grid.radial_factor),
                             np.ascontiguousarray(grid.dx), float(p))
    du = np.diff(u)
    right = _expm1_ratio(a * du) ** (p - 1.0) - 1.0
    left = _expm1_ratio(-a * du) ** (p - 1.0) - 1.0
    out = np.zeros(u.shape[0])
    out[:-1] -= right * flux
    out[1:] += left * flux
    return out / grid.node_weights


def residual_P(u, spec):
    """-Delta_p u - lam c |u|^(p-2) u - mu |grad u|^p - k h at free nodes."""
    grid = spec.grid
    uv = values_of(u)
    p = spec.p
    r = neg_divergence(uv, grid, p) + gradient_term(uv, grid, p, spec.mu)
    r -= spec.lam * spec.c * np.abs(uv) ** (p - 1.0) * np.sign(uv)
    r -= spec.datum
    r[~grid.free] = 0.0
    return Field(grid, r) if isinstance(u, Field) else r


def residual_Q(v, spec, trunc):
    """Strong residual of the transformed problem (no regularisation)."""
    return EnergyModel(spec, trunc).residual(v)


def nodal_slope(u, grid):
    """Central-difference slope at nodes; 0 at the centre of a ball."""
    u = values_of(u)
    x = grid.nodes
    xi = np.zeros_like(u)
    xi[1:-1] = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    if grid.kind == "interval":
        xi[0] = (u[1] - u[0]) / (x[1] - x[0])
    xi[-1] = (u[-1] - u[-2]) / (x[-1] - x[-2])
    return xi


@dataclass
class GeneralQuasilinearProblem:
    """-Delta_p u + H(x, u, grad u) = f.

    H_term is called with nodal arrays (x, s, xi). gradient_exponent is
    the declared growth of H in xi, used only by comparison checks.
    """
    H_term: Callable
    f_rhs: np.ndarray
    gradient_exponent: float | None = None
    monotone_in_s: bool = False


def residual_general(u, prob, p):
    grid = u.grid
    uv = u.values
    xi = nodal_slope(uv, grid)
    r = neg_divergence(uv, grid, p) + prob.H_term(grid.nodes, uv, xi) - values_of(prob.f_rhs)
    r = np.asarray(r, dtype=float)
    r[~grid.free] = 0.0
    return Field(grid, r)


class SourceModel(EnergyModel):
    """Energy of -Delta_p w = b with a fixed nodal source b."""

    def __init__(self, spec, source, epsilon_reg=None):
        super().__init__(spec, None, epsilon_reg)
        self.source = np.asarray(source, dtype=float)

    def F(self, v):
        return self.source * v

    def f(self, v):
        return self.source

    def f_prime(self, v):
        return np.zeros_like(v)


__all__ = ["EnergyModel", "GeneralQuasilinearProblem", "IndefiniteJacobian",
           "check_definite", "energy", "energy_gradient", "jacobian",
           "residual_P", "residual_Q", "residual_general", "neg_divergence",
           "gradient_term", "nodal_slope", "SourceModel"]
