"""Numpy implementations of the per-cell and per-node kernels.

Same signatures as the compiled module; used when the extension is
missing or when PLAP_PURE_PYTHON=1.
"""
from math import gamma

import numpy as np


def _slopes(u, dx):
    return np.diff(u) / dx


def plap_energy(u, rho, dx, p):
    s = _slopes(u, dx)
    return float(np.sum(rho * dx * np.abs(s) ** p) / p)


def plap_flux(u, rho, dx, p):
    """rho * |s|^(p-2) s per cell."""
    s = _slopes(u, dx)
    return rho * np.abs(s) ** (p - 1.0) * np.sign(s)


def plap_gradient(u, rho, dx, p):
    flux = plap_flux(u, rho, dx, p)
    out = np.zeros(u.shape[0])
    out[:-1] -= flux
    out[1:] += flux
    return out


def plap_hessian(u, rho, dx, p, eps):
    s = _slopes(u, dx)
    if p == 2.0:
        cw = rho / dx
    else:
        cw = rho * (p - 1.0) * (s * s + eps * eps) ** ((p - 2.0) / 2.0) / dx
    diag = np.zeros(u.shape[0])
    diag[:-1] += cw
    diag[1:] += cw
    return diag, -cw


def g_values(s, p, mu):
    a = mu / (p - 1.0)
    y = 1.0 + a * s
    out = np.zeros_like(s, dtype=float)
    m = y > 0.0
    ym = y[m]
    phi = ym * np.log(ym) / a
    out[m] = np.abs(phi) ** (p - 1.0) * np.sign(phi)
    return out


def g_prime_values(s, p, mu, eps):
    a = mu / (p - 1.0)
    y = 1.0 + a * s
    out = np.zeros_like(s, dtype=float)
    m = y > 0.0
    ym = y[m]
    ly = np.log(ym)
    phi = ym * ly / a
    if p == 2.0:
        w = np.ones_like(phi)
    elif eps > 0.0:
        w = (phi * phi + eps * eps) ** ((p - 2.0) / 2.0)
    else:
        with np.errstate(divide="ignore"):
            w = np.abs(phi) ** (p - 2.0)
    out[m] = (p - 1.0) * w * (ly + 1.0)
    return out


def G_values(s, p, mu, tq, wq):
    """Antiderivative of g from 0, via z = ln(1 + a s).

    G(s) = a^-p |z|^p * int_0^1 t^(p-1) exp(p z t) dt, with (tq, wq) a
    Gauss rule for the weight t^(p-1) on [0, 1].
    """
    a = mu / (p - 1.0)
    y = 1.0 + a * np.asarray(s, dtype=float)
    out = np.empty_like(y)
    m = y > 0.0
    if p == 2.0:
        ym = y[m]
        out[m] = (ym * ym * np.log(ym) / 2.0 - (ym * ym - 1.0) / 4.0) / (a * a)
        out[~m] = 0.25 / (a * a)
        return out
    z = np.log(y[m])
    vals = np.exp(np.outer(p * z, tq)) @ wq
    out[m] = np.abs(z) ** p * vals / a ** p
    out[~m] = gamma(p) / p ** p / a ** p
    return out
