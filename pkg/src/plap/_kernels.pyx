# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell and per-node kernels (see _kernels_py for reference)."""
import numpy as np
from libc.math cimport fabs, pow, log, exp, sqrt, tgamma


cdef inline double powp(double x, double e) nogil:
    """x**e for x >= 0; exact shortcuts for the common exponents."""
    if e == 1.0:
        return x
    if e == 2.0:
        return x * x
    if e == 0.5:
        return sqrt(x)
    if e == 1.5:
        return x * sqrt(x)
    if e == 3.0:
        return x * x * x
    if e == 0.0:
        return 1.0
    if x > 0.0 and e > 0.0:
        return exp(e * log(x))
    return pow(x, e)


def plap_energy(const double[::1] u, const double[::1] rho, const double[::1] dx, double p):
    cdef Py_ssize_t i, nc = dx.shape[0]
    cdef double s, acc = 0.0
    for i in range(nc):
        s = (u[i + 1] - u[i]) / dx[i]
        acc += rho[i] * dx[i] * powp(fabs(s), p)
    return acc / p


def plap_flux(const double[::1] u, const double[::1] rho, const double[::1] dx, double p):
    cdef Py_ssize_t i, nc = dx.shape[0]
    out = np.empty(nc)
    cdef double[::1] o = out
    cdef double s
    for i in range(nc):
        s = (u[i + 1] - u[i]) / dx[i]
        if s > 0.0:
            o[i] = rho[i] * powp(s, p - 1.0)
        elif s < 0.0:
            o[i] = -rho[i] * powp(-s, p - 1.0)
        else:
            o[i] = 0.0
    return out


def plap_gradient(const double[::1] u, const double[::1] rho, const double[::1] dx, double p):
    cdef Py_ssize_t i, nc = dx.shape[0]
    out = np.zeros(nc + 1)
    cdef double[::1] o = out
    cdef double s, f
    for i in range(nc):
        s = (u[i + 1] - u[i]) / dx[i]
        if s > 0.0:
            f = rho[i] * powp(s, p - 1.0)
        elif s < 0.0:
            f = -rho[i] * powp(-s, p - 1.0)
        else:
            f = 0.0
        o[i] -= f
        o[i + 1] += f
    return out


def plap_hessian(const double[::1] u, const double[::1] rho, const double[::1] dx, double p, double eps):
    cdef Py_ssize_t i, nc = dx.shape[0]
    diag = np.zeros(nc + 1)
    off = np.empty(nc)
    cdef double[::1] d = diag
    cdef double[::1] o = off
    cdef double s, cw
    for i in range(nc):
        if p == 2.0:
            cw = rho[i] / dx[i]
        else:
            s = (u[i + 1] - u[i]) / dx[i]
            cw = rho[i] * (p - 1.0) * powp(s * s + eps * eps, (p - 2.0) / 2.0) / dx[i]
        d[i] += cw
        d[i + 1] += cw
        o[i] = -cw
    return diag, off


def g_values(const double[::1] s, double p, double mu):
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double a = mu / (p - 1.0), y, phi
    out = np.zeros(n)
    cdef double[::1] o = out
    for i in range(n):
        y = 1.0 + a * s[i]
        if y > 0.0:
            phi = y * log(y) / a
            if phi > 0.0:
                o[i] = powp(phi, p - 1.0)
            elif phi < 0.0:
                o[i] = -powp(-phi, p - 1.0)
    return out


def g_prime_values(const double[::1] s, double p, double mu, double eps):
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double a = mu / (p - 1.0), y, ly, phi, w
    out = np.zeros(n)
    cdef double[::1] o = out
    for i in range(n):
        y = 1.0 + a * s[i]
        if y > 0.0:
            ly = log(y)
            phi = y * ly / a
            if p == 2.0:
                w = 1.0
            elif eps > 0.0:
                w = powp(phi * phi + eps * eps, (p - 2.0) / 2.0)
            else:
                w = powp(fabs(phi), p - 2.0)
            o[i] = (p - 1.0) * w * (ly + 1.0)
    return out


def G_values(const double[::1] s, double p, double mu, const double[::1] tq, const double[::1] wq):
    cdef Py_ssize_t i, j, n = s.shape[0], m = tq.shape[0]
    cdef double a = mu / (p - 1.0), y, z, acc
    cdef double floor_val
    out = np.empty(n)
    cdef double[::1] o = out
    if p == 2.0:
        floor_val = 0.25 / (a * a)
    else:
        floor_val = tgamma(p) / pow(p, p) / pow(a, p)
    for i in range(n):
        y = 1.0 + a * s[i]
        if y <= 0.0:
            o[i] = floor_val
        elif p == 2.0:
            o[i] = (y * y * log(y) / 2.0 - (y * y - 1.0) / 4.0) / (a * a)
        else:
            z = log(y)
            acc = 0.0
            for j in range(m):
                acc += wq[j] * exp(p * z * tq[j])
            o[i] = powp(fabs(z), p) * acc / pow(a, p)
    return out
