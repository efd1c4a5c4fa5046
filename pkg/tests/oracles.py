"""Reference values computed independently of the package."""
import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def gamma1_closed_form(p, length=1.0):
    """First eigenvalue of the 1D p-Laplacian with Dirichlet ends."""
    pi_p = 2.0 * math.pi / (p * math.sin(math.pi / p))
    return (p - 1.0) * (pi_p / length) ** p


def _first_zero(gam, p, length):
    # u' = |phi|^(1/(p-1)) sign(phi), phi' = -gam |u|^(p-2) u
    q = 1.0 / (p - 1.0)

    def rhs(t, y):
        u, phi = y
        return [np.sign(phi) * abs(phi) ** q, -gam * np.sign(u) * abs(u) ** (p - 1.0)]

    sol = solve_ivp(rhs, (0.0, length), [0.0, 1.0], rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def gamma1_shooting(p, length=1.0, bracket=None):
    """Shooting on u(0)=0, u'(0)=1 for the value that puts the first zero at length."""
    lo, hi = bracket or (0.5 * gamma1_closed_form(p, length), 1.5 * gamma1_closed_form(p, length))
    return brentq(lambda g: _first_zero(g, p, length), lo, hi, xtol=1e-12, rtol=1e-12)


def g_reference(s, p, mu):
    """Transformed power nonlinearity written directly from the change of unknown."""
    a = mu / (p - 1.0)
    if 1.0 + a * s <= 0:
        return 0.0
    u = math.log1p(a * s) / a
    return (1.0 + a * s) ** (p - 1.0) * abs(u) ** (p - 2.0) * u if u != 0 else 0.0


def G_quad(s, p, mu):
    val, _ = quad(g_reference, 0.0, s, args=(p, mu), epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def fd_directional(f, x, d, h=1e-5):
    """Fourth-order central difference of f along d."""
    return (-f(x + 2 * h * d) + 8 * f(x + h * d) - 8 * f(x - h * d) + f(x - 2 * h * d)) / (12 * h)


def fd_gradient(f, x, neighbours, h=1e-5):
    """Componentwise fd_directional; each step is capped at 1% of the jumps to
    neighbouring values so a perturbation never crosses a nearly flat cell."""
    out = np.empty(x.size)
    for j in range(x.size):
        jumps = [abs(x[j] - nb) for nb in neighbours(j)]
        hj = min([h] + [max(0.01 * d, 1e-8) for d in jumps])
        e = np.zeros(x.size)
        e[j] = 1.0
        out[j] = fd_directional(f, x, e, hj)
    return out


def _shoot_end(lam, s, k):
    def blowup(t, y):
        return y[1] + 1e6
    blowup.terminal = True
    sol = solve_ivp(lambda t, y: [y[1], -lam * y[0] - y[1] ** 2 - k], (0.0, 1.0), [0.0, s],
                    rtol=1e-12, atol=1e-13, events=blowup)
    return sol.y[0, -1] if sol.status == 0 else -1e6


def fold_lambda_shooting(k, s_range=(0.5, 16.0)):
    """Turning point in lam of -u'' = lam u + u'^2 + k on (0,1), u(0)=u(1)=0.

    Each initial slope s fixes the lam with u(1)=0; the fold is the largest such lam."""
    from scipy.optimize import minimize_scalar

    def lam_of(s):
        if _shoot_end(0.0, s, k) <= 0:
            return 0.0
        hi = 10.0
        while _shoot_end(hi, s, k) > 0:
            hi *= 1.5
        return brentq(lambda l: _shoot_end(l, s, k), 0.0, hi, xtol=1e-12)

    r = minimize_scalar(lambda s: -lam_of(s), bounds=s_range, method="bounded",
                        options={"xatol": 1e-8})
    return -r.fun
