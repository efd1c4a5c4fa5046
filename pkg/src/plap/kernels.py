"""Kernel backend selection.

The compiled extension is used when it imports cleanly; otherwise, or
when PLAP_PURE_PYTHON=1 is set, the numpy versions are used. The
quadrature for the primitive always runs in numpy.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("PLAP_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

plap_energy = _impl.plap_energy
plap_flux = _impl.plap_flux
plap_gradient = _impl.plap_gradient
plap_hessian = _impl.plap_hessian
g_values = _impl.g_values
g_prime_values = _impl.g_prime_values
# the primitive is a dense quadrature of exponentials; numpy's vectorised exp
# beats a scalar C loop there, so it stays on the numpy path
G_values = _kernels_py.G_values
