"""Discretisation, solvers and continuation for
-Delta_p u = lam c |u|^(p-2) u + mu |grad u|^p + k h with zero boundary data."""
from .grid import Field, Grid, interval, make_grid, radial
from .kernels import BACKEND
from .nonlinearity import ProblemSpec, TruncationData, hopf_cole, hopf_cole_inv
from .solvers import SolveReport, build_lower_solution, solve_Plambda
from .spectra import gamma1, k0, m_p

__all__ = ["BACKEND", "Field", "Grid", "ProblemSpec", "SolveReport", "TruncationData",
           "build_lower_solution", "gamma1", "hopf_cole", "hopf_cole_inv", "interval",
           "k0", "m_p", "make_grid", "radial", "solve_Plambda"]
__version__ = "0.1.0"
