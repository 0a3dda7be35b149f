"""Numerical lab for triply nonlinear degenerate parabolic problems.

``b(u)_t + f(u)_x - (a(u, phi(u)_x))_x + psi(u) = f`` on an interval with
zero Dirichlet data, solved by an implicit monotone finite-volume scheme.
"""
from .analysis import DiagnosticsReport, l1_distance, localized_gradient, translate_modulus
from .diffusion import Coefficient, DiffusionFlux
from .elliptic import solve_elliptic
from .entropy import EntropyPair, RegularizedSign
from .fv import CellState, Grid, NonConvergence, Regularization, Trajectory, solve, step
from .hypotheses import HypothesisReport, check_problem
from .monotone import IntervalSet, MonotoneFn, Piece
from .problem import ConfigError, HypothesisRejection, ProblemSpec, load, loads

__version__ = "0.1.0"
