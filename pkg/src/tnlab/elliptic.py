"""Stationary problem ``psi(u) + (f(u))_x - (a(u, phi(u)_x))_x = s`` with zero Dirichlet data.

The discrete problem is the parabolic residual with the time term deleted,
so both modes share one code path.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fv import Grid, Scheme, Regularization, Trajectory, solve
from .problem import HypothesisRejection, ProblemSpec


@dataclass(frozen=True)
class EllipticState:
    u: np.ndarray
    w: np.ndarray
    sigma: np.ndarray
    residual: float
    trajectory: Trajectory

    @property
    def x(self) -> np.ndarray:
        return self.trajectory.grid.centers


def as_elliptic(spec: ProblemSpec) -> ProblemSpec:
    """Same nonlinearities with ``b = 0`` and the source as ``s``."""
    from .monotone import MonotoneFn

    return replace(spec, mode="elliptic", b=MonotoneFn.zero(), T=1.0)


def solve_elliptic(spec: ProblemSpec, grid: Grid | None = None, tol: float | None = None,
                   s=None) -> EllipticState:
    if spec.mode != "elliptic":
        raise ValueError("spec.mode must be 'elliptic'")
    rep = spec.report
    if rep is not None and "H'5" in rep and rep["H'5"].status == "fail":
        raise HypothesisRejection(rep["H'5"], rep)
    if tol is not None:
        spec = spec.with_solver(tol=tol)
    grid = grid or Grid.for_spec(spec)
    src = None if s is None else np.asarray(s, dtype=float)[None, :]
    traj = solve(spec, grid, source=src)
    u = traj.u[-1]
    final = Regularization.level(traj.level)
    r = Scheme(spec, grid).residual(u, u, traj.f[0], final, 1.0)
    return EllipticState(u, spec.phi(u), spec.psi(u), float(np.max(np.abs(r))), traj)


def elliptic_perturbation_study(spec: ProblemSpec, family, build, grid: Grid | None = None,
                                runner=None) -> list[dict]:
    """Distances ``|psi_n(u_n) - psi(u)|_1`` and ``|phi_n(u_n) - phi(u)|_1`` along a family.

    ``build(spec, n)`` returns the perturbed instance ``(S_n)``.
    """
    from .experiments import parallel_map

    grid = grid or Grid.for_spec(spec)
    base = solve_elliptic(spec, grid)
    members = [build(spec, n) for n in family]
    states = parallel_map(lambda sp: solve_elliptic(sp, grid), members) if runner is None else runner(members)
    rows = []
    for n, sp, st in zip(family, members, states):
        rows.append({
            "n": n,
            "psi_l1": float(grid.dx * np.sum(np.abs(sp.psi(st.u) - spec.psi(base.u)))),
            "phi_l1": float(grid.dx * np.sum(np.abs(sp.phi(st.u) - spec.phi(base.u)))),
        })
    return rows
