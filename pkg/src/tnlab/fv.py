"""Implicit monotone finite-volume scheme in one space dimension.

Cell ``i`` carries ``u_i``; face ``j`` (``0 <= j <= n``) sits between cells
``j-1`` and ``j``, with ghost values ``u = w = 0`` on both sides. The ghost
values live on the boundary faces, so the boundary two-point gradients span
half a cell. The
residual of one implicit Euler step is

    R_i = (b_e(u_i) - b_e(u_i^old))/dt + (F_{i+1} - F_i)/dx
          - (D_{i+1} - D_i)/dx + psi_e(u_i) - f_i

with ``b_e = b + e Id``, ``psi_e = psi + e Id^+ + e Id^-`` (``Id^- = min(z, 0)``),
a Godunov convection flux ``F`` and the two-point diffusion flux ``D``.
Each step is solved on the continuation schedule ``e = 1e-2, 1e-4, 1e-8``
and, when admissible, ``e = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from .monotone import IntervalSet, MonotoneFn
from .problem import ProblemSpec, admissible

FD_STEP = 1.5e-8


class NonConvergence(RuntimeError):
    """Nonlinear solve failed; carries the residual norm and the worst cell."""

    def __init__(self, residual: float, cell: int, step: int | None = None, level: float | None = None):
        super().__init__(f"nonlinear solve did not converge: |R|_inf = {residual:.3e} at cell {cell}"
                         + (f", step {step}" if step is not None else "")
                         + (f", regularization {level:g}" if level is not None else ""))
        self.residual = residual
        self.cell = cell
        self.step = step
        self.level = level


@dataclass(frozen=True)
class Grid:
    n_cells: int
    x_lo: float = 0.0
    x_hi: float = 1.0
    dt: float = 1e-3
    n_steps: int = 1

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValueError("grid needs at least 4 cells")

    @classmethod
    def for_spec(cls, spec: ProblemSpec, cells: int | None = None, dt: float | None = None) -> "Grid":
        n = cells or spec.solver.cells
        dt = dt or spec.solver.dt
        steps = spec.n_steps(dt)
        if spec.mode == "parabolic":
            dt = spec.T / steps
        return cls(n, spec.x_lo, spec.x_hi, dt, steps)

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + self.dx * (np.arange(self.n_cells) + 0.5)

    @property
    def face_spacing(self) -> np.ndarray:
        """Two-point distances per face; the ghost values sit on the boundary faces."""
        h = np.full(self.n_cells + 1, self.dx)
        h[0] = h[-1] = 0.5 * self.dx
        return h

    @property
    def faces(self) -> np.ndarray:
        return self.x_lo + self.dx * np.arange(self.n_cells + 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class CellState:
    u: np.ndarray
    w: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_u(cls, spec: ProblemSpec, u) -> "CellState":
        u = np.asarray(u, dtype=float).copy()
        return cls(u, spec.phi(u), spec.b(u), spec.psi(u))

    def consistent(self, spec: ProblemSpec) -> bool:
        return (np.array_equal(self.w, spec.phi(self.u)) and np.array_equal(self.beta, spec.b(self.u))
                and np.array_equal(self.sigma, spec.psi(self.u)))


@dataclass(frozen=True)
class Regularization:
    """One continuation level: ``b + Id/k`` and ``psi + Id^+/n + Id^-/m``."""

    inv_k: float = 0.0
    inv_n: float = 0.0
    inv_m: float = 0.0

    @classmethod
    def level(cls, e: float) -> "Regularization":
        return cls(e, e, e)

    @property
    def scalar(self) -> float:
        return max(self.inv_k, self.inv_n, self.inv_m)

    def b(self, b: MonotoneFn, z):
        return b(z) + self.inv_k * z

    def b_prime(self, b: MonotoneFn, z):
        return b.derivative(z) + self.inv_k

    def psi(self, psi: MonotoneFn, z):
        return psi(z) + self.inv_n * np.maximum(z, 0.0) + self.inv_m * np.minimum(z, 0.0)

    def psi_prime(self, psi: MonotoneFn, z):
        return psi.derivative(z) + np.where(z >= 0, self.inv_n, self.inv_m)


def exact_level_admissible(spec: ProblemSpec) -> bool:
    """True iff no interval exists on which b, psi and (when diffusing) phi are all flat.

    Then the own-cell derivative of every residual is positive away from a
    null set and the unregularized scheme is uniquely solvable.
    """
    flat = spec.b.flat_segments()
    if spec.mode == "elliptic":
        flat = spec.psi.flat_segments()
    else:
        flat = flat.intersect(spec.psi.flat_segments())
    if spec.has_diffusion:
        flat = flat.intersect(spec.phi.flat_segments())
    return not any(hi > lo for lo, hi in flat)


def schedule_for(spec: ProblemSpec) -> tuple[float, ...]:
    s = tuple(spec.solver.schedule)
    if spec.solver.exact_final and exact_level_admissible(spec):
        s = s + (0.0,)
    return s


# ---------------------------------------------------------------------------
# numerical fluxes


class GodunovFlux:
    """Godunov flux of a continuous scalar flux on ``[-R, R]``.

    Interior local extrema are located once by dense sampling plus bounded
    scalar refinement; ``F(ul, ur)`` is then the minimum (``ul <= ur``) or
    maximum (``ul > ur``) over the interval of the endpoint values and the
    extrema inside it.
    """

    def __init__(self, f, R: float, samples: int = 4001, zero: bool = False):
        self.f = f
        self.zero = zero
        self.R = float(R)
        if zero:
            self.minima = np.zeros(0)
            self.maxima = np.zeros(0)
            return
        z = np.linspace(-self.R, self.R, samples)
        v = np.asarray(f(z), dtype=float)
        self.minima = self._extrema(z, v, f, +1)
        self.maxima = self._extrema(z, v, f, -1)
        self.min_vals = np.asarray(f(self.minima)) if self.minima.size else np.zeros(0)
        self.max_vals = np.asarray(f(self.maxima)) if self.maxima.size else np.zeros(0)

    @staticmethod
    def _extrema(z, v, f, sgn):
        s = sgn * v
        loc = np.zeros(z.size, dtype=bool)
        loc[1:-1] = (s[1:-1] <= s[:-2]) & (s[1:-1] <= s[2:])
        pts = []
        idx = np.nonzero(loc)[0]
        if idx.size == 0:
            return np.zeros(0)
        runs = np.split(idx, np.nonzero(np.diff(idx) > 1)[0] + 1)
        for run in runs:
            lo, hi = run[0], run[-1]
            if hi > lo:  # plateau: any interior point represents it
                pts.append(z[(lo + hi) // 2])
                continue
            a, b = z[lo - 1], z[lo + 1]
            res = minimize_scalar(lambda t: sgn * float(f(t)), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-13})
            pts.append(res.x if res.fun <= s[lo] else z[lo])
        return np.asarray(pts)

    def covers(self, u) -> bool:
        return self.zero or float(np.max(np.abs(u))) <= self.R

    def fprime(self, z):
        h = FD_STEP * (1.0 + np.abs(z))
        return (np.asarray(self.f(z + h)) - np.asarray(self.f(z - h))) / (2 * h)

    def __call__(self, ul, ur, with_partials: bool = False):
        ul = np.asarray(ul, dtype=float)
        ur = np.asarray(ur, dtype=float)
        if self.zero:
            z = np.zeros(np.broadcast(ul, ur).shape)
            return (z, z, z) if with_partials else z
        fl = np.asarray(self.f(ul), dtype=float)
        fr = np.asarray(self.f(ur), dtype=float)
        lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
        inc = ul <= ur
        fmin = np.minimum(fl, fr)
        fmax = np.maximum(fl, fr)
        if self.minima.size:
            inside = (self.minima[None, :] > lo[..., None]) & (self.minima[None, :] < hi[..., None])
            fmin = np.minimum(fmin, np.where(inside, self.min_vals[None, :], np.inf).min(axis=-1))
        if self.maxima.size:
            inside = (self.maxima[None, :] > lo[..., None]) & (self.maxima[None, :] < hi[..., None])
            fmax = np.maximum(fmax, np.where(inside, self.max_vals[None, :], -np.inf).max(axis=-1))
        F = np.where(inc, fmin, fmax).reshape(inc.shape)
        if not with_partials:
            return F if F.ndim else float(F)
        dl = self.fprime(ul)
        dr = self.fprime(ur)
        at_l = F == fl
        at_r = F == fr
        tie = at_l & at_r
        pl = np.where(tie, np.maximum(dl, 0.0), np.where(at_l, dl, 0.0))
        pr = np.where(tie, np.minimum(dr, 0.0), np.where(at_r, dr, 0.0))
        return F, pl, pr


def numerical_convection_flux(spec: ProblemSpec, u_left, u_right, R: float | None = None):
    """Godunov flux of ``spec.scalar_flux``."""
    R = R or max(4.0, 2 * float(np.max(np.abs([u_left, u_right]))) + 1.0)
    out = GodunovFlux(spec.scalar_flux, R, zero=not spec.has_convection)(np.asarray(u_left), np.asarray(u_right))
    return out if np.ndim(out) else float(out)


def numerical_diffusion_flux(spec: ProblemSpec, u_left, u_right, dx: float):
    """``k_face a0((phi(u_r) - phi(u_l)) / dx)``; exactly zero when ``phi(u_l) = phi(u_r)``."""
    from .diffusion import numerical_diffusion_flux as _d

    return _d(spec.diffusion, spec.phi, u_left, u_right, dx)


# ---------------------------------------------------------------------------
# the discrete operator


class Scheme:
    """Residual and tridiagonal Jacobian of one implicit step."""

    def __init__(self, spec: ProblemSpec, grid: Grid, R: float | None = None):
        self.spec = spec
        self.grid = grid
        self.elliptic = spec.mode == "elliptic"
        self.R = R or (1.5 * spec.working_range() + 1.0)
        self.conv = GodunovFlux(spec.scalar_flux, self.R, zero=not spec.has_convection)
        self.diffusing = spec.has_diffusion
        self.h = grid.face_spacing

    def _ensure_range(self, u):
        if not self.conv.covers(u):
            self.R = 2.0 * float(np.max(np.abs(u))) + 1.0
            self.conv = GodunovFlux(self.spec.scalar_flux, self.R, zero=self.conv.zero)

    def _padded(self, u):
        return np.concatenate([[0.0], u, [0.0]])

    def fluxes(self, u, partials: bool = False):
        """Face fluxes ``F``, ``D`` (length ``n + 1``), optionally with partials."""
        s = self.spec
        dx = self.grid.dx
        up = self._padded(u)
        ul, ur = up[:-1], up[1:]
        out = self.conv(ul, ur, with_partials=partials)
        if partials:
            F, Fl, Fr = out
        else:
            F = out
        if self.diffusing:
            wp = s.phi(up)
            wp[0] = wp[-1] = 0.0
            h = self.h
            xi = (wp[1:] - wp[:-1]) / h
            a = s.diffusion
            kf = a.face_k(ul, ur)
            D = kf * a.a0(xi)
            if partials:
                dp = s.phi.derivative(up)
                dp[0] = dp[-1] = 0.0
                kl, kr = a.face_k_partials(ul, ur)
                a0 = a.a0(xi)
                a0p = a.a0_prime(xi)
                Dl = kl * a0 - kf * a0p * dp[:-1] / h
                Dr = kr * a0 + kf * a0p * dp[1:] / h
        else:
            D = np.zeros_like(F)
            if partials:
                Dl = Dr = D
        if partials:
            return F, D, (Fl, Fr, Dl, Dr)
        return F, D

    def residual(self, u, u_old, f, reg: Regularization, dt: float):
        self._ensure_range(u)
        s = self.spec
        dx = self.grid.dx
        F, D = self.fluxes(u)
        r = (np.diff(F) - np.diff(D)) / dx + reg.psi(s.psi, u) - f
        if not self.elliptic:
            r = r + (reg.b(s.b, u) - reg.b(s.b, u_old)) / dt
        return r

    def jacobian(self, u, reg: Regularization, dt: float):
        """Banded storage ``(3, n)`` of ``dR/du`` for :func:`scipy.linalg.solve_banded`."""
        s = self.spec
        dx = self.grid.dx
        _, _, (Fl, Fr, Dl, Dr) = self.fluxes(u, partials=True)
        diag = (Fl[1:] - Fr[:-1]) / dx - (Dl[1:] - Dr[:-1]) / dx + reg.psi_prime(s.psi, u)
        if not self.elliptic:
            diag = diag + reg.b_prime(s.b, u) / dt
        lower = (-Fl + Dl)[1:-1] / dx     # dR_i / du_{i-1}, i = 1..n-1
        upper = (Fr - Dr)[1:-1] / dx      # dR_i / du_{i+1}, i = 0..n-2
        ab = np.zeros((3, u.size))
        ab[0, 1:] = upper
        ab[1] = diag
        ab[2, :-1] = lower
        return ab


# ---------------------------------------------------------------------------
# nonlinear solvers


@dataclass
class SolveStats:
    newton: int = 0
    sweeps: int = 0
    levels: list = field(default_factory=list)


def _newton(scheme, u, u_old, f, reg, dt, tol, max_iter, stats):
    r = scheme.residual(u, u_old, f, reg, dt)
    nr = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if nr <= tol:
            return u, nr, True
        ab = scheme.jacobian(u, reg, dt)
        try:
            du = solve_banded((1, 1), ab, -r, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            return u, nr, False
        stats.newton += 1
        alpha = 1.0
        accepted = False
        n2 = float(np.dot(r, r))
        for _ in range(30):
            ut = u + alpha * du
            rt = scheme.residual(ut, u_old, f, reg, dt)
            if float(np.dot(rt, rt)) < (1.0 - 1e-4 * alpha) * n2 or float(np.max(np.abs(rt))) <= tol:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return u, nr, False
        u, r = ut, rt
        nr = float(np.max(np.abs(r)))
    return u, nr, nr <= tol


def _gauss_seidel(scheme, u, u_old, f, reg, dt, tol, sweeps, stats):
    """Red-black nonlinear Gauss-Seidel with cellwise bracketing and bisection.

    Cells of one colour do not interact, so every cellwise root of a colour
    is computed simultaneously; each cell residual is nondecreasing in its
    own unknown, so bracketing and bisection always succeed.
    """
    n = u.size
    colours = (np.arange(0, n, 2), np.arange(1, n, 2))
    u = u.copy()
    nr = float(np.max(np.abs(scheme.residual(u, u_old, f, reg, dt))))
    for _ in range(sweeps):
        if nr <= tol:
            break
        stats.sweeps += 1
        for idx in colours:
            def local(vals):
                ut = u.copy()
                ut[idx] = vals
                return scheme.residual(ut, u_old, f, reg, dt)[idx]

            x = u[idx]
            rx = local(x)
            h = np.maximum(1e-3, 1e-2 * np.abs(x))
            lo = np.where(rx > 0, x - h, x)
            hi = np.where(rx > 0, x, x + h)
            for _ in range(200):
                rl, rh = local(lo), local(hi)
                bad_lo = rl > 0
                bad_hi = rh < 0
                if not (bad_lo.any() or bad_hi.any()):
                    break
                span = hi - lo
                lo = np.where(bad_lo, lo - 2 * span, lo)
                hi = np.where(bad_hi, hi + 2 * span, hi)
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                rm = local(mid)
                pos = rm > 0
                hi = np.where(pos, mid, hi)
                lo = np.where(pos, lo, mid)
                if float(np.max(hi - lo)) <= 1e-15 * (1.0 + float(np.max(np.abs(mid)))):
                    break
            u[idx] = 0.5 * (lo + hi)
        nr = float(np.max(np.abs(scheme.residual(u, u_old, f, reg, dt))))
    return u, nr, nr <= tol


def solve_level(scheme, u_start, u_old, f, reg, dt, tol, settings, stats):
    u, nr, ok = _newton(scheme, u_start, u_old, f, reg, dt, tol, settings.max_newton, stats)
    if ok:
        return u, nr
    sweeps_left = settings.max_sweeps
    while sweeps_left > 0:
        chunk = min(10, sweeps_left)
        u, nr, ok = _gauss_seidel(scheme, u, u_old, f, reg, dt, tol, chunk, stats)
        sweeps_left -= chunk
        if ok:
            return u, nr
        u, nr, ok = _newton(scheme, u, u_old, f, reg, dt, tol, settings.max_newton, stats)
        if ok:
            return u, nr
    r = scheme.residual(u, u_old, f, reg, dt)
    raise NonConvergence(float(np.max(np.abs(r))), int(np.argmax(np.abs(r))), level=reg.scalar)


def step(spec: ProblemSpec, state: CellState, dt: float, reg: Regularization | None = None,
         tol: float | None = None, f=None, grid: Grid | None = None, scheme: Scheme | None = None,
         schedule=None, stats: SolveStats | None = None) -> CellState:
    """One implicit step from ``state``.

    With ``reg`` given only that level is solved; otherwise the continuation
    schedule of ``spec`` is run with warm starts.
    """
    u_old = np.asarray(state.u, dtype=float)
    grid = grid or Grid(u_old.size, spec.x_lo, spec.x_hi, dt, 1)
    scheme = scheme or Scheme(spec, grid)
    tol = spec.solver.tol if tol is None else tol
    stats = stats or SolveStats()
    if f is None:
        f = np.zeros_like(u_old)
    levels = [reg] if reg is not None else [Regularization.level(e) for e in (schedule or schedule_for(spec))]
    u = u_old.copy()
    for lev in levels:
        u, _ = solve_level(scheme, u, u_old, f, lev, dt, tol, spec.solver, stats)
        stats.levels.append(lev.scalar)
    return CellState.from_u(spec, u)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    spec: ProblemSpec
    grid: Grid
    times: np.ndarray
    u: np.ndarray            # (n_steps + 1, n_cells)
    f: np.ndarray            # (n_steps, n_cells), source used in step k -> k+1
    residuals: np.ndarray    # final |R|_inf per step
    level: float             # final regularization level
    newton: int = 0
    sweeps: int = 0
    report: object = None    # DiagnosticsReport, filled by solve()

    @property
    def n_steps(self) -> int:
        return self.u.shape[0] - 1

    def state(self, k: int) -> CellState:
        return CellState.from_u(self.spec, self.u[k])

    @property
    def final(self) -> CellState:
        return self.state(self.n_steps)

    def transformed(self, fn) -> np.ndarray:
        return fn(self.u) if fn is not None else self.u

    def b_eff(self, z):
        return self.spec.b(z) + self.level * z

    def psi_eff(self, z):
        return self.spec.psi(z) + self.level * z


def solve(spec: ProblemSpec, grid: Grid | None = None, u0=None, source=None,
          check: bool | None = None, require_admissible: bool = True) -> Trajectory:
    """All time steps of the scheme plus the a priori assertions.

    ``u0`` (cell values) and ``source`` (``(n_steps, n_cells)`` array)
    override the data of ``spec`` on the solver grid.
    """
    if require_admissible:
        admissible(spec)
    grid = grid or Grid.for_spec(spec)
    scheme = Scheme(spec, grid)
    n, N, dt = grid.n_cells, grid.n_steps, grid.dt
    u = spec.initial(n) if u0 is None else np.asarray(u0, dtype=float).copy()
    if source is None:
        if spec.mode == "elliptic":
            source = spec.source_at(0.0, n)[None, :]
        else:
            source = np.stack([spec.source_at((k + 1) * dt, n) for k in range(N)])
    sched = schedule_for(spec)
    U = np.empty((N + 1, n))
    U[0] = u
    res = np.empty(N)
    stats = SolveStats()
    final = Regularization.level(sched[-1])
    tol = spec.solver.tol
    for k in range(N):
        f = source[k]
        cur = U[k]
        w = cur.copy()
        for e in sched:
            lev = Regularization.level(e)
            try:
                w, _ = solve_level(scheme, w, cur, f, lev, dt, tol, spec.solver, stats)
            except NonConvergence as exc:
                exc.step = k
                raise NonConvergence(exc.residual, exc.cell, k, e) from None
        U[k + 1] = w
        res[k] = float(np.max(np.abs(scheme.residual(w, cur, f, final, dt))))
    traj = Trajectory(spec, grid, grid.times.copy(), U, np.asarray(source, dtype=float), res,
                      final.scalar, stats.newton, stats.sweeps)
    if spec.mode == "elliptic":
        traj.times = np.array([0.0, 0.0])
    check = spec.solver.check_invariants if check is None else check
    if check and spec.mode == "parabolic":
        from .analysis import a_priori_report

        traj.report = a_priori_report(traj)
    return traj


# ---------------------------------------------------------------------------
# discrete entropy residuals


ROUNDING_ULPS = 16


def entropy_residual_field(traj: Trajectory, c: float, sign: str = "plus",
                           with_scale: bool = False):
    """Cell/step field ``E(c, +-)``; nonpositive for exact solutions of the scheme.

    The entropy flux is the Godunov flux evaluated on the truncated states
    ``u ∨ c`` (plus) or ``u ∧ c`` (minus), ghosts included, and the
    diffusion term is the flux difference of the truncated state. With
    ``with_scale`` the sum of the magnitudes of all terms entering each
    cell is returned as well, which bounds the rounding error of ``E``.
    """
    spec, g = traj.spec, traj.grid
    sch = Scheme(spec, g, R=1.5 * max(float(np.max(np.abs(traj.u))), abs(c)) + 1.0)
    dt, dx = g.dt, g.dx
    b = traj.b_eff
    fc = float(spec.scalar_flux(c))
    out = np.empty((traj.n_steps, g.n_cells))
    scale = np.empty_like(out)
    for k in range(traj.n_steps):
        un, uo = traj.u[k + 1], traj.u[k]
        up = np.concatenate([[0.0], un, [0.0]])
        if sign == "plus":
            v, vo, vp = np.maximum(un, c), np.maximum(uo, c), np.maximum(up, c)
            ind = un > c
        else:
            v, vo, vp = np.minimum(un, c), np.minimum(uo, c), np.minimum(up, c)
            ind = un < c
        Q = sch.conv(vp[:-1], vp[1:]) - fc
        if sch.diffusing:
            wp = spec.phi(vp)
            xi = (wp[1:] - wp[:-1]) / sch.h
            D = spec.diffusion.face_k(vp[:-1], vp[1:]) * spec.diffusion.a0(xi)
        else:
            D = np.zeros_like(Q)
        src = np.where(ind, traj.psi_eff(un) - traj.f[k], 0.0)
        body = (b(v) - b(vo)) / dt + np.diff(Q) / dx - np.diff(D) / dx
        out[k] = body + src if sign == "plus" else -body - src
        mag = lambda a: np.abs(a[:-1]) + np.abs(a[1:])  # noqa: E731
        scale[k] = ((np.abs(b(v)) + np.abs(b(vo))) / dt + (mag(Q) + 2 * abs(fc)) / dx + mag(D) / dx
                    + np.abs(traj.psi_eff(un)) + np.abs(traj.f[k]))
    return (out, scale) if with_scale else out


def entropy_residuals(traj: Trajectory, levels, sign: str = "plus") -> dict:
    """Max over cells/steps of the positive part of ``E(c, sign)`` for each ``c``.

    All cells count when ``c >= 0`` (plus) or ``c <= 0`` (minus); otherwise
    the two boundary cells are left out. Values within ``ROUNDING_ULPS``
    machine epsilons of the magnitude of the summed terms are not
    distinguishable from zero and count as zero.
    """
    eps = ROUNDING_ULPS * np.finfo(float).eps
    out = {}
    for c in levels:
        E, S = entropy_residual_field(traj, float(c), sign, with_scale=True)
        up_to_boundary = (c >= 0) if sign == "plus" else (c <= 0)
        if not up_to_boundary:
            E, S = E[:, 1:-1], S[:, 1:-1]
        out[float(c)] = float(np.max(np.maximum(E - eps * S, 0.0))) if E.size else 0.0
    return out
