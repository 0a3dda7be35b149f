"""Diagnostic functionals on trajectories."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .monotone import IntervalSet, MonotoneFn, StieltjesPrimitive

SLACK = 10.0


@dataclass
class Record:
    name: str
    bound: float
    measured: float
    passed: bool
    detail: str = ""


@dataclass
class DiagnosticsReport:
    records: list[Record] = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def add(self, name, bound, measured, passed=None, detail="") -> Record:
        if passed is None:
            passed = bool(measured <= bound)
        r = Record(name, float(bound), float(measured), bool(passed), detail)
        self.records.append(r)
        return r

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[Record]:
        return [r for r in self.records if not r.passed]

    def merge(self, other: "DiagnosticsReport") -> "DiagnosticsReport":
        self.records += other.records
        self.tables.update(other.tables)
        return self

    def to_dict(self) -> dict:
        return {"passed": self.passed, "records": [asdict(r) for r in self.records],
                "tables": _plain(self.tables)}


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# gradients


def face_gradients(traj, k: int) -> np.ndarray:
    """Two-point gradients of ``w`` on all ``n + 1`` faces of level ``k`` (ghost ``w = 0``)."""
    w = np.concatenate([[0.0], traj.spec.phi(traj.u[k]), [0.0]])
    return np.diff(w) / traj.grid.face_spacing


def gradient_energy(traj) -> float:
    """``sum_steps sum_faces dt h_j |xi_j|^p`` over levels ``1..N``."""
    g, p = traj.grid, traj.spec.diffusion.p
    h = g.face_spacing
    return float(sum(g.dt * np.sum(h * np.abs(face_gradients(traj, k)) ** p)
                     for k in range(1, traj.n_steps + 1)))


def localized_gradient(traj, F: IntervalSet) -> float:
    """``I_F``: gradient energy restricted to the values of ``u`` in ``F``.

    On each face ``w`` is interpolated linearly between the two cell values
    and the face contribution ``dt h_j |xi_j|^p`` is weighted by the fraction
    of ``[w_l, w_r]`` lying in ``phi(F)``. The map ``F -> I_F`` is then
    additive, monotone, equals :func:`gradient_energy` for ``F = R`` and
    vanishes exactly when ``meas phi(F) = 0``.
    """
    g, p, phi = traj.grid, traj.spec.diffusion.p, traj.spec.phi
    G = F.image(phi)
    h = g.face_spacing
    tot = 0.0
    for k in range(1, traj.n_steps + 1):
        w = np.concatenate([[0.0], phi(traj.u[k]), [0.0]])
        lo, hi = np.minimum(w[:-1], w[1:]), np.maximum(w[:-1], w[1:])
        span = hi - lo
        frac = np.divide(G.overlap_length(lo, hi), span, out=np.zeros_like(span), where=span > 0)
        xi = (w[1:] - w[:-1]) / h
        tot += g.dt * float(np.sum(h * frac * np.abs(xi) ** p))
    return tot


def fit_constant(I: list[float], meas: list[float]) -> float:
    """Smallest ``C`` with ``I_j <= C meas_j`` on every member with positive measure."""
    ratios = [i / m for i, m in zip(I, meas) if m > 0]
    return float(max(ratios)) if ratios else 0.0


# ---------------------------------------------------------------------------
# distances


def inject(u: np.ndarray, n_fine: int) -> np.ndarray:
    """Piecewise-constant injection of cell values (last axis) onto ``n_fine`` cells."""
    n = u.shape[-1]
    if n_fine % n:
        raise ValueError(f"cannot inject {n} cells onto {n_fine}")
    return np.repeat(u, n_fine // n, axis=-1)


def _levels(traj):
    return traj.u[1:]


def l1_distance(traj_a, traj_b, transform=None, transform_b=None, include_initial: bool = False) -> float:
    """``sum dt dx |T_a(u_a) - T_b(u_b)|`` over time levels ``1..N``.

    Trajectories need identical time grids; cell counts may differ by an
    integer factor, in which case both are injected onto the finer grid.
    """
    ga, gb = traj_a.grid, traj_b.grid
    if traj_a.n_steps != traj_b.n_steps or not np.isclose(ga.dt, gb.dt):
        raise ValueError("time grids differ")
    if (ga.x_lo, ga.x_hi) != (gb.x_lo, gb.x_hi):
        raise ValueError("domains differ")
    tb = transform if transform_b is None else transform_b
    sl = slice(0, None) if include_initial else slice(1, None)
    A = traj_a.u[sl] if transform is None else transform(traj_a.u[sl])
    B = traj_b.u[sl] if tb is None else tb(traj_b.u[sl])
    n = max(A.shape[-1], B.shape[-1])
    A, B = inject(A, n), inject(B, n)
    dt = ga.dt if traj_a.spec.mode == "parabolic" else 1.0
    return float(dt * (ga.x_hi - ga.x_lo) / n * np.sum(np.abs(A - B)))


def gradient_lp_distance(traj_a, traj_b, p: float | None = None) -> float:
    """``(sum dt dx |grad_h w_a - grad_h w_b|^p)^(1/p)`` on a common grid."""
    if traj_a.grid.n_cells != traj_b.grid.n_cells or traj_a.n_steps != traj_b.n_steps:
        raise ValueError("grids differ")
    p = p or traj_a.spec.diffusion.p
    g = traj_a.grid
    h = g.face_spacing
    tot = 0.0
    for k in range(1, traj_a.n_steps + 1):
        d = face_gradients(traj_a, k) - face_gradients(traj_b, k)
        tot += g.dt * float(np.sum(h * np.abs(d) ** p))
    return tot ** (1.0 / p)


def final_l1(traj, exact, t: float | None = None, transform=None) -> float:
    """``sum dx |u(T) - exact(x, T)|`` at the last level."""
    g = traj.grid
    t = traj.times[-1] if t is None else t
    u = traj.u[-1] if transform is None else transform(traj.u[-1])
    return float(g.dx * np.sum(np.abs(u - exact(g.centers, t))))


def translate_modulus(traj, deltas) -> dict[float, float]:
    """``sum dt dx |w(t + Delta) - w(t)|`` over levels ``1..N - m`` with ``Delta = m dt``."""
    g = traj.grid
    W = traj.spec.phi(traj.u)
    out = {}
    for d in deltas:
        m = d / g.dt
        mi = int(round(m))
        if abs(m - mi) > 1e-9 * max(1.0, m) or mi < 0 or mi > traj.n_steps:
            raise ValueError(f"shift {d} is not a multiple of dt = {g.dt}")
        if mi == 0:
            out[float(d)] = 0.0
            continue
        diff = np.abs(W[1 + mi:] - W[1:traj.n_steps + 1 - mi])
        out[float(d)] = float(g.dt * g.dx * np.sum(diff))
    return out


def eoc_table(errors) -> list[float]:
    """``log2(e_k / e_{k+1})`` for successive grids."""
    e = np.asarray(list(errors.values()) if isinstance(errors, dict) else errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(x) for x in np.log2(e[:-1] / e[1:])]


# ---------------------------------------------------------------------------
# a priori bounds, contraction and comparison


def _coercivity_constant(spec, M: float) -> float:
    r = np.linspace(-M, M, 257)
    C = np.asarray(spec.diffusion.coercivity(r=r), dtype=float) * np.ones_like(r)
    return 1.0 / float(np.max(C))


def linf_bound(traj) -> tuple[np.ndarray, np.ndarray]:
    """Measured ``|b(u^n)|_inf`` and the bound ``|b_e(u0)|_inf + sum dt |f|_inf`` per level."""
    g = traj.grid
    meas = np.max(np.abs(traj.spec.b(traj.u)), axis=1)
    fsum = np.concatenate([[0.0], np.cumsum(g.dt * np.max(np.abs(traj.f), axis=1))])
    bound = float(np.max(np.abs(traj.b_eff(traj.u[0])))) + fsum
    return meas, bound


def energy_bound(traj) -> tuple[np.ndarray, np.ndarray]:
    """Left and right sides of the discrete energy inequality per level.

    Left: ``sum dx B_e(u^n) + sum_{k<=n} dt [dx psi(u) phi(u) + c h_j |xi_j|^p]``;
    right: ``sum dx B_e(u^0) + sum_{k<=n} dt dx f phi(u)`` with
    ``B_e = ∫ phi d(b + e Id)`` and ``c = 1 / max C(r)``.
    """
    spec, g = traj.spec, traj.grid
    B = StieltjesPrimitive(spec.phi, spec.b)
    if traj.level:
        B_id = StieltjesPrimitive(spec.phi, MonotoneFn.identity())
        Be = lambda z: B(z) + traj.level * B_id(z)
    else:
        Be = B
    M = float(np.max(np.abs(traj.u))) + 1e-12
    c = _coercivity_constant(spec, M)
    p = spec.diffusion.p
    h = g.face_spacing
    N = traj.n_steps
    lhs = np.empty(N + 1)
    rhs = np.empty(N + 1)
    lhs[0] = rhs[0] = g.dx * float(np.sum(Be(traj.u[0])))
    acc_l = acc_r = 0.0
    for k in range(1, N + 1):
        u = traj.u[k]
        w = spec.phi(u)
        xi = face_gradients(traj, k)
        acc_l += g.dt * (g.dx * float(np.sum(spec.psi(u) * w)) + c * float(np.sum(h * np.abs(xi) ** p)))
        acc_r += g.dt * g.dx * float(np.sum(traj.f[k - 1] * w))
        lhs[k] = g.dx * float(np.sum(Be(u))) + acc_l
        rhs[k] = lhs[0] + acc_r
    return lhs, rhs


def a_priori_report(traj) -> DiagnosticsReport:
    tol = traj.spec.solver.tol
    rep = DiagnosticsReport()
    meas, bound = linf_bound(traj)
    j = int(np.argmax(meas - bound))
    rep.add("linf_bound", bound[j] + SLACK * tol, meas[j], detail=f"worst level {j}")
    lhs, rhs = energy_bound(traj)
    j = int(np.argmax(lhs - rhs))
    rep.add("energy_bound", rhs[j] + SLACK * tol, lhs[j], detail=f"worst level {j}")
    rep.add("residual", tol, float(np.max(traj.residuals)) if traj.residuals.size else 0.0)
    return rep


def contraction_slack(traj, traj_hat) -> float:
    """Largest violation of the discrete L1 contraction inequality over all levels.

    ``sum dx (b(u^n) - b(u^^n))^+ + sum_{k<=n} dt dx (psi(u) - psi(u^))^+``
    minus ``sum dx (b(u0) - b(u^0))^+ + sum_{k<=n} dt dx (f - f^)^+``.
    """
    g = traj.grid
    be, bh = traj.b_eff(traj.u), traj_hat.b_eff(traj_hat.u)
    left = g.dx * np.sum(np.maximum(be - bh, 0.0), axis=1)
    dpsi = g.dt * g.dx * np.sum(np.maximum(traj.psi_eff(traj.u[1:]) - traj_hat.psi_eff(traj_hat.u[1:]), 0.0), axis=1)
    df = g.dt * g.dx * np.sum(np.maximum(traj.f - traj_hat.f, 0.0), axis=1)
    left[1:] += np.cumsum(dpsi)
    right = np.full_like(left, left[0])
    right[1:] += np.cumsum(df)
    return float(np.max(left - right))


def comparison_slack(traj, traj_hat) -> float:
    """``max (b(u) - b(u^))`` over all cells and levels; nonpositive when ordered."""
    return float(np.max(traj.spec.b(traj.u) - traj_hat.spec.b(traj_hat.u)))


def decreasing(seq) -> bool:
    s = list(seq)
    return all(b < a for a, b in zip(s, s[1:]))


def converging(seq) -> bool:
    """Decreasing with the final value at most half the first."""
    s = list(seq)
    return decreasing(s) and s[-1] <= 0.5 * s[0]
