"""Refinement and perturbation studies, plus trajectory output."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracles
from .analysis import (DiagnosticsReport, converging, eoc_table, final_l1, gradient_lp_distance,
                       l1_distance)
from .fv import Grid, Trajectory, schedule_for, solve
from .hypotheses import check_h8_uniform, check_structure
from .monotone import MonotoneFn
from .problem import HypothesisRejection, ProblemSpec, to_dict

THREADS_ENV = "TNLAB_THREADS"
DEFAULT_FAMILY = (2, 4, 8, 16, 32)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over a thread pool sized by ``TNLAB_THREADS``."""
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass
class ExperimentPlan:
    config: str
    axis: str = "grid"                 # grid | data | coefficients | single
    family: tuple = DEFAULT_FAMILY
    grids: tuple = ()
    out: str | None = None
    seed: int = 0
    strong: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = list(self.family)
        d["grids"] = list(self.grids)
        return d


# ---------------------------------------------------------------------------
# perturbation families


def perturb_coefficients_member(spec: ProblemSpec, n: float) -> ProblemSpec:
    """``(b_n, psi_n, phi_n)`` per the ``[perturb]`` section (default ``b + Id/n``)."""
    cfg = spec.perturb or {}
    kw = {}
    for key in ("b", "psi", "phi"):
        rule = cfg.get(key, "add_identity" if key == "b" and not cfg else "none")
        fn = getattr(spec, key)
        if rule == "none":
            continue
        if rule == "add_identity":
            kw[key] = fn.plus_identity(1.0 / n)
        elif rule == "stretch":
            kw[key] = fn.scale_argument(1.0 + 1.0 / n)
        elif rule == "chamfer":
            kw[key] = fn.chamfer(1.0 / n)
        else:
            raise ValueError(f"unknown coefficient perturbation {rule!r} for {key}")
    return replace(spec, **kw)


def perturb_data_member(spec: ProblemSpec, n: float, cells: int):
    """``(u0_n, f_n)`` on the solver grid (default ``u0 + sin(2 pi x)/n``)."""
    cfg = spec.perturb or {}
    x = spec.cell_centers(cells)
    u0 = spec.initial(cells)
    rule = cfg.get("u0", "add_sine")
    if rule == "add_sine":
        u0 = u0 + np.sin(2 * np.pi * (x - spec.x_lo) / (spec.x_hi - spec.x_lo)) / n
    elif rule != "none":
        raise ValueError(f"unknown data perturbation {rule!r} for u0")
    frule = cfg.get("f", "none")
    if frule == "add_constant":
        fshift = 1.0 / n
    elif frule == "none":
        fshift = 0.0
    else:
        raise ValueError(f"unknown data perturbation {frule!r} for f")
    return u0, fshift


def _source(spec, grid, shift=0.0):
    if spec.mode == "elliptic":
        return spec.source_at(0.0, grid.n_cells)[None, :] + shift
    return np.stack([spec.source_at((k + 1) * grid.dt, grid.n_cells) for k in range(grid.n_steps)]) + shift


@dataclass
class Study:
    name: str
    rows: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    report: DiagnosticsReport = field(default_factory=DiagnosticsReport)

    def column(self, key) -> list:
        return [r[key] for r in self.rows]

    def to_dict(self) -> dict:
        return {"name": self.name, "rows": self.rows, "verdicts": self.verdicts,
                "diagnostics": self.report.to_dict()}


def perturb_coefficients(spec: ProblemSpec, family=DEFAULT_FAMILY, cells: int | None = None) -> Study:
    """Distances ``|b_n(u_n) - b(u)|``, ``|psi_n(u_n) - psi(u)|``, ``|phi_n(u_n) - phi(u)|``."""
    h, _ = check_structure(spec.b, spec.psi, spec.phi)
    if not h.passed:
        raise HypothesisRejection(h)
    grid = Grid.for_spec(spec, cells)
    members = [perturb_coefficients_member(spec, n) for n in family]
    trajs = parallel_map(lambda sp: solve(sp, grid), [spec] + members)
    base, rest = trajs[0], trajs[1:]
    st = Study("perturb-coeffs", verdicts={"H_str": h.to_dict()})
    st.trajectories["base"] = base
    for n, sp, tr in zip(family, members, rest):
        st.trajectories[f"n={n}"] = tr
        st.rows.append({
            "n": n,
            "run": run_id(f"n={n}"),
            "b_l1": l1_distance(tr, base, sp.b, spec.b),
            "psi_l1": l1_distance(tr, base, sp.psi, spec.psi),
            "phi_l1": l1_distance(tr, base, sp.phi, spec.phi),
        })
    for key in ("b_l1", "psi_l1", "phi_l1"):
        col = st.column(key)
        st.report.add(f"{key}_converging", 0.5 * col[0], col[-1], converging(col))
    return st


def perturb_data(spec: ProblemSpec, family=DEFAULT_FAMILY, cells: int | None = None,
                 strong: bool = False) -> Study:
    """Distances for data ``(u0_n, f_n)``; with ``strong`` also the gradient ``L^p`` distance."""
    _, hp = check_structure(spec.b, spec.psi, spec.phi)
    if not hp.passed:
        raise HypothesisRejection(hp)
    st = Study("perturb-data", verdicts={"H'_str": hp.to_dict()})
    if strong:
        v = check_h8_uniform(spec.diffusion, spec.working_range())
        st.verdicts["H'8"] = v.to_dict()
        if not v.passed:
            raise HypothesisRejection(v)
    grid = Grid.for_spec(spec, cells)
    jobs = [(spec.initial(grid.n_cells), 0.0)] + [perturb_data_member(spec, n, grid.n_cells) for n in family]
    trajs = parallel_map(lambda j: solve(spec, grid, u0=j[0], source=_source(spec, grid, j[1])), jobs)
    base, rest = trajs[0], trajs[1:]
    st.trajectories["base"] = base
    for n, tr in zip(family, rest):
        st.trajectories[f"n={n}"] = tr
        row = {
            "n": n,
            "run": run_id(f"n={n}"),
            "b_l1": l1_distance(tr, base, spec.b),
            "psi_l1": l1_distance(tr, base, spec.psi),
            "phi_l1": l1_distance(tr, base, spec.phi),
        }
        if strong:
            row["grad_lp"] = gradient_lp_distance(tr, base)
        st.rows.append(row)
    keys = ["b_l1", "psi_l1", "phi_l1"] + (["grad_lp"] if strong else [])
    for key in keys:
        col = st.column(key)
        st.report.add(f"{key}_converging", 0.5 * col[0], col[-1], converging(col))
    return st


def refinement_study(spec: ProblemSpec, grids, oracle=None, dt_rule: str = "fixed") -> Study:
    """Errors on a grid ladder against ``oracle(x, t)`` or, without one, the finest grid.

    ``dt_rule = 'proportional'`` scales the time step with the mesh size
    relative to the configured ``(cells, dt)``.
    """
    grids = list(grids)
    s0 = spec.solver

    def grid_for(n):
        dt = s0.dt * s0.cells / n if dt_rule == "proportional" else s0.dt
        return Grid.for_spec(spec, n, dt)

    trajs = parallel_map(lambda n: solve(spec, grid_for(n)), grids)
    st = Study("converge")
    for n, tr in zip(grids, trajs):
        st.trajectories[f"cells={n}"] = tr
        if oracle is not None:
            err = final_l1(tr, oracle)
        else:
            ref = trajs[-1]
            fine = ref.grid.n_cells
            from .analysis import inject

            err = float(ref.grid.dx * np.sum(np.abs(inject(tr.u[-1], fine) - ref.u[-1])))
        st.rows.append({"cells": n, "run": run_id(f"cells={n}"), "dt": tr.grid.dt, "l1_error": err})
    errs = [r["l1_error"] for r in st.rows if oracle is not None or r["cells"] != grids[-1]]
    orders = eoc_table(errs) if len(errs) >= 2 else []
    for r, o in zip(st.rows[1:], orders):
        r["eoc"] = o
    st.report.tables["eoc"] = orders
    return st


def oracle_for(spec: ProblemSpec, cfg: dict | None = None):
    name = (cfg or {}).get("oracle", {}).get("name") if cfg else None
    name = name or spec.name
    return oracles.ORACLES.get(name)


# ---------------------------------------------------------------------------
# output


def _snapshot_levels(traj: Trajectory) -> list[int]:
    every = traj.spec.solver.snapshot_every
    N = traj.n_steps
    if traj.spec.mode == "elliptic":
        return [N]
    if every and every > 0:
        lv = list(range(0, N + 1, every))
        return lv if lv[-1] == N else lv + [N]
    return [0, N]


def write_trajectory(traj: Trajectory, out: Path, run_id: str = "run") -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    spec = traj.spec
    x = traj.grid.centers
    files = []
    for k in _snapshot_levels(traj):
        u = traj.u[k]
        name = f"{run_id}_t{k:06d}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "w", "b", "psi"])
            for row in zip(x, u, spec.phi(u), spec.b(u), spec.psi(u)):
                w.writerow([repr(float(v)) for v in row])
        files.append(name)
    return files


def run_record(traj: Trajectory, run_id: str, files: list[str]) -> dict:
    g = traj.grid
    return {
        "run_id": run_id,
        "grid": {"cells": g.n_cells, "dx": g.dx, "dt": g.dt, "steps": g.n_steps,
                 "x_lo": g.x_lo, "x_hi": g.x_hi},
        "schedule": list(schedule_for(traj.spec)),
        "final_regularization": traj.level,
        "residuals": traj.residuals.tolist(),
        "newton_iterations": traj.newton,
        "gauss_seidel_sweeps": traj.sweeps,
        "snapshots": files,
        "times": [float(traj.times[k]) for k in _snapshot_levels(traj)] if traj.spec.mode == "parabolic" else [],
        "invariants": traj.report.to_dict() if traj.report is not None else None,
    }


def write_table(rows: list[dict], path: Path) -> None:
    if not rows:
        return
    keys = list(rows[0].keys())
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def write_manifest(out: Path, plan: ExperimentPlan, spec: ProblemSpec, runs: list[dict],
                   extra: dict | None = None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    m = {
        "plan": plan.to_dict(),
        "problem": to_dict(spec),
        "hypotheses": spec.report.to_dict() if spec.report is not None else None,
        "threads": thread_count(),
        "runs": runs,
        "note": ("distances compare discrete solutions on one grid; they are a proxy "
                 "for the continuum statements, not a proof of them"),
    }
    if extra:
        m.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(m, indent=2, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, MonotoneFn):
        return o.describe()
    return str(o)


def run_id(key: str) -> str:
    return key.replace("=", "").replace(".", "_")


def write_study(study: Study, out: Path, plan: ExperimentPlan, spec: ProblemSpec) -> Path:
    runs = []
    for rid, tr in study.trajectories.items():
        safe = run_id(rid)
        runs.append(run_record(tr, safe, write_trajectory(tr, out, safe)))
    write_table(study.rows, out / f"{study.name}.csv")
    return write_manifest(out, plan, spec, runs, {"study": study.to_dict()})
