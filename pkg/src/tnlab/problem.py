"""Problem instances: assembly, validation and TOML (de)serialization."""
from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .diffusion import Coefficient, DiffusionFlux
from .expr import Expr, ExprError, compile_expr
from .monotone import POWER, MonotoneFn, Piece

SCHEMA = "tnlab.problem/1"
MODES = ("parabolic", "elliptic")
HARD = ("H1", "H7", "H8")
REQUIRED = ("H1", "H2", "H3", "H7", "H8", "H9", "H10")


class ConfigError(ValueError):
    """Malformed config; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class HypothesisRejection(ValueError):
    """A hypothesis failed on an instance; carries the verdict and report."""

    def __init__(self, verdict, report=None):
        super().__init__(f"rejected on {verdict.name}: {verdict.detail or 'fail'} (witness {verdict.witness})")
        self.verdict = verdict
        self.report = report


# ---------------------------------------------------------------------------
# data fields


@dataclass(frozen=True)
class DataField:
    """Bounded data on the domain, either a closed-form expression or samples.

    ``samples`` are cell values on a uniform partition of the domain
    (one row per time slice when ``times`` is given, constant on
    ``[times[k], times[k+1])``).
    """

    expr: Expr | None = None
    samples: tuple | None = None
    times: tuple | None = None

    @classmethod
    def constant(cls, c: float) -> "DataField":
        return cls(expr=compile_expr(repr(float(c)), "data"))

    @classmethod
    def of(cls, source: str) -> "DataField":
        return cls(expr=compile_expr(source, "data"))

    @property
    def is_zero(self) -> bool:
        if self.expr is not None:
            return self.expr.is_zero
        return not np.any(np.asarray(self.samples, dtype=float))

    @property
    def time_independent(self) -> bool:
        if self.expr is not None:
            return not self.expr.uses("t")
        return self.times is None

    def evaluate(self, x, t: float, x_lo: float, x_hi: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.expr is not None:
            return np.asarray(self.expr(x=x, t=np.full_like(x, t)), dtype=float)
        s = np.asarray(self.samples, dtype=float)
        if self.times is not None:
            k = int(np.clip(np.searchsorted(np.asarray(self.times), t, side="right") - 1,
                            0, len(self.times) - 1))
            s = s[k]
        n = s.shape[-1]
        j = np.clip(((x - x_lo) / (x_hi - x_lo) * n).astype(int), 0, n - 1)
        return s[j]

    def describe(self):
        if self.expr is not None:
            return self.expr.source
        d = {"samples": np.asarray(self.samples).tolist()}
        if self.times is not None:
            d["times"] = list(self.times)
        return d


@dataclass(frozen=True)
class SolverSettings:
    cells: int = 128
    dt: float = 1e-3
    tol: float = 1e-9
    max_sweeps: int = 200
    max_newton: int = 50
    schedule: tuple[float, ...] = (1e-2, 1e-4, 1e-8)
    exact_final: bool = True
    snapshot_every: int = 0
    check_invariants: bool = True

    def __post_init__(self):
        if int(self.cells) < 4:
            raise ConfigError("solver.cells", "need at least 4 cells")
        if not self.dt > 0:
            raise ConfigError("solver.dt", "time step must be positive")
        if not self.tol > 0:
            raise ConfigError("solver.tol", "tolerance must be positive")
        object.__setattr__(self, "cells", int(self.cells))
        object.__setattr__(self, "schedule", tuple(float(e) for e in self.schedule))
        if any(b >= a for a, b in zip(self.schedule, self.schedule[1:])) or any(e <= 0 for e in self.schedule):
            raise ConfigError("solver.schedule", "must be a decreasing list of positive values")


# ---------------------------------------------------------------------------
# problem spec


@dataclass(frozen=True)
class ProblemSpec:
    b: MonotoneFn
    psi: MonotoneFn
    phi: MonotoneFn
    convection: Expr = field(default_factory=lambda: compile_expr("0", "flux"))
    diffusion: DiffusionFlux = field(default_factory=DiffusionFlux.linear)
    x_lo: float = 0.0
    x_hi: float = 1.0
    T: float = 0.1
    u0: DataField = field(default_factory=lambda: DataField.constant(0.0))
    source: DataField = field(default_factory=lambda: DataField.constant(0.0))
    mode: str = "parabolic"
    solver: SolverSettings = field(default_factory=SolverSettings)
    name: str = "problem"
    perturb: dict = field(default_factory=dict)
    report: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}")
        if not self.x_hi > self.x_lo:
            raise ConfigError("domain", "x_hi must exceed x_lo")
        if self.mode == "parabolic" and not self.T > 0:
            raise ConfigError("domain.T", "horizon must be positive")

    # -- nonlinearities ---------------------------------------------------
    def scalar_flux(self, z):
        """``f(z) = f~(b(z), psi(z), phi(z))``."""
        za = np.asarray(z, dtype=float)
        out = self.convection(beta=self.b(za), sigma=self.psi(za), omega=self.phi(za))
        out = np.broadcast_to(np.asarray(out, dtype=float), za.shape)
        return out.copy() if za.ndim else float(out)

    @property
    def has_convection(self) -> bool:
        return not self.convection.is_zero

    @property
    def has_diffusion(self) -> bool:
        f = self.phi
        return not (f.left_slope == 0 and f.right_slope == 0 and np.all(f.values == 0))

    # -- data -------------------------------------------------------------
    def cell_centers(self, cells: int | None = None) -> np.ndarray:
        n = cells or self.solver.cells
        dx = (self.x_hi - self.x_lo) / n
        return self.x_lo + dx * (np.arange(n) + 0.5)

    def initial(self, cells: int | None = None) -> np.ndarray:
        x = self.cell_centers(cells)
        return self.u0.evaluate(x, 0.0, self.x_lo, self.x_hi)

    def source_at(self, t: float, cells: int | None = None) -> np.ndarray:
        x = self.cell_centers(cells)
        return self.source.evaluate(x, t, self.x_lo, self.x_hi)

    def n_steps(self, dt: float | None = None) -> int:
        dt = dt or self.solver.dt
        if self.mode == "elliptic":
            return 1
        return max(1, int(round(self.T / dt)))

    def data_bounds(self, cells: int | None = None) -> tuple[float, float]:
        """``||u0||_inf`` and ``∫ ||f||_inf dt`` on the solver grid."""
        u = self.initial(cells)
        n = self.n_steps()
        dt = self.T / n if self.mode == "parabolic" else 1.0
        if self.source.time_independent:
            return float(np.max(np.abs(u))), n * dt * float(np.max(np.abs(self.source_at(0.0, cells))))
        tot = sum(dt * float(np.max(np.abs(self.source_at((k + 1) * dt, cells)))) for k in range(n))
        return float(np.max(np.abs(u))), tot

    def working_range(self) -> float:
        """A bound ``M`` on ``|u|`` the solution should respect, with margin."""
        u0max, fint = self.data_bounds(min(self.solver.cells, 512))
        n = self.n_steps()
        fmax = max(float(np.max(np.abs(self.source_at((k + 1) * self.T / n, 256)))) for k in range(min(n, 50)))
        cands = [u0max]
        if self.mode == "parabolic":
            Mb = max(abs(self.b(u0max)), abs(self.b(-u0max))) + fint
            for sgn, side in ((1.0, "upper"), (-1.0, "lower")):
                z = self.b.inverse(sgn * Mb, side)
                if np.isfinite(z):
                    cands.append(abs(float(z)))
        for sgn, side in ((1.0, "upper"), (-1.0, "lower")):
            z = self.psi.inverse(sgn * fmax, side)
            if np.isfinite(z):
                cands.append(abs(float(z)))
        return float(max(cands)) * 1.05 + 0.1

    # -- derived ----------------------------------------------------------
    def with_solver(self, **kw) -> "ProblemSpec":
        return replace(self, solver=replace(self.solver, **kw))

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)


def scalar_flux(spec: ProblemSpec, z):
    return spec.scalar_flux(z)


# ---------------------------------------------------------------------------
# config parsing


def _fn_from_table(t, field_name: str) -> MonotoneFn:
    if t is None:
        raise ConfigError(field_name, "missing table")
    if isinstance(t, str):
        t = {"preset": t}
    if not isinstance(t, dict):
        raise ConfigError(field_name, "must be a table or a preset name")
    try:
        preset = t.get("preset")
        if preset is not None:
            if preset == "identity":
                return MonotoneFn.identity()
            if preset == "zero":
                return MonotoneFn.zero()
            if preset == "linear":
                return MonotoneFn.linear(float(t["slope"]))
            if preset == "plateaus":
                return MonotoneFn.with_plateaus([tuple(p) for p in t["plateaus"]])
            if preset == "signed_power":
                return MonotoneFn.signed_power(float(t["exponent"]), float(t.get("reach", 4.0)))
            raise ConfigError(field_name + ".preset", f"unknown preset {preset!r}")
        if "knots" not in t:
            raise ConfigError(field_name + ".knots", "missing")
        pieces = t.get("pieces")
        if pieces is not None:
            pieces = [Piece(**pc) for pc in pieces]
        k = t["knots"]
        if not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in k):
            raise ConfigError(field_name + ".knots", "must be a list of [knot, value] pairs")
        return MonotoneFn([p[0] for p in k], [p[1] for p in k], float(t.get("left_slope", 0.0)),
                          float(t.get("right_slope", 0.0)), pieces, check=False)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(field_name, str(exc)) from None


def _fn_to_table(fn: MonotoneFn) -> dict:
    return fn.describe()


def _data_from(v, field_name: str) -> DataField:
    try:
        if isinstance(v, (int, float, str)):
            return DataField(expr=compile_expr(v, "data"))
        if isinstance(v, dict) and "samples" in v:
            s = np.asarray(v["samples"], dtype=float)
            if not np.all(np.isfinite(s)):
                raise ConfigError(field_name, "samples must be finite (bounded data)")
            times = v.get("times")
            if times is not None and (s.ndim != 2 or s.shape[0] != len(times)):
                raise ConfigError(field_name, "need one sample row per time slice")
            return DataField(samples=tuple(map(tuple, s)) if s.ndim == 2 else tuple(s),
                             times=tuple(times) if times is not None else None)
    except ExprError as exc:
        raise ConfigError(field_name, str(exc)) from None
    raise ConfigError(field_name, "expected an expression string or a table with samples")


def _get(d, key, field_name, kind=None, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(field_name, "missing")
        return default
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(field_name, f"expected {kind.__name__}, got {type(v).__name__}")
    return v


def from_dict(cfg: dict, *, check: bool = True, strong: bool = False) -> ProblemSpec:
    """Build and validate a :class:`ProblemSpec` from a parsed config."""
    schema = cfg.get("schema")
    if schema is None:
        raise ConfigError("schema", "missing schema identifier")
    if schema != SCHEMA:
        raise ConfigError("schema", f"unsupported schema {schema!r} (expected {SCHEMA!r})")
    mode = _get(cfg, "mode", "mode", str, "parabolic")
    b = _fn_from_table(cfg.get("b", "zero" if mode == "elliptic" else None), "b")
    psi = _fn_from_table(cfg.get("psi", "zero"), "psi")
    phi = _fn_from_table(cfg.get("phi"), "phi")
    conv = cfg.get("convection", {})
    try:
        convection = compile_expr(conv.get("expr", "0") if isinstance(conv, dict) else conv, "flux")
    except ExprError as exc:
        raise ConfigError("convection.expr", str(exc)) from None
    dif = dict(cfg.get("diffusion", {}))
    try:
        k = dif.pop("k", [[0.0, 1.0]])
        diffusion = DiffusionFlux(k=Coefficient(tuple(tuple(p) for p in k)), **dif)
    except (TypeError, ValueError) as exc:
        raise ConfigError("diffusion", str(exc)) from None
    dom = cfg.get("domain")
    if not isinstance(dom, dict):
        raise ConfigError("domain", "missing table")
    x_lo = _get(dom, "x_lo", "domain.x_lo", float, 0.0)
    x_hi = _get(dom, "x_hi", "domain.x_hi", float, 1.0)
    T = _get(dom, "T", "domain.T", float, 1.0 if mode == "elliptic" else None, required=mode != "elliptic")
    data = cfg.get("data", {})
    u0 = _data_from(data.get("u0", 0.0), "data.u0")
    src_key = "s" if mode == "elliptic" and "s" in data else "f"
    source = _data_from(data.get(src_key, 0.0), f"data.{src_key}")
    sv = dict(cfg.get("solver", {}))
    try:
        solver = SolverSettings(**sv)
    except TypeError as exc:
        raise ConfigError("solver", str(exc)) from None
    spec = ProblemSpec(b=b, psi=psi, phi=phi, convection=convection, diffusion=diffusion,
                       x_lo=x_lo, x_hi=x_hi, T=T, u0=u0, source=source, mode=mode, solver=solver,
                       name=str(cfg.get("name", "problem")), perturb=dict(cfg.get("perturb", {})))
    if check:
        spec = validate(spec, strong=strong)
    return spec


def validate(spec: ProblemSpec, strong: bool = False) -> ProblemSpec:
    """Attach a hypothesis report; raise on hard failures."""
    from .hypotheses import check_problem

    report = check_problem(spec, strong=strong, stop_on_hard_fail=True)
    for name in HARD + ("H'5",):
        if name in report and not report[name].passed and report[name].status == "fail":
            raise HypothesisRejection(report[name], report)
    return replace(spec, report=report)


def admissible(spec: ProblemSpec) -> None:
    """Raise :class:`HypothesisRejection` unless a solve is permitted."""
    rep = spec.report
    if rep is None:
        rep = validate(spec).report
    for name in REQUIRED:
        if name in rep and rep[name].status == "fail":
            raise HypothesisRejection(rep[name], rep)


def loads(text: str, **kw) -> ProblemSpec:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None
    return from_dict(cfg, **kw)


def load(path, **kw) -> ProblemSpec:
    return loads(Path(path).read_text(), **kw)


def read_config(path) -> dict:
    try:
        return tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None


def to_dict(spec: ProblemSpec) -> dict:
    s = spec.solver
    d = {
        "schema": SCHEMA,
        "name": spec.name,
        "mode": spec.mode,
        "b": _fn_to_table(spec.b),
        "psi": _fn_to_table(spec.psi),
        "phi": _fn_to_table(spec.phi),
        "convection": {"expr": spec.convection.source},
        "diffusion": spec.diffusion.describe(),
        "domain": {"x_lo": spec.x_lo, "x_hi": spec.x_hi, "T": spec.T},
        "data": {"u0": spec.u0.describe(), ("s" if spec.mode == "elliptic" else "f"): spec.source.describe()},
        "solver": {"cells": s.cells, "dt": s.dt, "tol": s.tol, "max_sweeps": s.max_sweeps,
                   "max_newton": s.max_newton, "schedule": list(s.schedule),
                   "exact_final": s.exact_final, "snapshot_every": s.snapshot_every,
                   "check_invariants": s.check_invariants},
    }
    if spec.perturb:
        d["perturb"] = copy.deepcopy(spec.perturb)
    return d


def dumps(spec: ProblemSpec) -> str:
    return tomli_w.dumps(to_dict(spec))


def serialize(spec: ProblemSpec) -> str:
    return dumps(spec)
