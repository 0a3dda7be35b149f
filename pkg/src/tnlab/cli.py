"""Command-line entry point ``tnlab``.

Exit codes: 0 success, 1 invariant violation, 2 config or hypothesis
rejection, 3 nonlinear solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .analysis import DiagnosticsReport
from .elliptic import solve_elliptic
from .fv import NonConvergence, solve
from .hypotheses import check_problem
from .problem import ConfigError, HypothesisRejection, from_dict, read_config

OK, VIOLATION, REJECTED, DIVERGED = 0, 1, 2, 3


def _ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tnlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="problem config (TOML)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("run", help="single solve with trajectory output")
    common(sp)
    sp = sub.add_parser("check-hypotheses", help="hypothesis table and JSON report")
    common(sp)
    sp.add_argument("--strong", action="store_true", help="also check uniform monotonicity")
    sp = sub.add_parser("converge", help="grid refinement ladder")
    common(sp)
    sp.add_argument("--grids", type=_ints, default=(64, 128, 256))
    sp.add_argument("--dt-rule", choices=("fixed", "proportional"), default=None)
    for name, help_ in (("perturb-data", "continuous dependence on (u0, f)"),
                        ("perturb-coeffs", "continuous dependence on (b, psi, phi)")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--family", type=_ints, default=ex.DEFAULT_FAMILY)
        sp.add_argument("--grids", type=_ints, default=None, help="single grid size to use")
        sp.add_argument("--strong", action="store_true", help="gradient L^p distances (needs uniform monotonicity)")
    sp = sub.add_parser("elliptic", help="stationary solve")
    common(sp)
    sp.add_argument("--family", type=_ints, default=None, help="psi + Id/n perturbation study")
    return p


def _load(path: str, strong: bool = False):
    cfg = read_config(path)
    return cfg, from_dict(cfg, strong=strong)


def _emit(msg: str):
    print(msg, flush=True)


def _invariants(report: DiagnosticsReport | None) -> int:
    if report is None or report.passed:
        return OK
    for r in report.failures():
        _emit(f"invariant violated: {r.name}: measured {r.measured:.6e} > bound {r.bound:.6e} ({r.detail})")
    return VIOLATION


def cmd_run(args) -> int:
    cfg, spec = _load(args.config)
    plan = ex.ExperimentPlan(args.config, "single", out=args.out, seed=args.seed)
    if spec.mode == "elliptic":
        st = solve_elliptic(spec)
        traj = st.trajectory
    else:
        traj = solve(spec)
    out = Path(args.out or f"out/{spec.name}")
    files = ex.write_trajectory(traj, out, "run")
    ex.write_manifest(out, plan, spec, [ex.run_record(traj, "run", files)])
    _emit(f"{spec.name}: {traj.n_steps} step(s), {traj.grid.n_cells} cells, "
          f"final regularization {traj.level:g}, max residual {traj.residuals.max():.2e}; wrote {out}")
    return _invariants(traj.report)


def cmd_check(args) -> int:
    cfg = read_config(args.config)
    spec = from_dict(cfg, check=False)
    rep = check_problem(spec, strong=args.strong)
    _emit(rep.table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "hypotheses.json").write_text(json.dumps(rep.to_dict(), indent=2, default=str))
    hard = [v for v in rep.failures() if v.name in ("H1", "H2", "H3", "H7", "H8", "H9", "H10", "H'5")]
    return REJECTED if hard else OK


def cmd_converge(args) -> int:
    cfg, spec = _load(args.config)
    orc = cfg.get("oracle", {})
    dt_rule = args.dt_rule or orc.get("dt_rule", "fixed")
    st = ex.refinement_study(spec, args.grids, ex.oracle_for(spec, cfg), dt_rule)
    plan = ex.ExperimentPlan(args.config, "grid", grids=tuple(args.grids), out=args.out, seed=args.seed)
    out = Path(args.out or f"out/{spec.name}_converge")
    ex.write_study(st, out, plan, spec)
    for r in st.rows:
        _emit("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    merged = DiagnosticsReport()
    for tr in st.trajectories.values():
        if tr.report is not None:
            merged.merge(tr.report)
    return _invariants(merged)


def _perturb(args, which: str) -> int:
    cfg, spec = _load(args.config, strong=args.strong)
    cells = args.grids[0] if args.grids else None
    if which == "data":
        st = ex.perturb_data(spec, args.family, cells, strong=args.strong)
    else:
        st = ex.perturb_coefficients(spec, args.family, cells)
    plan = ex.ExperimentPlan(args.config, which if which == "data" else "coefficients",
                             family=tuple(args.family), grids=tuple(args.grids or ()), out=args.out,
                             seed=args.seed, strong=args.strong)
    out = Path(args.out or f"out/{spec.name}_perturb_{which}")
    ex.write_study(st, out, plan, spec)
    for r in st.rows:
        _emit("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    for r in st.report.records:
        _emit(f"{r.name}: {'yes' if r.passed else 'no'}")
    merged = DiagnosticsReport()
    for tr in st.trajectories.values():
        if tr.report is not None:
            merged.merge(tr.report)
    return _invariants(merged)


def cmd_elliptic(args) -> int:
    cfg, spec = _load(args.config)
    if spec.mode != "elliptic":
        raise ConfigError("mode", "the elliptic subcommand needs mode = \"elliptic\"")
    plan = ex.ExperimentPlan(args.config, "single" if not args.family else "coefficients",
                             family=tuple(args.family or ()), out=args.out, seed=args.seed)
    st = solve_elliptic(spec)
    out = Path(args.out or f"out/{spec.name}")
    files = ex.write_trajectory(st.trajectory, out, "run")
    extra = {}
    orc = ex.oracle_for(spec, cfg)
    if orc is not None:
        from .analysis import final_l1

        err = final_l1(st.trajectory, orc)
        extra["oracle_l1_error"] = err
        _emit(f"L1 error against closed form: {err:.6e}")
    if args.family:
        from .elliptic import elliptic_perturbation_study

        rows = elliptic_perturbation_study(
            spec, args.family, lambda s, n: replace(s, psi=s.psi.plus_identity(1.0 / n)))
        ex.write_table(rows, out / "elliptic-perturb.csv")
        extra["perturbation"] = rows
        for r in rows:
            _emit(f"n={r['n']}  psi_l1={r['psi_l1']:.6g}  phi_l1={r['phi_l1']:.6g}")
    ex.write_manifest(out, plan, spec, [ex.run_record(st.trajectory, "run", files)], extra)
    _emit(f"{spec.name}: residual {st.residual:.2e}; wrote {out}")
    return OK


COMMANDS = {
    "run": cmd_run,
    "check-hypotheses": cmd_check,
    "converge": cmd_converge,
    "perturb-data": lambda a: _perturb(a, "data"),
    "perturb-coeffs": lambda a: _perturb(a, "coefficients"),
    "elliptic": cmd_elliptic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, HypothesisRejection) as exc:
        _emit(f"rejected: {exc}")
        return REJECTED
    except FileNotFoundError as exc:
        _emit(f"rejected: {exc}")
        return REJECTED
    except NonConvergence as exc:
        _emit(f"solver failure: {exc}")
        return DIVERGED


if __name__ == "__main__":
    sys.exit(main())
