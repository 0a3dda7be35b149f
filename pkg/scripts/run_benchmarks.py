"""Run every bundled benchmark config and print solve time, L1 oracle error and bounds."""
import argparse
import time
from pathlib import Path

import numpy as np

from tnlab import oracles
from tnlab.analysis import a_priori_report, final_l1
from tnlab.elliptic import solve_elliptic
from tnlab.experiments import oracle_for
from tnlab.fv import solve
from tnlab.problem import from_dict, read_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BENCHMARKS = ("heat", "burgers", "barenblatt", "stefan", "heat_data", "elliptic_sine", "elliptic_algebraic")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=BENCHMARKS)
    args = ap.parse_args()
    for name in args.names:
        cfg = read_config(CONFIGS / f"{name}.toml")
        spec = from_dict(cfg)
        t0 = time.perf_counter()
        traj = solve_elliptic(spec).trajectory if spec.mode == "elliptic" else solve(spec)
        elapsed = time.perf_counter() - t0
        orc = oracle_for(spec, cfg)
        err = f"{final_l1(traj, orc):.3e}" if orc is not None else "-"
        if name == "burgers":
            err = f"front {oracles.front_position(traj.grid.centers, traj.u[-1]):.4f}"
        rep = a_priori_report(traj) if spec.mode != "elliptic" else None
        bounds = "-" if rep is None else ("ok" if rep.passed else "VIOLATED")
        print(f"{name:20s} cells={traj.grid.n_cells:4d} steps={traj.n_steps:5d} time={elapsed:6.2f}s "
              f"oracle={err:>14s} bounds={bounds} max|u|={np.max(np.abs(traj.u)):.3f}")


if __name__ == "__main__":
    main()
