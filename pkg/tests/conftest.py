import copy
from pathlib import Path

import pytest

from tnlab.problem import from_dict, read_config

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def config(name: str) -> dict:
    return read_config(CONFIGS / f"{name}.toml")


def spec_from(name: str, check: bool = True, **sections):
    """Load a bundled config, overriding whole keys or updating tables."""
    cfg = copy.deepcopy(config(name))
    for key, val in sections.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return from_dict(cfg, check=check)


def base_cfg(**sections) -> dict:
    cfg = {
        "schema": "tnlab.problem/1",
        "name": "fixture",
        "b": "identity",
        "psi": "zero",
        "phi": "identity",
        "diffusion": {"p": 2.0},
        "domain": {"x_lo": 0.0, "x_hi": 1.0, "T": 0.01},
        "data": {"u0": "0", "f": "0"},
        "solver": {"cells": 16, "dt": 1e-3},
    }
    cfg.update(sections)
    return cfg


@pytest.fixture
def stefan():
    return spec_from("stefan")


@pytest.fixture
def heat():
    return spec_from("heat")


ACCEPTANCE_LINES: list[str] = []


def verdict_line(criterion: int, title: str, ok: bool, detail: str) -> bool:
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
