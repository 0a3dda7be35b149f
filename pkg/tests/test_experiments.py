import json

import numpy as np
import pytest

from tnlab import experiments as ex
from tnlab.problem import HypothesisRejection, from_dict

from conftest import base_cfg, spec_from


@pytest.fixture
def small_stefan():
    return spec_from("stefan", solver={"cells": 32, "dt": 5e-3})


def test_thread_count(monkeypatch):
    monkeypatch.delenv(ex.THREADS_ENV, raising=False)
    assert ex.thread_count() == 1
    monkeypatch.setenv(ex.THREADS_ENV, "3")
    assert ex.thread_count() == 3
    assert ex.parallel_map(lambda v: v * v, range(6)) == [0, 1, 4, 9, 16, 25]
    monkeypatch.setenv(ex.THREADS_ENV, "many")
    assert ex.thread_count() == 1


def test_threaded_results_identical(monkeypatch, small_stefan):
    monkeypatch.setenv(ex.THREADS_ENV, "1")
    a = ex.perturb_coefficients(small_stefan, (2, 4))
    monkeypatch.setenv(ex.THREADS_ENV, "4")
    b = ex.perturb_coefficients(small_stefan, (2, 4))
    assert a.rows == b.rows


def test_perturb_coefficients_stefan(small_stefan):
    st = ex.perturb_coefficients(small_stefan, (2, 4, 8, 16, 32))
    for key in ("b_l1", "psi_l1", "phi_l1"):
        col = st.column(key)
        assert all(b < a for a, b in zip(col, col[1:])), key
    assert st.report.passed


def test_trivial_coefficient_family(small_stefan):
    spec = small_stefan.with_(perturb={"b": "none", "psi": "none", "phi": "none"})
    st = ex.perturb_coefficients(spec, (2, 4))
    tol = spec.solver.tol
    assert all(r[k] <= 2 * tol for r in st.rows for k in ("b_l1", "psi_l1", "phi_l1"))


def test_chamfered_plateau_family(small_stefan):
    spec = small_stefan.with_(perturb={"b": "none", "phi": "chamfer"})
    st = ex.perturb_coefficients(spec, (2, 4, 8, 16))
    col = st.column("phi_l1")
    assert all(b < a for a, b in zip(col, col[1:]))


def test_structure_condition_gate():
    spec = from_dict(base_cfg(b={"preset": "plateaus", "plateaus": [[0.0, 1.0]]}, psi="identity"))
    with pytest.raises(HypothesisRejection) as info:
        ex.perturb_coefficients(spec, (2,))
    assert info.value.verdict.name == "H_str"


def test_perturb_data(small_stefan):
    st = ex.perturb_data(small_stefan, (2, 4, 8, 16))
    for key in ("b_l1", "psi_l1", "phi_l1"):
        col = st.column(key)
        assert all(b < a for a, b in zip(col, col[1:]))


def test_trivial_data_family(small_stefan):
    spec = small_stefan.with_(perturb={"u0": "none", "f": "none"})
    st = ex.perturb_data(spec, (2, 4))
    assert all(r["b_l1"] <= 2 * spec.solver.tol for r in st.rows)


def test_perturb_data_strong():
    spec = spec_from("heat_data", solver={"cells": 64})
    st = ex.perturb_data(spec, (2, 4, 8, 16, 32), strong=True)
    col = st.column("grad_lp")
    assert all(b < a for a, b in zip(col, col[1:])) and col[-1] <= 0.5 * col[0]
    assert st.verdicts["H'8"]["status"] != "fail"


def test_strong_mode_needs_uniform_monotonicity():
    spec = spec_from("heat", diffusion={"p": 3.0, "base": "p_power", "uniform_monotonicity": "1"})
    with pytest.raises(HypothesisRejection):
        ex.perturb_data(spec, (2,), strong=True)


def test_refinement_study_against_oracle():
    spec = spec_from("heat")
    st = ex.refinement_study(spec, (32, 64), ex.oracle_for(spec, {"oracle": {"name": "heat"}}), "proportional")
    assert [r["cells"] for r in st.rows] == [32, 64]
    assert st.rows[1]["eoc"] > 0.8


def test_refinement_study_self_reference(small_stefan):
    st = ex.refinement_study(small_stefan, (16, 32, 64))
    assert st.rows[0]["l1_error"] > st.rows[1]["l1_error"] > 0.0


def test_outputs_reproducible_and_traceable(tmp_path, small_stefan):
    plan = ex.ExperimentPlan("stefan.toml", "coefficients", family=(2, 4))
    for d in ("a", "b"):
        st = ex.perturb_coefficients(small_stefan, (2, 4))
        ex.write_study(st, tmp_path / d, plan, small_stefan)
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    ids = {r["run_id"] for r in m["runs"]}
    assert all(row["run"] in ids for row in m["study"]["rows"])
    assert m["plan"]["family"] == [2, 4]
    header = (tmp_path / "a" / "base_t000000.csv").read_text().splitlines()[0]
    assert header == "x,u,w,b,psi"


def test_data_member_rules(small_stefan):
    u0, shift = ex.perturb_data_member(small_stefan, 4, 32)
    x = small_stefan.cell_centers(32)
    np.testing.assert_allclose(u0 - small_stefan.initial(32), np.sin(2 * np.pi * x) / 4)
    assert shift == 0.0
    with pytest.raises(ValueError):
        ex.perturb_data_member(small_stefan.with_(perturb={"u0": "scramble"}), 4, 32)
