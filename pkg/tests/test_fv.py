import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnlab import oracles
from tnlab.analysis import comparison_slack, contraction_slack
from tnlab.fv import (CellState, GodunovFlux, Grid, NonConvergence, Regularization, Scheme, entropy_residuals,
                      exact_level_admissible, numerical_convection_flux, numerical_diffusion_flux,
                      schedule_for, solve, step)
from tnlab.monotone import MonotoneFn
from tnlab.problem import from_dict

from conftest import base_cfg, spec_from

burgers_cfg = dict(phi="zero", convection={"expr": "beta*beta/2"})


@pytest.fixture(scope="module")
def burgers():
    return from_dict(base_cfg(**burgers_cfg))


@pytest.mark.parametrize("ul, ur, expected", [(1.0, 0.0, 0.5), (-1.0, 1.0, 0.0), (0.3, 0.3, 0.045)])
def test_godunov_burgers(burgers, ul, ur, expected):
    assert numerical_convection_flux(burgers, ul, ur) == pytest.approx(expected, abs=1e-12)


flux_pool = [lambda z: 0.5 * z * z, lambda z: np.sin(3 * z), lambda z: z ** 3 - z, lambda z: -np.abs(z)]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(range(4)), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 0.5))
def test_godunov_monotone_and_consistent(k, a, b, d):
    F = GodunovFlux(flux_pool[k], 3.0)
    f = flux_pool[k]
    assert float(F(a, a)) == pytest.approx(float(f(a)), abs=1e-12)
    assert float(F(a + d, b)) >= float(F(a, b)) - 1e-12
    assert float(F(a, b + d)) <= float(F(a, b)) + 1e-12


def test_godunov_matches_brute_force():
    F = GodunovFlux(flux_pool[1], 3.0)
    rng = np.random.default_rng(4)
    for a, b in rng.uniform(-2, 2, (50, 2)):
        z = np.linspace(min(a, b), max(a, b), 200001)
        v = flux_pool[1](z)
        ref = v.min() if a <= b else v.max()
        assert float(F(a, b)) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("cfg, ul, ur, dx, expected", [
    ({}, 0.0, 1.0, 0.5, 2.0),
    ({"phi": {"preset": "plateaus", "plateaus": [[0.0, 1.0]]}}, 0.2, 0.9, 0.1, 0.0),
    ({"diffusion": {"p": 3.0, "base": "p_power"}}, 0.0, 1.0, 1.0, 1.0),
])
def test_numerical_diffusion_flux(cfg, ul, ur, dx, expected):
    assert numerical_diffusion_flux(from_dict(base_cfg(**cfg)), ul, ur, dx) == pytest.approx(expected)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-3, 1))
def test_diffusion_flux_vanishes_on_flat_segment(ul, ur, dx):
    spec = from_dict(base_cfg(phi={"preset": "plateaus", "plateaus": [[0.0, 1.0]]},
                              diffusion={"p": 3.0, "base": "p_power", "k": [[0.0, 1.0], [1.0, 2.0]]}))
    assert numerical_diffusion_flux(spec, ul, ur, dx) == 0.0


def test_regularization_invariants():
    reg = Regularization.level(1e-2)
    z = np.linspace(-3, 3, 601)
    stefan = MonotoneFn.with_plateaus([(0.0, 1.0)])
    assert np.all(np.diff(reg.b(stefan, z)) > 0)
    assert np.all(np.diff(reg.psi(MonotoneFn.zero(), z)) >= 0)
    assert reg.psi(MonotoneFn.zero(), -2.0) == pytest.approx(-2e-2)


def test_schedule_rule():
    assert schedule_for(spec_from("heat"))[-1] == 0.0
    assert schedule_for(spec_from("stefan"))[-1] == 0.0
    # b, psi and phi all flat on [0, 1]: no exact level
    spec = from_dict(base_cfg(b={"preset": "plateaus", "plateaus": [[0.0, 1.0]]},
                              phi={"preset": "plateaus", "plateaus": [[0.0, 1.0]]}))
    assert not exact_level_admissible(spec)
    assert schedule_for(spec) == (1e-2, 1e-4, 1e-8)


def test_jacobian_matches_finite_differences():
    spec = from_dict(base_cfg(phi={"preset": "signed_power", "exponent": 2.0}, psi="identity",
                              convection={"expr": "beta*beta/2 - omega"},
                              diffusion={"p": 2.0, "k": [[-1.0, 1.0], [1.0, 2.0]]}))
    g = Grid(12, 0.0, 1.0, 1e-2, 1)
    sch = Scheme(spec, g)
    rng = np.random.default_rng(5)
    u = rng.uniform(-1, 1, 12)
    uo = rng.uniform(-1, 1, 12)
    f = rng.uniform(-1, 1, 12)
    reg = Regularization.level(1e-4)
    ab = sch.jacobian(u, reg, g.dt)
    J = np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)
    h = 1e-7
    Jfd = np.empty((12, 12))
    for j in range(12):
        e = np.zeros(12)
        e[j] = h
        Jfd[:, j] = (sch.residual(u + e, uo, f, reg, g.dt) - sch.residual(u - e, uo, f, reg, g.dt)) / (2 * h)
    np.testing.assert_allclose(J, Jfd, atol=1e-4, rtol=1e-5)


def test_zero_state_is_fixed():
    spec = spec_from("stefan")
    st0 = CellState.from_u(spec, np.zeros(32))
    new = step(spec, st0, 1e-2)
    assert np.all(new.u == 0.0)
    assert new.consistent(spec)


def test_single_cell_equivalent_step():
    spec = from_dict(base_cfg(psi="identity", phi="zero"))
    dt = 0.1
    new = step(spec, CellState.from_u(spec, np.ones(16)), dt)
    np.testing.assert_allclose(new.u, 1.0 / (1.0 + dt), rtol=1e-10)


def test_heat_one_step():
    spec = spec_from("heat")
    g = Grid(256, 0.0, 1.0, 1e-4, 1)
    new = step(spec, CellState.from_u(spec, np.sin(np.pi * g.centers)), 1e-4, grid=g)
    err = g.dx * np.sum(np.abs(new.u - oracles.heat(g.centers, 1e-4)))
    assert err <= 1e-4


def test_burgers_front():
    spec = spec_from("burgers")
    traj = solve(spec)
    x = traj.grid.centers
    front = oracles.front_position(x, traj.u[-1])
    assert abs(front - 0.65) <= 2 * traj.grid.dx
    assert traj.report.passed


def test_heat_trajectory_accuracy_and_invariants(heat):
    traj = solve(heat)
    assert traj.grid.n_steps * traj.grid.dt == pytest.approx(0.1)
    g = traj.grid
    assert g.dx * np.sum(np.abs(traj.u[-1] - oracles.heat(g.centers, 0.1))) <= 5e-3
    assert traj.report.passed
    assert traj.level == 0.0


def test_nonconvergence_carries_residual_and_cell():
    spec = spec_from("bad_nonconvergent")
    with pytest.raises(NonConvergence) as info:
        solve(spec)
    assert info.value.residual > spec.solver.tol
    assert 0 <= info.value.cell < spec.solver.cells


def test_deterministic(stefan):
    a, b = solve(stefan), solve(stefan)
    assert np.array_equal(a.u, b.u)


# --- comparison and contraction on random data


def _stefan_small():
    return spec_from("stefan", solver={"cells": 32, "dt": 1e-2}, domain={"T": 0.05})


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_comparison_principle_random_ordered(seed):
    spec = _stefan_small()
    rng = np.random.default_rng(seed)
    g = Grid.for_spec(spec)
    u0 = rng.uniform(-2, 3, g.n_cells)
    u1 = u0 + rng.uniform(0, 1, g.n_cells)
    fa = rng.uniform(-1, 1, (g.n_steps, g.n_cells))
    fb = fa + rng.uniform(0, 1, fa.shape)
    ta = solve(spec, g, u0=u0, source=fa)
    tb = solve(spec, g, u0=u1, source=fb)
    assert comparison_slack(ta, tb) <= 10 * spec.solver.tol


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_l1_contraction_random(seed):
    spec = _stefan_small()
    rng = np.random.default_rng(seed)
    g = Grid.for_spec(spec)
    ta = solve(spec, g, u0=rng.uniform(-2, 3, g.n_cells), source=rng.uniform(-1, 1, (g.n_steps, g.n_cells)))
    tb = solve(spec, g, u0=rng.uniform(-2, 3, g.n_cells), source=rng.uniform(-1, 1, (g.n_steps, g.n_cells)))
    assert np.max(contraction_slack(ta, tb)) <= 10 * g.n_steps * spec.solver.tol


# --- entropy residuals


def test_entropy_residual_constant_state():
    spec = from_dict(base_cfg(psi="identity", phi="zero", data={"u0": "0.7", "f": "0.7"}))
    g = Grid.for_spec(spec)
    traj = solve(spec, g, u0=np.full(g.n_cells, 0.7))
    assert np.allclose(traj.u, 0.7)
    # interior levels only see the constant state
    for sign in ("plus", "minus"):
        res = entropy_residuals(traj, [-1.0, 0.0, 0.3, 0.7, 1.0], sign)
        assert max(res.values()) <= 1e-9


def test_entropy_residual_above_range_vanishes():
    traj = solve(spec_from("burgers", solver={"cells": 100, "dt": 5e-3}))
    M = float(np.max(traj.u))
    from tnlab.fv import entropy_residual_field

    assert np.all(entropy_residual_field(traj, M + 0.5, "plus") == 0.0)


def test_entropy_residual_burgers_small_under_refinement():
    coarse = solve(spec_from("burgers", solver={"cells": 100, "dt": 5e-3}))
    fine = solve(spec_from("burgers", solver={"cells": 200, "dt": 2.5e-3}))
    tol = coarse.spec.solver.tol
    ec = entropy_residuals(coarse, [0.5])[0.5]
    ef = entropy_residuals(fine, [0.5])[0.5]
    assert ec <= 0.05
    assert ef <= max(0.5 * ec, 10 * tol)


def test_entropy_residual_detects_violation():
    traj = solve(spec_from("burgers", solver={"cells": 100, "dt": 5e-3}))
    assert entropy_residuals(traj, [0.5])[0.5] == 0.0
    from dataclasses import replace

    bad = replace(traj, u=traj.u.copy())
    bad.u[-1, 40:43] += 0.3
    assert entropy_residuals(bad, [0.5])[0.5] > 1.0
