import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnlab.diffusion import Coefficient, DiffusionFlux
from tnlab.hypotheses import (FAIL, PointSequenceSet, check_h1, check_h2_h3, check_h5, check_h5_elliptic,
                              check_h7_h10, check_h8_uniform, check_h11, check_problem, check_structure,
                              fitted_exponent, neighborhood_ratio)
from tnlab.monotone import IntervalSet, MonotoneFn

from conftest import spec_from

ID = MonotoneFn.identity()
STEFAN = MonotoneFn.with_plateaus([(0.0, 1.0)])
REMARK_EPS = [1 / 8, 1 / 64, 1 / 512]


def test_h1_pass():
    assert check_h1(ID, ID, ID).passed


def test_h1_decreasing_knot_pair_witness():
    bad = MonotoneFn([0.0, 1.0], [0.0, -1.0], 1.0, 1.0, check=False)
    v = check_h1(ID, ID, bad)
    assert v.status == FAIL
    (z0, v0), (z1, v1) = v.witness["knots"]
    assert z0 < z1 and v1 < v0
    assert bad(z1) < bad(z0)


def test_h1_normalization():
    shifted = MonotoneFn([0.0, 1.0], [1.0, 2.0], 1.0, 1.0, check=False)
    v = check_h1(ID, ID, shifted)
    assert v.status == FAIL and "normalized" in v.detail
    assert shifted(0.0) == v.witness["value_at_zero"] != 0.0


def test_h2_h3_stefan_ratio_two():
    h2, h3 = check_h2_h3(STEFAN, REMARK_EPS)
    assert h2.passed and h3.passed
    assert h3.data["ratios"] == pytest.approx([2.0, 2.0, 2.0])


def test_h2_h3_strictly_increasing():
    h2, h3 = check_h2_h3(ID, REMARK_EPS)
    assert h2.passed and h3.passed
    assert h3.data["ratios"] == [0.0, 0.0, 0.0]


def test_h3_remark_fixture_fails():
    G = PointSequenceSet.inverse_sqrt()
    _, h3 = check_h2_h3(ID, REMARK_EPS, G=G)
    assert h3.status == FAIL
    r = h3.data["ratios"]
    assert r[0] < r[1] < r[2]
    # the witness re-evaluates
    assert neighborhood_ratio(G, h3.witness["eps"]) == pytest.approx(h3.witness["ratio"])


def test_point_sequence_measure_matches_brute_force():
    G = PointSequenceSet.inverse_sqrt()
    for eps in (1 / 8, 1 / 64):
        pts = [0.0] + [1 / np.sqrt(i) for i in range(1, 200000)]
        brute = IntervalSet([(p - eps, p + eps) for p in pts]).measure
        assert G.neighborhood_measure(eps) == pytest.approx(brute, rel=1e-9)


def test_fitted_exponent():
    eps = [1e-1, 1e-2, 1e-3]
    assert fitted_exponent(eps, [e ** -0.5 for e in eps]) == pytest.approx(0.5)
    assert fitted_exponent(eps, [0.0, 0.0, 0.0]) == 0.0


@pytest.mark.parametrize("a", [DiffusionFlux.linear(), DiffusionFlux.p_laplacian(3.0)])
def test_h7_h10_pass(a):
    assert all(v.passed for v in check_h7_h10(a, 2.0))


def test_h8_fail_with_witness():
    a = DiffusionFlux(k=Coefficient(((0.0, -1.0),)))
    h8 = {v.name: v for v in check_h7_h10(a, 2.0)}["H8"]
    assert h8.status == FAIL
    w = h8.witness
    assert (a(w["r"], w["xi"]) - a(w["r"], w["eta"])) * (w["xi"] - w["eta"]) < 0


def test_h9_h10_fail_with_too_small_constants():
    a = DiffusionFlux(k=Coefficient(((0.0, 5.0),)), growth="1")
    v = {x.name: x for x in check_h7_h10(a, 1.0)}
    assert v["H10"].status == FAIL and v["H9"].passed
    a = DiffusionFlux(k=Coefficient(((0.0, 0.5),)), coercivity="1")
    assert {x.name: x for x in check_h7_h10(a, 1.0)}["H9"].status == FAIL


def _k_lipschitz_in_phi(k: Coefficient, phi: MonotoneFn, M: float) -> float:
    r = np.linspace(-M, M, 2001)
    return float(np.max(np.abs(np.diff(k(r))) / np.maximum(np.diff(phi(r)), 1e-300)))


def test_h11_r_independent():
    assert check_h11(DiffusionFlux.linear(), ID, 2.0).passed


def test_h11_model_case():
    k = Coefficient(((-2.0, 1.0), (2.0, 3.0)))
    L = _k_lipschitz_in_phi(k, ID, 2.0)
    assert L == pytest.approx(0.5)
    a = DiffusionFlux(k=k, lipschitz=repr(L), growth="3", coercivity="1")
    assert check_h11(a, ID, 2.0).passed


def test_h11_jump_inside_strict_interval():
    a = DiffusionFlux(k=Coefficient(((0.0, 1.0), (0.0, 2.0))), lipschitz="1", growth="2")
    v = check_h11(a, ID, 1.0)
    assert v.status == FAIL
    w = v.witness
    assert min(w["r"], w["s"]) < 0 < max(w["r"], w["s"])
    lhs = (a(w["r"], w["xi"]) - a(w["s"], w["eta"])) * (w["xi"] - w["eta"])
    lhs += 1.0 * (1 + w["xi"] ** 2 + w["eta"] ** 2) * abs(w["r"] - w["s"])
    assert lhs < 0


def test_h11_jump_hidden_in_flat_segment_is_fine():
    # the jump sits inside E, where the condition is not required
    a = DiffusionFlux(k=Coefficient(((0.5, 1.0), (0.5, 2.0))), lipschitz="0", growth="2")
    assert check_h11(a, STEFAN, 2.0).passed


@pytest.mark.parametrize("b, phi, expected", [
    (ID, ID, True),
    (STEFAN, MonotoneFn.with_plateaus([(0.0, 2.0)]), True),
    (STEFAN, ID, False),
])
def test_structure(b, phi, expected):
    h, _ = check_structure(b, MonotoneFn.zero(), phi)
    assert h.passed is expected
    if not expected:
        assert h.witness["segment"] == (0.0, 1.0)


def test_structure_prime_uses_b_plus_psi():
    _, hp = check_structure(STEFAN, ID, ID)
    assert hp.passed
    _, hp = check_structure(STEFAN, MonotoneFn.zero(), ID)
    assert not hp.passed


BOUNDED = MonotoneFn([-1.0, 1.0], [-1.0, 1.0])


@pytest.mark.parametrize("b, psi, expected", [
    (ID, MonotoneFn.zero(), True),
    (BOUNDED, ID, True),
    (BOUNDED, BOUNDED, False),
])
def test_h5(b, psi, expected):
    assert check_h5(b, psi).passed is expected


def test_h5_elliptic():
    assert check_h5_elliptic(ID).passed
    assert not check_h5_elliptic(BOUNDED).passed


def test_h8_uniform():
    assert check_h8_uniform(DiffusionFlux.linear(), 1.0).passed
    assert check_h8_uniform(DiffusionFlux(), 1.0).status == "inconclusive"
    a = DiffusionFlux(p=3.0, base="p_power", uniform_monotonicity="1")
    assert check_h8_uniform(a, 1.0).status == FAIL


@pytest.mark.parametrize("name", ["heat", "stefan", "burgers", "barenblatt", "heat_data"])
def test_bundled_configs_pass(name):
    rep = spec_from(name).report
    assert not rep.failures(["H1", "H2", "H3", "H7", "H8", "H9", "H10", "H11"])


def test_report_deterministic_and_serializable():
    spec = spec_from("stefan", check=False)
    a, b = check_problem(spec), check_problem(spec)
    assert json.dumps(a.to_dict(), default=str) == json.dumps(b.to_dict(), default=str)
    assert "H11" in a.table()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.01, 1)), min_size=1, max_size=4))
def test_plateau_functions_pass_h2_h3(raw):
    segs, cur = [], -4.0
    for start, length in sorted(raw):
        lo = max(start, cur + 0.1)
        segs.append((lo, lo + length))
        cur = lo + length
    phi = MonotoneFn.with_plateaus(segs)
    h2, h3 = check_h2_h3(phi, REMARK_EPS)
    assert h2.passed and h3.passed
    # each plateau contributes one point of G, until neighborhoods overlap
    assert h3.data["ratios"][-1] <= 2 * len(segs) + 1e-9
