import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnlab.monotone import (IntervalSet, MonotoneFn, Piece, energy_primitive, stieltjes_integral,
                            tilde_representation, truncation)

STEFAN = MonotoneFn.with_plateaus([(0.0, 1.0)])
TWO = MonotoneFn.with_plateaus([(0.0, 1.0), (2.0, 3.0)])


@st.composite
def monotone_fns(draw):
    n = draw(st.integers(1, 5))
    knots = sorted(set(draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=n, max_size=n))) | {0.0})
    if len(knots) < 2:
        knots = [0.0, 1.0]
    slopes = draw(st.lists(st.sampled_from([0.0, 0.5, 1.0, 3.0]), min_size=len(knots) - 1,
                           max_size=len(knots) - 1))
    vals = [0.0]
    for s, (a, c) in zip(slopes, zip(knots[:-1], knots[1:])):
        vals.append(vals[-1] + s * (c - a))
    vals = np.asarray(vals) - vals[knots.index(0.0)]
    ls, rs = draw(st.sampled_from([0.0, 1.0])), draw(st.sampled_from([0.0, 2.0]))
    return MonotoneFn(knots, vals, ls, rs)


@pytest.mark.parametrize("fn, z, expected", [
    (MonotoneFn.identity(), 2.0, 2.0),
    (STEFAN, 0.5, 0.0),
    (STEFAN, 2.0, 1.0),
    (STEFAN, -0.5, -0.5),
])
def test_eval(fn, z, expected):
    assert fn(z) == expected


@pytest.mark.parametrize("fn, y, expected", [
    (MonotoneFn.identity(), 3.0, (3.0, 3.0)),
    (STEFAN, 0.0, (0.0, 1.0)),
    (STEFAN, 1.0, (2.0, 2.0)),
])
def test_pseudo_inverse(fn, y, expected):
    lo, hi = fn.pseudo_inverse(y)
    assert lo == pytest.approx(expected[0], abs=1e-12)
    assert hi == pytest.approx(expected[1], abs=1e-12)


def test_pseudo_inverse_out_of_range():
    bounded = MonotoneFn([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])
    with pytest.raises(ValueError, match="out-of-range"):
        bounded.pseudo_inverse(2.0)


def test_flat_segments():
    assert list(MonotoneFn.identity().flat_segments()) == []
    assert list(STEFAN.flat_segments()) == [(0.0, 1.0)]
    assert list(TWO.flat_segments()) == [(0.0, 1.0), (2.0, 3.0)]


def test_non_monotone_rejected():
    with pytest.raises(ValueError):
        MonotoneFn([0.0, 1.0], [0.0, -1.0])
    fn = MonotoneFn([0.0, 1.0], [0.0, -1.0], check=False)
    assert fn.monotonicity_witness() is not None


@pytest.mark.parametrize("theta, f, z1, expected", [
    (1.0, MonotoneFn.identity(), 2.0, 2.0),
    (lambda s: s, MonotoneFn.identity(), 2.0, 2.0),
    (STEFAN, MonotoneFn.identity(), 2.0, 0.5),
])
def test_stieltjes_examples(theta, f, z1, expected):
    assert stieltjes_integral(theta, f, 0.0, z1) == pytest.approx(expected, abs=1e-10)


def test_stieltjes_stefan_midpoint_oracle():
    s = (np.arange(10**6) + 0.5) * 2.0 / 10**6
    mid = float(np.sum(STEFAN(s)) * 2.0 / 10**6)
    assert stieltjes_integral(STEFAN, MonotoneFn.identity(), 0.0, 2.0) == pytest.approx(mid, abs=1e-9)


def test_stieltjes_power_piece_generic_theta():
    # int_0^1 cos(s) d(sqrt s) = int_0^1 cos(y^2) dy
    f = MonotoneFn([0.0, 1.0], [0.0, 1.0], 0.0, 0.5, pieces=[Piece("power", 0.5, "left")])
    from scipy.integrate import quad

    ref = quad(lambda y: np.cos(y * y), 0.0, 1.0, epsabs=1e-13)[0]
    assert stieltjes_integral(np.cos, f, 0.0, 1.0) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("b, phi, z, expected", [
    (MonotoneFn.identity(), MonotoneFn.identity(), 2.0, 2.0),
    (MonotoneFn.identity(), MonotoneFn.identity(), 0.0, 0.0),
    (MonotoneFn.identity(), STEFAN, 2.0, 0.5),
])
def test_energy_primitive(b, phi, z, expected):
    assert energy_primitive(b, phi, z) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("H, z, expected", [
    (IntervalSet([(0.0, 1.0)]), 2.0, 1.0),
    (IntervalSet([(0.0, 1.0)]), 0.5, 0.5),
    (IntervalSet([(-1.0, 0.0), (1.0, 2.0)]), 1.5, 0.5),
])
def test_truncation(H, z, expected):
    assert truncation(H, z) == pytest.approx(expected)


def test_tilde_identity_cases():
    y = np.linspace(-2, 2, 41)
    g = tilde_representation(1.0, MonotoneFn.identity())
    np.testing.assert_allclose(g(y), y, atol=1e-12)
    g = tilde_representation(1.0, STEFAN)
    np.testing.assert_allclose(g(y), y, atol=1e-12)


def test_tilde_sign_plus_on_stefan():
    theta = lambda s: (np.asarray(s) > 0.5).astype(float)  # noqa: E731
    g = tilde_representation(theta, STEFAN)
    z = np.linspace(-3, 4, 1000)
    np.testing.assert_allclose(g(STEFAN(z)), np.maximum(STEFAN(z), 0.0), atol=1e-10)
    direct = np.array([stieltjes_integral(theta, STEFAN, 0.0, zi) for zi in z[::50]])
    np.testing.assert_allclose(g(STEFAN(z[::50])), direct, atol=1e-10)


def test_interval_set_canonical():
    H = IntervalSet([(2.0, 3.0), (0.0, 1.0), (0.5, 1.5)])
    assert H.intervals == ((0.0, 1.5), (2.0, 3.0))
    assert H.measure == pytest.approx(2.5)
    assert IntervalSet.points([0.0]).neighborhood(0.1).measure == pytest.approx(0.2)


# --- properties


@settings(max_examples=60, deadline=None)
@given(monotone_fns(), st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=50))
def test_evaluation_is_monotone(fn, zs):
    z = np.sort(np.asarray(zs))
    v = fn(z)
    assert np.all(np.diff(v) >= 0)
    assert fn(0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(monotone_fns(), st.floats(-3, 3, allow_nan=False))
def test_inverse_consistency(fn, z):
    y = float(fn(z))
    lo, hi = fn.pseudo_inverse(y)
    assert lo <= z + 1e-12 and z <= hi + 1e-12
    for e in (lo, hi):
        assert abs(float(fn(e)) - y) <= 1e-12 * max(1.0, abs(y))


@settings(max_examples=40, deadline=None)
@given(monotone_fns(), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_stieltjes_additivity(f, a, b, c):
    theta = np.cos
    lhs = stieltjes_integral(theta, f, a, c)
    rhs = stieltjes_integral(theta, f, a, b) + stieltjes_integral(theta, f, b, c)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(monotone_fns(), st.floats(-2, 2), st.floats(-2, 2))
def test_tilde_lipschitz(f, r, s):
    theta = lambda z: np.sin(3 * np.asarray(z))  # noqa: E731
    g = tilde_representation(theta, f)
    zr, zs = float(f(r)), float(f(s))
    assert abs(float(g(zr)) - float(g(zs))) <= 1.0 * abs(zr - zs) + 1e-10
    assert float(g(zr)) == pytest.approx(stieltjes_integral(theta, f, 0.0, r), abs=1e-9)


def test_energy_inequality_random_samples():
    rng = np.random.default_rng(0)
    z = rng.uniform(-4, 4, 10**4)
    for b, phi in [(MonotoneFn.identity(), STEFAN), (STEFAN, MonotoneFn.identity()),
                   (MonotoneFn.with_plateaus([(-1.0, 0.5)]), TWO), (MonotoneFn.identity(), MonotoneFn.signed_power(2.0))]:
        B = energy_primitive(b, phi, z)
        assert np.all(B >= -1e-12)
        pos = z >= 0
        assert np.all(B[pos] <= b(z[pos]) * phi(z[pos]) + 1e-10)
