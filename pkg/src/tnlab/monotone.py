"""Calculus of continuous nondecreasing scalar functions.

A :class:`MonotoneFn` is stored as knots ``z_0 < ... < z_N`` with values
``v_0 <= ... <= v_N``; between knots each piece is either linear or a power
profile, and outside the knot range the function is extended linearly. The
flat pieces are therefore known exactly, which is what the exceptional-set
machinery in :mod:`tnlab.hypotheses` relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

LINEAR = "linear"
POWER = "power"
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class Piece:
    """Shape of one knot interval.

    A power piece on ``[z_l, z_r]`` with exponent ``m`` is
    ``v_l + (v_r - v_l) * t**m`` (anchor ``left``) or
    ``v_r - (v_r - v_l) * (1 - t)**m`` (anchor ``right``), ``t = (z - z_l)/h``.
    """

    kind: str = LINEAR
    exponent: float = 1.0
    anchor: str = "left"

    def __post_init__(self):
        if self.kind not in (LINEAR, POWER):
            raise ValueError(f"unknown piece kind {self.kind!r}")
        if self.anchor not in ("left", "right"):
            raise ValueError(f"unknown anchor {self.anchor!r}")
        if not self.exponent > 0:
            raise ValueError("power exponent must be positive")
        if self.kind == LINEAR and self.exponent != 1.0:
            object.__setattr__(self, "exponent", 1.0)


class MonotoneFn:
    """Continuous nondecreasing function with finitely many pieces.

    Parameters
    ----------
    knots, values : sequences of floats
        Strictly increasing knots and the function values there.
    left_slope, right_slope : float
        Slopes of the linear extensions outside ``[knots[0], knots[-1]]``.
    pieces : sequence of :class:`Piece`, optional
        One shape per knot interval (default: all linear).
    check : bool
        Reject non-monotone or non-normalized data. Checker fixtures pass
        ``check=False`` so that :func:`tnlab.hypotheses.check_h1` can report
        the defect with a witness instead.
    """

    def __init__(self, knots, values, left_slope=0.0, right_slope=0.0,
                 pieces=None, *, check=True):
        z = np.array(knots, dtype=float).ravel()
        v = np.array(values, dtype=float).ravel()
        if z.size == 0 or z.size != v.size:
            raise ValueError("knots and values must be non-empty and of equal length")
        if np.any(np.diff(z) <= 0):
            raise ValueError("knots must be strictly increasing")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(v))):
            raise ValueError("knots and values must be finite")
        if pieces is None:
            pieces = (Piece(),) * (z.size - 1)
        pieces = tuple(p if isinstance(p, Piece) else Piece(**p) for p in pieces)
        if len(pieces) != z.size - 1:
            raise ValueError("need exactly one piece per knot interval")
        z.setflags(write=False)
        v.setflags(write=False)
        self._z, self._v = z, v
        self._ls, self._rs = float(left_slope), float(right_slope)
        self._pieces = pieces
        self._linear = all(p.kind == LINEAR for p in pieces)
        self._m = np.array([p.exponent for p in pieces] or [1.0])
        self._right = np.array([p.anchor == "right" for p in pieces] or [False])
        if check:
            bad = self.monotonicity_witness()
            if bad is not None:
                raise ValueError(f"function is not nondecreasing: {bad}")
            if self(0.0) != 0.0:
                raise ValueError(f"function is not normalized: f(0) = {self(0.0)}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls) -> "MonotoneFn":
        return cls([0.0], [0.0], 1.0, 1.0)

    @classmethod
    def zero(cls) -> "MonotoneFn":
        return cls([0.0], [0.0], 0.0, 0.0)

    @classmethod
    def linear(cls, slope: float) -> "MonotoneFn":
        return cls([0.0], [0.0], slope, slope)

    @classmethod
    def with_plateaus(cls, plateaus: Sequence[tuple[float, float]]) -> "MonotoneFn":
        """Slope one except on the given closed plateaus, normalized at 0.

        ``with_plateaus([(0, 1)])`` is the Stefan-type temperature map
        ``z`` for ``z < 0``, ``0`` on ``[0, 1]``, ``z - 1`` beyond.
        """
        flat = IntervalSet(tuple(plateaus))
        knots = sorted({0.0, *[e for iv in flat.intervals for e in iv]})
        # accumulate increments so plateau ends are bitwise equal
        vals = [0.0]
        for a, c in zip(knots[:-1], knots[1:]):
            inside = bool(flat.contains(0.5 * (a + c)))
            vals.append(vals[-1] if inside else vals[-1] + (c - a))
        v0 = vals[knots.index(0.0)]
        return cls(knots, [v - v0 for v in vals], 1.0, 1.0)

    @classmethod
    def signed_power(cls, m: float, reach: float = 4.0) -> "MonotoneFn":
        """``z |z|**(m-1)`` on ``[-reach, reach]``, C1 linear extension beyond."""
        top = reach ** m
        slope = m * reach ** (m - 1)
        return cls([-reach, 0.0, reach], [-top, 0.0, top], slope, slope,
                   [Piece(POWER, m, "right"), Piece(POWER, m, "left")])

    # -- accessors --------------------------------------------------------
    @property
    def knots(self) -> np.ndarray:
        return self._z

    breakpoints = knots

    @property
    def values(self) -> np.ndarray:
        return self._v

    @property
    def left_slope(self) -> float:
        return self._ls

    @property
    def right_slope(self) -> float:
        return self._rs

    @property
    def pieces(self) -> tuple[Piece, ...]:
        return self._pieces

    @property
    def kind(self) -> str:
        return "piecewise_linear" if self._linear else "piecewise_power"

    @property
    def limits(self) -> tuple[float, float]:
        """Values of the function at minus and plus infinity."""
        lo = -math.inf if self._ls > 0 else float(self._v[0])
        hi = math.inf if self._rs > 0 else float(self._v[-1])
        return lo, hi

    def describe(self) -> dict:
        """Declarative description; ``MonotoneFn.from_description`` inverts it."""
        d = {
            "knots": [[float(a), float(b)] for a, b in zip(self._z, self._v)],
            "left_slope": self._ls,
            "right_slope": self._rs,
        }
        if not self._linear:
            d["pieces"] = [
                {"kind": p.kind, "exponent": p.exponent, "anchor": p.anchor}
                for p in self._pieces
            ]
        return d

    @classmethod
    def from_description(cls, d: dict, *, check=True) -> "MonotoneFn":
        pairs = d.get("knots", [[0.0, 0.0]])
        knots = [float(p[0]) for p in pairs]
        vals = [float(p[1]) for p in pairs]
        pieces = d.get("pieces")
        return cls(knots, vals, d.get("left_slope", 0.0), d.get("right_slope", 0.0),
                   pieces, check=check)

    def __repr__(self):
        return f"MonotoneFn({self.describe()!r})"

    # -- validation -------------------------------------------------------
    def monotonicity_witness(self):
        """First place where monotonicity fails, or ``None``."""
        if self._ls < 0:
            return ("left_slope", self._ls)
        if self._rs < 0:
            return ("right_slope", self._rs)
        dv = np.diff(self._v)
        bad = np.nonzero(dv < 0)[0]
        if bad.size:
            j = int(bad[0])
            return ((float(self._z[j]), float(self._v[j])),
                    (float(self._z[j + 1]), float(self._v[j + 1])))
        return None

    # -- evaluation -------------------------------------------------------
    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        out = self._eval(za)
        return out if za.ndim else float(out)

    def _segment(self, z):
        j = np.searchsorted(self._z, z, side="right") - 1
        return np.clip(j, 0, max(self._z.size - 2, 0))

    def _eval(self, z):
        zk, vk = self._z, self._v
        if zk.size == 1:
            out = np.full(z.shape, vk[0])
        elif self._linear:
            out = np.interp(z, zk, vk)
        else:
            j = self._segment(z)
            zl, vl, vr = zk[j], vk[j], vk[j + 1]
            t = np.clip((z - zl) / (zk[j + 1] - zl), 0.0, 1.0)
            m, right = self._m[j], self._right[j]
            shape = np.where(right, 1.0 - (1.0 - t) ** m, t ** m)
            out = np.clip(vl + (vr - vl) * shape, vl, vr)
        with np.errstate(invalid="ignore"):
            lo = vk[0] + self._ls * (z - zk[0]) if self._ls else np.full(z.shape, vk[0])
            hi = vk[-1] + self._rs * (z - zk[-1]) if self._rs else np.full(z.shape, vk[-1])
        out = np.where(z < zk[0], lo, out)
        out = np.where(z > zk[-1], hi, out)
        return out

    def derivative(self, z):
        """Right derivative (the slope of the piece containing ``[z, z+)``)."""
        za = np.asarray(z, dtype=float)
        zk, vk = self._z, self._v
        if zk.size == 1:
            out = np.zeros(za.shape)
        else:
            j = self._segment(za)
            h = zk[j + 1] - zk[j]
            dv = vk[j + 1] - vk[j]
            t = np.clip((za - zk[j]) / h, 0.0, 1.0)
            m, right = self._m[j], self._right[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                shape = np.where(right, m * (1.0 - t) ** (m - 1), m * t ** (m - 1))
            out = np.where(dv == 0, 0.0, dv * shape / h)
        out = np.where(za < zk[0], self._ls, out)
        out = np.where(za >= zk[-1], self._rs, out)
        return out if za.ndim else float(out)

    # -- inversion --------------------------------------------------------
    def _invert_in_segment(self, s, y):
        zl, h = self._z[s], self._z[s + 1] - self._z[s]
        vl, dv = self._v[s], self._v[s + 1] - self._v[s]
        u = np.clip((y - vl) / dv, 0.0, 1.0)
        m, right = self._m[np.minimum(s, self._m.size - 1)], self._right[np.minimum(s, self._m.size - 1)]
        t = np.where(right, 1.0 - (1.0 - u) ** (1.0 / m), u ** (1.0 / m))
        return zl + h * t

    def inverse(self, y, side: str = "lower"):
        """Endpoint of the preimage ``{z : f(z) = y}``; NaN when out of range.

        ``side='lower'`` returns ``inf{z : f(z) >= y}``, ``side='upper'``
        returns ``sup{z : f(z) <= y}``; either may be infinite on flat tails.
        """
        ya = np.asarray(y, dtype=float)
        zk, vk = self._z, self._v
        n = zk.size
        upper = side == "upper"
        j = np.searchsorted(vk, ya, side="right" if upper else "left")
        out = np.full(ya.shape, np.nan)
        # left of all knots
        m0 = j == 0
        if self._ls > 0:
            out = np.where(m0, zk[0] + (ya - vk[0]) / (self._ls if self._ls else 1.0), out)
        elif not upper:
            out = np.where(m0 & (ya == vk[0]), -math.inf, out)
        # right of all knots
        mn = j == n
        if self._rs > 0:
            out = np.where(mn, zk[-1] + (ya - vk[-1]) / (self._rs if self._rs else 1.0), out)
        elif upper:
            out = np.where(mn & (ya == vk[-1]), math.inf, out)
        inside = ~(m0 | mn)
        if np.any(inside):
            s = np.clip(j - 1, 0, n - 2)
            with np.errstate(divide="ignore", invalid="ignore"):
                zin = self._invert_in_segment(s, ya)
            out = np.where(inside, zin, out)
        return out if ya.ndim else float(out)

    def in_range(self, y) -> bool:
        lo, hi = self.limits
        lo_ok = y > lo or (y == lo and self._ls == 0)
        hi_ok = y < hi or (y == hi and self._rs == 0)
        return bool(lo_ok and hi_ok)

    def pseudo_inverse(self, y: float) -> tuple[float, float]:
        """Closed interval ``{z : f(z) = y}``; raises ``ValueError`` when out of range."""
        if not self.in_range(y):
            raise ValueError(f"out-of-range: {y} not in the closure of the range")
        return float(self.inverse(y, "lower")), float(self.inverse(y, "upper"))

    def selection(self, y):
        """Measurable selection of the preimage: the point nearest to zero."""
        lo = self.inverse(y, "lower")
        hi = self.inverse(y, "upper")
        return np.clip(0.0, lo, hi)

    # -- structure --------------------------------------------------------
    def flat_segments(self) -> "FlatSegments":
        zk, vk = self._z, self._v
        raw = []
        if self._ls == 0:
            raw.append((-math.inf, float(zk[0])))
        for j in range(zk.size - 1):
            if vk[j + 1] == vk[j]:
                raw.append((float(zk[j]), float(zk[j + 1])))
        if self._rs == 0:
            raw.append((float(zk[-1]), math.inf))
        merged: list[tuple[float, float]] = []
        for lo, hi in raw:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
            else:
                merged.append((lo, hi))
        return FlatSegments(tuple(merged))

    def scale_argument(self, c: float) -> "MonotoneFn":
        """``z -> f(c z)`` for ``c > 0``; exact for every piece kind."""
        if not c > 0:
            raise ValueError("scale must be positive")
        return MonotoneFn(self._z / c, self._v, self._ls * c, self._rs * c, self._pieces)

    def __add__(self, other: "MonotoneFn") -> "MonotoneFn":
        if not isinstance(other, MonotoneFn):
            return NotImplemented
        if not (self._linear and other._linear):
            raise NotImplementedError("sums are exact only for piecewise-linear functions")
        knots = np.union1d(self._z, other._z)
        return MonotoneFn(knots, self(knots) + other(knots),
                          self._ls + other._ls, self._rs + other._rs, check=False)

    def plus_identity(self, eps: float) -> "MonotoneFn":
        """``f + eps * Id`` (only for piecewise-linear ``f``)."""
        return self + MonotoneFn.linear(eps)

    def chamfer(self, delta: float) -> "MonotoneFn":
        """Cut every corner away from the origin by the chord over ``[z-delta, z+delta]``.

        Only piecewise-linear functions are supported. The half-width is
        capped at a third of the distance to the neighbouring knots and to 0
        so that normalization and the knot ordering survive.
        """
        if not self._linear:
            raise NotImplementedError("chamfer needs a piecewise-linear function")
        zk = self._z
        slopes = np.concatenate([[self._ls], np.diff(self._v) / np.diff(zk), [self._rs]])
        knots, vals = [], []
        for j, z in enumerate(zk):
            if slopes[j] == slopes[j + 1] or z == 0.0:
                knots.append(z)
                vals.append(self(z))
                continue
            gaps = [abs(z)]
            if j > 0:
                gaps.append(z - zk[j - 1])
            if j < zk.size - 1:
                gaps.append(zk[j + 1] - z)
            d = min(delta, min(gaps) / 3.0)
            knots += [z - d, z + d]
            vals += [self(z - d), self(z + d)]
        return MonotoneFn(knots, vals, self._ls, self._rs)


@dataclass(frozen=True)
class FlatSegments:
    """Maximal closed intervals on which a function is constant."""

    segments: tuple[tuple[float, float], ...] = ()

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def __bool__(self):
        return bool(self.segments)

    def contains(self, lo: float, hi: float) -> bool:
        return any(a <= lo and hi <= b for a, b in self.segments)

    def covers(self, other: "FlatSegments") -> tuple[float, float] | None:
        """First segment of ``other`` not inside one of ours, else ``None``."""
        for lo, hi in other.segments:
            if not self.contains(lo, hi):
                return (lo, hi)
        return None

    def intersect(self, other: "FlatSegments") -> "FlatSegments":
        out = []
        for a, b in self.segments:
            for c, d in other.segments:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    out.append((lo, hi))
        return FlatSegments(tuple(sorted(out)))

    def image(self, fn: MonotoneFn) -> list[float]:
        """Values taken on each segment (the set ``G`` when ``fn`` is phi)."""
        out = []
        for lo, hi in self.segments:
            ref = hi if math.isfinite(hi) else (lo if math.isfinite(lo) else 0.0)
            out.append(float(fn(ref)))
        return out

    def membership(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        hit = np.zeros(z.shape, dtype=bool)
        for lo, hi in self.segments:
            hit |= (z >= lo) & (z <= hi)
        return hit


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of intervals in canonical (sorted, disjoint) form.

    Endpoint openness does not affect measures or truncations, so intervals
    are stored as closed pairs; degenerate pairs ``(a, a)`` represent points.
    """

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        raw = sorted((float(a), float(b)) for a, b in self.intervals)
        merged: list[tuple[float, float]] = []
        for a, b in raw:
            if b < a:
                raise ValueError(f"empty interval ({a}, {b})")
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def points(cls, pts: Iterable[float]) -> "IntervalSet":
        return cls(tuple((p, p) for p in pts))

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf),))

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo <= hi:
                    out.append((lo, hi))
        return IntervalSet(tuple(out))

    def neighborhood(self, eps: float) -> "IntervalSet":
        """``{z : dist(z, self) < eps}`` (measure-exact)."""
        return IntervalSet(tuple((a - eps, b + eps) for a, b in self.intervals))

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        hit = np.zeros(z.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (z >= a) & (z <= b)
        return hit

    def image(self, fn: MonotoneFn) -> "IntervalSet":
        """Image under a continuous nondecreasing map."""
        return IntervalSet(tuple((float(fn(a)) if math.isfinite(a) else fn.limits[0],
                                  float(fn(b)) if math.isfinite(b) else fn.limits[1])
                                 for a, b in self.intervals))

    def overlap_length(self, lo, hi) -> np.ndarray:
        """Length of ``self ∩ [lo, hi]`` for arrays ``lo <= hi``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        tot = np.zeros(np.broadcast(lo, hi).shape)
        for a, b in self.intervals:
            tot += np.maximum(np.minimum(hi, b) - np.maximum(lo, a), 0.0)
        return tot

    def truncation(self, z):
        """``T_H(z) = ∫_0^z 1_H(s) ds``."""
        za = np.asarray(z, dtype=float)
        out = np.zeros(za.shape)
        for a, b in self.intervals:
            out += np.clip(za, a, b) - np.clip(0.0, a, b)
        return out if za.ndim else float(out)


def truncation(H: IntervalSet, z):
    return H.truncation(z)


# ---------------------------------------------------------------------------
# piecewise polynomials (integrands for Stieltjes integrals)


class PiecewisePolynomial:
    """Piecewise polynomial in the global variable.

    ``polys[0]`` acts on ``(-inf, breaks[0])``, ``polys[k]`` on
    ``[breaks[k-1], breaks[k])`` and ``polys[-1]`` on ``[breaks[-1], inf)``.
    """

    def __init__(self, breaks: Sequence[float], polys: Sequence):
        self.breaks = np.asarray(breaks, dtype=float)
        self.polys = tuple(p if isinstance(p, Polynomial) else Polynomial(p) for p in polys)
        if len(self.polys) != self.breaks.size + 1:
            raise ValueError("need len(breaks) + 1 polynomial pieces")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")

    @classmethod
    def constant(cls, c: float) -> "PiecewisePolynomial":
        return cls([], [Polynomial([c])])

    @classmethod
    def identity(cls) -> "PiecewisePolynomial":
        return cls([], [Polynomial([0.0, 1.0])])

    @classmethod
    def indicator(cls, H: IntervalSet, value: float = 1.0) -> "PiecewisePolynomial":
        breaks, polys = [], [Polynomial([0.0])]
        for a, b in H.intervals:
            if math.isfinite(a):
                breaks.append(a)
                polys.append(Polynomial([value]))
            else:
                polys[-1] = Polynomial([value])
            if math.isfinite(b):
                breaks.append(b)
                polys.append(Polynomial([0.0]))
        return cls(breaks, polys)

    @classmethod
    def step(cls, c: float, sign: str) -> "PiecewisePolynomial":
        """``sign+(s - c)`` or ``sign-(s - c)``."""
        if sign == "plus":
            return cls([c], [Polynomial([0.0]), Polynomial([1.0])])
        return cls([c], [Polynomial([-1.0]), Polynomial([0.0])])

    @classmethod
    def from_monotone(cls, fn: MonotoneFn) -> "PiecewisePolynomial":
        zk, vk = fn.knots, fn.values
        polys = [Polynomial([vk[0] - fn.left_slope * zk[0], fn.left_slope])]
        for j, p in enumerate(fn.pieces):
            zl, zr, vl, vr = zk[j], zk[j + 1], vk[j], vk[j + 1]
            h = zr - zl
            if p.kind == LINEAR:
                s = (vr - vl) / h
                polys.append(Polynomial([vl - s * zl, s]))
                continue
            m = p.exponent
            if m != int(m):
                raise ValueError("only integer exponents have polynomial pieces")
            c = (vr - vl) / h ** m
            if p.anchor == "left":
                polys.append(vl + c * Polynomial([-zl, 1.0]) ** int(m))
            else:
                polys.append(vr - c * Polynomial([zr, -1.0]) ** int(m))
        polys.append(Polynomial([vk[-1] - fn.right_slope * zk[-1], fn.right_slope]))
        return cls(zk, polys)

    def piece_index(self, s):
        return np.searchsorted(self.breaks, s, side="right")

    def __call__(self, s):
        sa = np.asarray(s, dtype=float)
        idx = self.piece_index(sa)
        out = np.zeros(sa.shape)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.polys[k](sa[sel])
        return out if sa.ndim else float(out)

    def sup_abs(self, lo: float, hi: float) -> float:
        """Exact ``max |p|`` over ``[lo, hi]``."""
        best = 0.0
        for k, p in enumerate(self.polys):
            a = -math.inf if k == 0 else self.breaks[k - 1]
            b = math.inf if k == self.breaks.size else self.breaks[k]
            a, b = max(a, lo), min(b, hi)
            if a > b:
                continue
            cand = [a, b] + [r.real for r in p.deriv().roots()
                             if abs(r.imag) < 1e-12 and a <= r.real <= b]
            best = max(best, max(abs(float(p(c))) for c in cand))
        return best


def _as_integrand(theta):
    if isinstance(theta, PiecewisePolynomial):
        return theta
    if isinstance(theta, (int, float)):
        return PiecewisePolynomial.constant(float(theta))
    if isinstance(theta, MonotoneFn):
        try:
            return PiecewisePolynomial.from_monotone(theta)
        except ValueError:
            return theta
    if callable(theta):
        return theta
    raise TypeError(f"cannot integrate {theta!r}")


class StieltjesPrimitive:
    """``z -> ∫_origin^z theta(s) df(s)``, vectorized.

    Closed form on every piece when ``theta`` is piecewise polynomial;
    otherwise adaptive quadrature in the variable ``y = f(s)`` (to
    ``QUAD_TOL``), which avoids the endpoint singularities of fractional
    power pieces.
    """

    def __init__(self, theta, f: MonotoneFn, origin: float = 0.0):
        self.theta = _as_integrand(theta)
        self.f = f
        self.origin = float(origin)
        brk = list(f.knots)
        if isinstance(self.theta, PiecewisePolynomial):
            brk += list(self.theta.breaks)
        brk += list(getattr(self.theta, "discontinuities", ()))
        self.edges = np.unique(np.asarray(brk, dtype=float))
        e = self.edges
        acc = [0.0]
        for k in range(1, e.size):
            acc.append(acc[-1] + float(self._piece(k, e[k - 1], np.array([e[k]]))[0]))
        self._cum = np.asarray(acc)
        self._offset = 0.0
        self._offset = float(self(self.origin))

    def _rep(self, k):
        e = self.edges
        if k == 0:
            return e[0] - 1.0
        if k == e.size:
            return e[-1] + 1.0
        return 0.5 * (e[k - 1] + e[k])

    def _piece(self, k, a: float, c: np.ndarray) -> np.ndarray:
        """Integral from ``a`` to ``c`` (arrays) inside piece ``k``."""
        f, th = self.f, self.theta
        rep = self._rep(k)
        zk, vk = f.knots, f.values
        if rep < zk[0]:
            kind, slope = LINEAR, f.left_slope
        elif rep > zk[-1] or zk.size == 1:
            kind, slope = LINEAR, f.right_slope
        else:
            j = int(np.searchsorted(zk, rep, side="right") - 1)
            p = f.pieces[j]
            h = zk[j + 1] - zk[j]
            dv = vk[j + 1] - vk[j]
            kind = p.kind if dv != 0 else LINEAR
            slope = dv / h
            if kind == POWER:
                m = p.exponent
                coef = dv / h ** m
                anchor = zk[j] if p.anchor == "left" else zk[j + 1]
                orient = 1.0 if p.anchor == "left" else -1.0
        if slope == 0 and kind == LINEAR:
            return np.zeros_like(c)
        if isinstance(th, PiecewisePolynomial):
            P = th.polys[int(th.piece_index(rep))]
            if kind == LINEAR:
                Pi = P.integ()
                return slope * (Pi(c) - Pi(a))
            # substitute s = anchor + orient * t, so f'(s) = coef m t^(m-1)
            Q = P(Polynomial([anchor, orient]))
            ta, tc = orient * (a - anchor), orient * (c - anchor)
            tot = np.zeros_like(c)
            for deg, q in enumerate(Q.coef):
                e = deg + m
                tot = tot + q * coef * m * (np.abs(tc) ** e - abs(ta) ** e) / e
            return orient * tot
        # generic integrand: integrate theta(f^-1(y)) dy
        fa = float(f(a))
        out = np.empty_like(c)
        for i, ci in enumerate(np.ravel(c)):
            fc = float(f(ci))
            if kind == LINEAR:
                val, _ = integrate.quad(lambda s: th(s) * slope, a, ci,
                                        epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=200)
            else:
                lo_y, hi_y = min(fa, fc), max(fa, fc)
                val, _ = integrate.quad(lambda y: th(float(f._invert_in_segment(j, y))), lo_y, hi_y,
                                        epsabs=QUAD_TOL * 1e-2, epsrel=1e-12, limit=200)
                val = val if ci >= a else -val
            out.flat[i] = val
        return out

    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        flat = za.ravel()
        e = self.edges
        k = np.searchsorted(e, flat, side="right")
        out = np.empty(flat.shape)
        for kk in np.unique(k):
            sel = k == kk
            if kk == 0:
                base, start = 0.0, e[0]
            else:
                base, start = self._cum[kk - 1], e[kk - 1]
            out[sel] = base + self._piece(int(kk), float(start), flat[sel])
        out = out.reshape(za.shape) - self._offset
        return out if za.ndim else float(out)


def stieltjes_integral(theta, f: MonotoneFn, z0: float, z1: float) -> float:
    """``∫_{z0}^{z1} theta(s) df(s)``."""
    return float(StieltjesPrimitive(theta, f, origin=z0)(z1))


def energy_primitive(b: MonotoneFn, phi: MonotoneFn, z):
    """``B(z) = ∫_0^z phi(s) db(s)``."""
    return StieltjesPrimitive(phi, b)(z)


class TildeMap:
    """Map ``g`` on ``f(R)`` with ``g(f(z)) = ∫_0^z theta df``."""

    def __init__(self, theta, f: MonotoneFn):
        self.f = f
        self.primitive = StieltjesPrimitive(theta, f)

    def __call__(self, y):
        return self.primitive(self.f.selection(y))

    def lipschitz_bound(self, lo: float, hi: float) -> float:
        """``sup |theta|`` over ``[lo, hi]`` (an upper bound for the Lipschitz constant)."""
        th = self.primitive.theta
        if isinstance(th, PiecewisePolynomial):
            return th.sup_abs(lo, hi)
        s = np.linspace(lo, hi, 10001)
        return float(np.max(np.abs([th(x) for x in s])))


def tilde_representation(theta, f: MonotoneFn) -> TildeMap:
    return TildeMap(theta, f)


def as_callable(theta) -> Callable:
    t = _as_integrand(theta)
    return t
