"""Checks of the structural hypotheses on a problem instance.

Exact checks (monotonicity of piecewise data, flat-segment containment,
limits at infinity) report ``pass``; checks that sample a grid report
``pass (sampled)``. A ``fail`` verdict always carries a witness that can be
fed back into the defining inequality.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diffusion import DiffusionFlux
from .monotone import FlatSegments, IntervalSet, MonotoneFn

PASS = "pass"
SAMPLED = "pass (sampled)"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

H3_BOUND = 1e3
H3_GROWTH = 0.1
MONO_TOL = 1e-12
DEFAULT_EPS = tuple(1.0 / n for n in (8, 64, 512))


@dataclass
class Verdict:
    name: str
    status: str
    witness: object = None
    detail: str = ""
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status in (PASS, SAMPLED)

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class HypothesisReport:
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    working_range: float = 0.0
    resolution: int = 64

    def add(self, v: Verdict) -> Verdict:
        self.verdicts[v.name] = v
        return v

    def __getitem__(self, name) -> Verdict:
        return self.verdicts[name]

    def __contains__(self, name) -> bool:
        return name in self.verdicts

    def failures(self, names: Sequence[str] | None = None) -> list[Verdict]:
        vs = self.verdicts.values() if names is None else [self.verdicts[n] for n in names if n in self.verdicts]
        return [v for v in vs if v.status == FAIL]

    def to_dict(self) -> dict:
        return {
            "working_range": self.working_range,
            "resolution": self.resolution,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
        }

    def table(self) -> str:
        w = max([len(k) for k in self.verdicts] + [10])
        lines = [f"{'hypothesis':<{w}}  {'verdict':<15}  witness / detail"]
        for k, v in self.verdicts.items():
            extra = v.detail if v.witness is None else f"{v.witness}  {v.detail}".strip()
            lines.append(f"{k:<{w}}  {v.status:<15}  {extra}")
        lines.append(f"working range [-{self.working_range:g}, {self.working_range:g}], grid {self.resolution}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# (H1)


def check_h1(b: MonotoneFn, psi: MonotoneFn, phi: MonotoneFn, samples: int = 2001) -> Verdict:
    for name, fn in (("b", b), ("psi", psi), ("phi", phi)):
        w = fn.monotonicity_witness()
        if w is not None:
            return Verdict("H1", FAIL, {"function": name, "knots": w}, "not nondecreasing")
        lo, hi = float(fn.knots[0]) - 1.0, float(fn.knots[-1]) + 1.0
        z = np.linspace(lo, hi, samples)
        v = fn(z)
        bad = np.nonzero(np.diff(v) < 0)[0]
        if bad.size:
            j = int(bad[0])
            return Verdict("H1", FAIL, {"function": name, "points": [z[j], z[j + 1]]},
                           "evaluation decreases")
        if fn(0.0) != 0.0:
            return Verdict("H1", FAIL, {"function": name, "value_at_zero": fn(0.0)},
                           "not normalized")
    return Verdict("H1", PASS)


# ---------------------------------------------------------------------------
# (H2), (H3)


class PointSequenceSet:
    """``{limit} ∪ {g(i) : i >= 1}`` for a strictly decreasing ``g`` with convex gaps.

    ``neighborhood_measure`` is exact under the assumption that the gaps
    ``g(i) - g(i+1)`` decrease in ``i``, which holds for ``g(i) = i**-q``.
    """

    def __init__(self, g: Callable[[int], float], limit: float = 0.0, label: str = ""):
        self.g = g
        self.limit = float(limit)
        self.label = label

    @classmethod
    def inverse_sqrt(cls) -> "PointSequenceSet":
        return cls(lambda i: 1.0 / math.sqrt(i), 0.0, "{0} ∪ {1/sqrt(i)}")

    def neighborhood_measure(self, eps: float, max_terms: int = 10**8) -> float:
        # first index whose gap to the next point is below 2 eps; from there on
        # the neighborhoods overlap and merge with the one around the limit
        lo, hi = 1, 2
        gap = lambda i: self.g(i) - self.g(i + 1)
        while gap(hi) >= 2 * eps:
            hi *= 2
            if hi > max_terms:
                raise ValueError("sequence gaps do not fall below 2 eps")
        while lo < hi:
            mid = (lo + hi) // 2
            if gap(mid) < 2 * eps:
                hi = mid
            else:
                lo = mid + 1
        first = lo
        head = IntervalSet(tuple((self.g(i) - eps, self.g(i) + eps) for i in range(1, first)))
        tail = IntervalSet(((self.limit - eps, self.g(first) + eps),))
        return head.union(tail).measure


def neighborhood_ratio(G, eps: float) -> float:
    """``meas(G^eps) / eps`` for an :class:`IntervalSet` or :class:`PointSequenceSet`."""
    if isinstance(G, PointSequenceSet):
        return G.neighborhood_measure(eps) / eps
    return G.neighborhood(eps).measure / eps


def fitted_exponent(eps: Sequence[float], ratios: Sequence[float]) -> float:
    """Least-squares slope of ``log ratio`` against ``log(1/eps)``."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    r = np.asarray(ratios, dtype=float)
    with np.errstate(divide="ignore"):
        y = np.log(r)
    if x.size < 2 or np.any(~(y > -np.inf)):
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def exceptional_image(phi: MonotoneFn) -> IntervalSet:
    """``G = phi(E)`` as a finite point set."""
    flat = phi.flat_segments()
    return IntervalSet.points(flat.image(phi))


def check_h2_h3(phi: MonotoneFn, eps_grid: Sequence[float] = DEFAULT_EPS, G=None,
                bound: float = H3_BOUND, growth: float = H3_GROWTH) -> tuple[Verdict, Verdict]:
    """Verdicts for (H2) and (H3) plus the ratio table in ``data``.

    (H3) fails when the last ratio exceeds ``bound`` or when the fitted
    growth exponent of the ratio sequence exceeds ``growth``.
    """
    flat = phi.flat_segments()
    h2 = Verdict("H2", PASS, detail=f"{len(flat)} flat segment(s); phi(E) finite")
    if G is None:
        G = exceptional_image(phi)
    eps = sorted((float(e) for e in eps_grid), reverse=True)
    ratios = [neighborhood_ratio(G, e) for e in eps]
    expo = fitted_exponent(eps, ratios) if len(eps) >= 2 else 0.0
    data = {"eps": eps, "ratios": ratios, "exponent": expo}
    if isinstance(G, IntervalSet):
        if G.measure > 0:
            return (Verdict("H2", FAIL, {"G": G.intervals}, "phi(E) has positive measure"),
                    Verdict("H3", FAIL, {"G": G.intervals}, "meas G > 0", data))
        if not G.intervals:
            return h2, Verdict("H3", PASS, detail="G empty", data=data)
        npts = len(G.intervals)
        return h2, Verdict("H3", PASS, detail=f"finite G: liminf ratio = {2 * npts}", data=data)
    h2 = Verdict("H2", PASS, detail="countable G")
    if ratios[-1] > bound or expo > growth:
        return h2, Verdict("H3", FAIL, {"eps": eps[-1], "ratio": ratios[-1], "exponent": expo},
                           "meas(G^eps)/eps grows as eps decreases", data)
    return h2, Verdict("H3", SAMPLED, data=data)


# ---------------------------------------------------------------------------
# (H7)-(H10), (H'8), (H11)


def _grid(M: float, n: int) -> np.ndarray:
    return np.linspace(-M, M, n)


def check_h7_h10(a: DiffusionFlux, M: float, K: float = 10.0, n: int = 64) -> list[Verdict]:
    r = _grid(M, n)
    xi = _grid(K, n)
    p = a.p
    out = []
    a0 = a(r, np.zeros_like(r))
    bad = np.nonzero(a0 != 0)[0]
    out.append(Verdict("H7", FAIL, {"r": r[bad[0]], "a(r,0)": a0[bad[0]]}) if bad.size
               else Verdict("H7", SAMPLED))
    R, X, Y = np.meshgrid(r, xi, xi, indexing="ij")
    mono = (a(R, X) - a(R, Y)) * (X - Y)
    idx = np.unravel_index(np.argmin(mono), mono.shape)
    if mono[idx] < -MONO_TOL:
        out.append(Verdict("H8", FAIL, {"r": R[idx], "xi": X[idx], "eta": Y[idx], "value": mono[idx]},
                           "a(r,.) not monotone"))
    else:
        out.append(Verdict("H8", SAMPLED))
    Rr, Xr = np.meshgrid(r, xi, indexing="ij")
    C9 = np.asarray(a.coercivity(r=Rr), dtype=float) * np.ones_like(Rr)
    lhs = a(Rr, Xr) * Xr
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.where(C9 > 0, np.abs(Xr) ** p / C9, np.inf)
    gap = lhs - rhs + 1e-12 * (1 + np.abs(rhs))
    idx = np.unravel_index(np.argmin(gap), gap.shape)
    if gap[idx] < 0:
        out.append(Verdict("H9", FAIL, {"r": Rr[idx], "xi": Xr[idx], "a.xi": lhs[idx],
                                        "|xi|^p/C": rhs[idx]}, "not coercive"))
    else:
        out.append(Verdict("H9", SAMPLED))
    C10 = np.asarray(a.growth(r=Rr), dtype=float) * np.ones_like(Rr)
    bound = C10 * (1 + np.abs(Xr) ** (p - 1))
    gap = bound - np.abs(a(Rr, Xr)) + 1e-12 * (1 + bound)
    idx = np.unravel_index(np.argmin(gap), gap.shape)
    if gap[idx] < 0:
        out.append(Verdict("H10", FAIL, {"r": Rr[idx], "xi": Xr[idx], "|a|": abs(a(Rr[idx], Xr[idx])),
                                         "bound": bound[idx]}, "growth too large"))
    else:
        out.append(Verdict("H10", SAMPLED))
    return out


def check_h8_uniform(a: DiffusionFlux, M: float, K: float = 10.0, n: int = 64) -> Verdict:
    """``(a(r,xi) - a(r,eta))(xi - eta) >= 1 / C(r, 1/|xi - eta|)`` on the sample grid."""
    if a.uniform_monotonicity is None:
        return Verdict("H'8", INCONCLUSIVE, detail="no uniform_monotonicity envelope declared")
    r = _grid(M, n)
    xi = _grid(K, n)
    R, X, Y = np.meshgrid(r, xi, xi, indexing="ij")
    off = X != Y
    R, X, Y = R[off], X[off], Y[off]
    lhs = (a(R, X) - a(R, Y)) * (X - Y)
    C = np.asarray(a.uniform_monotonicity(r=R, s=1.0 / np.abs(X - Y)), dtype=float) * np.ones_like(R)
    with np.errstate(divide="ignore"):
        rhs = np.where(C > 0, 1.0 / C, np.inf)
    gap = lhs - rhs + 1e-12 * (1 + np.abs(rhs))
    j = int(np.argmin(gap))
    if gap[j] < 0:
        return Verdict("H'8", FAIL, {"r": R[j], "xi": X[j], "eta": Y[j], "lhs": lhs[j], "rhs": rhs[j]},
                       "not uniformly monotone")
    return Verdict("H'8", SAMPLED)


def strict_components(phi: MonotoneFn, M: float) -> list[tuple[float, float]]:
    """Connected components of ``[-M, M] \\ E``, as closures."""
    comps, cur = [], -M
    for lo, hi in phi.flat_segments():
        if hi <= -M or lo >= M:
            continue
        if lo > cur:
            comps.append((cur, min(lo, M)))
        cur = max(cur, hi)
    if cur < M:
        comps.append((cur, M))
    return comps


def check_h11(a: DiffusionFlux, phi: MonotoneFn, M: float, K: float = 10.0, n: int = 64) -> Verdict:
    """Sampled uniqueness condition on pairs ``r, s`` in one component of the complement of ``E``.

    The ``r`` samples are a uniform grid plus points just left and right
    of every coefficient knot, so that jumps of ``k`` are straddled.
    """
    p = a.p
    xi = _grid(K, n)
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    knots = [pt[0] for pt in a.k.points]
    base = _grid(M, n)
    worst = None
    for lo, hi in strict_components(phi, M):
        extra = [z + d for z in knots for d in (-1e-6, 1e-6)]
        rs = np.unique(np.concatenate([base, extra]))
        rs = rs[(rs > lo) & (rs < hi)] if hi > lo else rs[:0]
        rs = np.unique(np.concatenate([rs, [lo, hi]]))
        if rs.size < 2:
            continue
        w = phi(rs)
        kr = a.k(rs)
        for i in range(rs.size):
            r, s = rs[i], rs[i:]
            C = np.asarray(a.lipschitz(r=r, s=s), dtype=float) * np.ones_like(s)
            dphi = np.abs(w[i] - w[i:])
            # (k(r) a0(xi) - k(s) a0(eta)) (xi - eta) for all s at once
            A0x, A0y = a.a0(X), a.a0(Y)
            val = ((kr[i] * A0x)[None] - kr[i:, None, None] * A0y[None]) * (X - Y)[None]
            val = val + (C * dphi)[:, None, None] * (1 + np.abs(X) ** p + np.abs(Y) ** p)[None]
            j = np.unravel_index(np.argmin(val), val.shape)
            if worst is None or val[j] < worst[0]:
                worst = (val[j], r, s[j[0]], X[j[1:]], Y[j[1:]])
    if worst is not None and worst[0] < -MONO_TOL:
        v, r, s, x, y = worst
        return Verdict("H11", FAIL, {"r": r, "s": s, "xi": x, "eta": y, "value": v},
                       "uniqueness condition violated")
    return Verdict("H11", SAMPLED)


# ---------------------------------------------------------------------------
# structure conditions and (H5)


def check_structure(b: MonotoneFn, psi: MonotoneFn, phi: MonotoneFn) -> tuple[Verdict, Verdict]:
    phi_flat = phi.flat_segments()
    b_flat = b.flat_segments()
    miss = phi_flat.covers(b_flat)
    h = (Verdict("H_str", FAIL, {"segment": miss}, "b flat where phi is not") if miss
         else Verdict("H_str", PASS))
    bp_flat = b_flat.intersect(psi.flat_segments())
    miss = phi_flat.covers(bp_flat)
    hp = (Verdict("H'_str", FAIL, {"segment": miss}, "b+psi flat where phi is not") if miss
          else Verdict("H'_str", PASS))
    return h, hp


def check_h5(b: MonotoneFn, psi: MonotoneFn, f_plus_bounded: bool = True,
             f_minus_bounded: bool = True) -> Verdict:
    blo, bhi = b.limits
    plo, phi_ = psi.limits
    if math.isfinite(bhi):
        if math.isfinite(phi_):
            return Verdict("H5", FAIL, {"b(+inf)": bhi, "psi(+inf)": phi_}, "b and psi bounded above")
        if not f_plus_bounded:
            return Verdict("H5", FAIL, {"b(+inf)": bhi}, "f+ unbounded while b bounded above")
    if math.isfinite(blo):
        if math.isfinite(plo):
            return Verdict("H5", FAIL, {"b(-inf)": blo, "psi(-inf)": plo}, "b and psi bounded below")
        if not f_minus_bounded:
            return Verdict("H5", FAIL, {"b(-inf)": blo}, "f- unbounded while b bounded below")
    return Verdict("H5", PASS)


def check_h5_elliptic(psi: MonotoneFn) -> Verdict:
    lo, hi = psi.limits
    if math.isfinite(lo) or math.isfinite(hi):
        return Verdict("H'5", FAIL, {"psi(-inf)": lo, "psi(+inf)": hi}, "psi is not onto")
    return Verdict("H'5", PASS)


# ---------------------------------------------------------------------------


def check_problem(spec, resolution: int = 64, K: float = 10.0, strong: bool = False,
                  stop_on_hard_fail: bool = False) -> HypothesisReport:
    """Run every check on a :class:`tnlab.problem.ProblemSpec`."""
    M = spec.working_range()
    rep = HypothesisReport(working_range=M, resolution=resolution)
    rep.add(check_h1(spec.b, spec.psi, spec.phi))
    if stop_on_hard_fail and not rep["H1"].passed:
        return rep
    h2, h3 = check_h2_h3(spec.phi)
    rep.add(h2)
    rep.add(h3)
    rep.add(Verdict("H4", PASS, detail="bounded grid data"))
    if spec.mode == "elliptic":
        rep.add(check_h5_elliptic(spec.psi))
    else:
        rep.add(check_h5(spec.b, spec.psi))
    rep.add(Verdict("H6", PASS, detail="flux built from continuous primitives"))
    for v in check_h7_h10(spec.diffusion, M, K, resolution):
        rep.add(v)
    rep.add(check_h11(spec.diffusion, spec.phi, M, K, resolution))
    h, hp = check_structure(spec.b, spec.psi, spec.phi)
    rep.add(h)
    rep.add(hp)
    if strong:
        rep.add(check_h8_uniform(spec.diffusion, M, K, resolution))
    return rep
