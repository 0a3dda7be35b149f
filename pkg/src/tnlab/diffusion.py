"""Leray-Lions diffusion fields of the form ``a(r, xi) = k(r) a0(xi)``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, compile_expr

BASES = ("linear", "p_power")
INTERFACES = ("min", "mean")


@dataclass(frozen=True)
class Coefficient:
    """Piecewise-linear ``k(r)`` with constant extension.

    Repeated knots encode jumps: ``[(0, 1), (0, 2)]`` is 1 for ``r < 0`` and
    2 for ``r > 0``.
    """

    points: tuple[tuple[float, float], ...] = ((0.0, 1.0),)

    def __post_init__(self):
        pts = tuple((float(r), float(v)) for r, v in self.points)
        if not pts:
            raise ValueError("coefficient needs at least one point")
        if any(b[0] < a[0] for a, b in zip(pts, pts[1:])):
            raise ValueError("coefficient knots must be nondecreasing")
        object.__setattr__(self, "points", pts)

    @property
    def _r(self):
        return np.array([p[0] for p in self.points])

    @property
    def _v(self):
        return np.array([p[1] for p in self.points])

    @property
    def is_constant(self) -> bool:
        return len(set(p[1] for p in self.points)) == 1

    def __call__(self, r):
        ra = np.asarray(r, dtype=float)
        rk, vk = self._r, self._v
        if rk.size == 1:
            out = np.full(ra.shape, vk[0])
        else:
            # right-continuous at jumps
            j = np.clip(np.searchsorted(rk, ra, side="right") - 1, 0, rk.size - 2)
            h = rk[j + 1] - rk[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(h > 0, (ra - rk[j]) / h, 1.0)
            t = np.clip(t, 0.0, 1.0)
            out = vk[j] + t * (vk[j + 1] - vk[j])
            out = np.where(ra < rk[0], vk[0], out)
            out = np.where(ra >= rk[-1], vk[-1], out)
        return out if ra.ndim else float(out)

    def derivative(self, r):
        ra = np.asarray(r, dtype=float)
        rk, vk = self._r, self._v
        if rk.size == 1:
            return np.zeros(ra.shape) if ra.ndim else 0.0
        j = np.clip(np.searchsorted(rk, ra, side="right") - 1, 0, rk.size - 2)
        h = rk[j + 1] - rk[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(h > 0, (vk[j + 1] - vk[j]) / h, 0.0)
        s = np.where((ra < rk[0]) | (ra >= rk[-1]), 0.0, s)
        return s if ra.ndim else float(s)

    def minimum(self) -> float:
        return float(self._v.min())


def _expr(v, vocab):
    return v if isinstance(v, Expr) else compile_expr(v, vocab)


@dataclass(frozen=True)
class DiffusionFlux:
    """``a(r, xi) = k(r) a0(xi)`` with ``a0(xi) = xi`` or ``|xi|^(p-2) xi``.

    The envelope expressions are the constants of the Leray-Lions
    conditions: ``coercivity`` is ``C(r)`` in ``a.xi >= |xi|^p / C(r)``,
    ``growth`` is ``C(r)`` in ``|a| <= C(r)(1 + |xi|^(p-1))``, ``lipschitz``
    is the symmetric ``C(r, s)`` of the uniqueness condition and
    ``uniform_monotonicity`` (optional) is ``C(r, s)`` in
    ``(a(r,xi) - a(r,eta))(xi - eta) >= 1 / C(r, 1/|xi - eta|)``.
    """

    p: float = 2.0
    base: str = "linear"
    k: Coefficient = field(default_factory=Coefficient)
    coercivity: Expr | str = "1"
    growth: Expr | str = "1"
    lipschitz: Expr | str = "0"
    uniform_monotonicity: Expr | str | None = None
    interface: str = "min"

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"diffusion base must be one of {BASES}, got {self.base!r}")
        if self.interface not in INTERFACES:
            raise ValueError(f"interface must be one of {INTERFACES}, got {self.interface!r}")
        if not self.p > 1:
            raise ValueError("diffusion exponent p must exceed 1")
        if not isinstance(self.k, Coefficient):
            object.__setattr__(self, "k", Coefficient(tuple(map(tuple, self.k))))
        object.__setattr__(self, "coercivity", _expr(self.coercivity, "envelope"))
        object.__setattr__(self, "growth", _expr(self.growth, "envelope"))
        object.__setattr__(self, "lipschitz", _expr(self.lipschitz, "envelope"))
        if self.uniform_monotonicity is not None:
            object.__setattr__(self, "uniform_monotonicity",
                               _expr(self.uniform_monotonicity, "envelope"))

    @classmethod
    def linear(cls, **kw) -> "DiffusionFlux":
        kw.setdefault("uniform_monotonicity", "s*s")
        return cls(p=2.0, base="linear", **kw)

    @classmethod
    def p_laplacian(cls, p: float, **kw) -> "DiffusionFlux":
        return cls(p=p, base="p_power", **kw)

    def a0(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.base == "linear" or self.p == 2.0:
            return xi
        return np.abs(xi) ** (self.p - 2.0) * xi

    def a0_prime(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.base == "linear" or self.p == 2.0:
            return np.ones_like(xi)
        with np.errstate(divide="ignore"):
            d = (self.p - 1.0) * np.abs(xi) ** (self.p - 2.0)
        return np.minimum(d, 1e12)

    def __call__(self, r, xi):
        return self.k(r) * self.a0(xi)

    def face_k(self, ul, ur):
        kl, kr = self.k(ul), self.k(ur)
        if self.interface == "min":
            return np.minimum(kl, kr)
        return 0.5 * (kl + kr)

    def face_k_partials(self, ul, ur):
        """Partial derivatives of the interface coefficient in ``ul`` and ``ur``."""
        kl, kr = self.k(ul), self.k(ur)
        dl, dr = self.k.derivative(ul), self.k.derivative(ur)
        if self.interface == "min":
            left = kl <= kr
            return np.where(left, dl, 0.0), np.where(left, 0.0, dr)
        return 0.5 * dl, 0.5 * dr

    def describe(self) -> dict:
        d = {
            "p": self.p,
            "base": self.base,
            "k": [list(pt) for pt in self.k.points],
            "coercivity": self.coercivity.source,
            "growth": self.growth.source,
            "lipschitz": self.lipschitz.source,
            "interface": self.interface,
        }
        if self.uniform_monotonicity is not None:
            d["uniform_monotonicity"] = self.uniform_monotonicity.source
        return d

    @classmethod
    def from_description(cls, d: dict) -> "DiffusionFlux":
        d = dict(d)
        if "k" in d:
            d["k"] = Coefficient(tuple(tuple(pt) for pt in d["k"]))
        return cls(**d)


def numerical_diffusion_flux(a: DiffusionFlux, phi, u_left, u_right, dx):
    """Two-point flux ``k_face a0((phi(u_r) - phi(u_l)) / dx)``."""
    xi = (np.asarray(phi(u_right)) - np.asarray(phi(u_left))) / dx
    out = a.face_k(u_left, u_right) * a.a0(xi)
    return out if np.ndim(out) else float(out)
