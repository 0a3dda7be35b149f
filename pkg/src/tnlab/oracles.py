"""Closed-form reference solutions for the benchmark fixtures."""
from __future__ import annotations

import numpy as np


def heat(x, t):
    """``u_t = u_xx`` on (0, 1), ``u0 = sin(pi x)``."""
    return np.exp(-np.pi ** 2 * t) * np.sin(np.pi * np.asarray(x))


def barenblatt(x, t, C: float = 0.1, t0: float = 0.1):
    """``u_t = (u^2)_xx`` self-similar solution ``s^(-1/3) (C - x^2 / (12 s^(2/3)))_+``, ``s = t0 + t``."""
    s = t0 + t
    x = np.asarray(x, dtype=float)
    return s ** (-1.0 / 3.0) * np.maximum(C - x * x / (12.0 * s ** (2.0 / 3.0)), 0.0)


def elliptic_sine(x, t=0.0):
    """``-u'' + u = (1 + pi^2) sin(pi x)`` with zero Dirichlet data."""
    return np.sin(np.pi * np.asarray(x))


def burgers_front(t, x0: float = 0.5, left: float = 1.0, right: float = 0.0):
    """Shock position for ``f(z) = z^2/2`` Riemann data; speed from the jump condition."""
    speed = 0.5 * (left ** 2 - right ** 2) / (left - right)
    return x0 + speed * t


def front_position(x, u, level: float = 0.5) -> float:
    """Last downward crossing of ``level`` by linear interpolation of cell values."""
    u = np.asarray(u)
    idx = np.nonzero((u[:-1] >= level) & (u[1:] < level))[0]
    if idx.size == 0:
        raise ValueError("no downward crossing")
    i = int(idx[-1])
    dx = x[i + 1] - x[i]
    return float(x[i] + (u[i] - level) / (u[i] - u[i + 1]) * dx)


ORACLES = {"heat": heat, "barenblatt": barenblatt, "elliptic_sine": elliptic_sine}
