"""Surrogate family for the group zero-norm.

Each family is a convex ``phi`` on ``[0, 1]`` with ``min phi = 0`` and
``phi(1) = 1``. Restricting ``phi`` to ``[0, 1]`` gives ``psi``; its convex
conjugate ``psi*`` yields the capped penalty

    varphi_rho(t) = t - psi*(rho t) / rho

and the majorization weights ``w_i = (psi*)'(rho ||x_Ji||)``.

Three families are supported:

``linear``   phi(t) = t,                                  t* = 0
``scad``     phi(t) = (a-1)/(a+1) t^2 + 2/(a+1) t,  a > 1, t* = 0
``mcp``      phi(t) = a^2/4 t^2 + (2a-a^2)/2 t + (a-2)^2/4, a > 2, t* = (a-2)/a
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("linear", "scad", "mcp")


@dataclass(frozen=True)
class PhiFamily:
    kind: str
    a: float = 0.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; choose from {FAMILIES}")
        object.__setattr__(self, "kind", kind)
        if kind == "scad" and not self.a > 1:
            raise ValueError("scad family requires a > 1")
        if kind == "mcp" and not self.a > 2:
            raise ValueError("mcp family requires a > 2")

    @property
    def t_star(self) -> float:
        return (self.a - 2) / self.a if self.kind == "mcp" else 0.0

    def phi(self, t):
        """The generating function on ``[0, 1]``."""
        t = np.asarray(t, dtype=float)
        a = self.a
        if self.kind == "linear":
            return t
        if self.kind == "scad":
            return (a - 1) / (a + 1) * t ** 2 + 2 / (a + 1) * t
        return a * a / 4 * t ** 2 + (2 * a - a * a) / 2 * t + (a - 2) ** 2 / 4

    def kinks(self):
        """Breakpoints of the piecewise formula for ``psi*``."""
        a = self.a
        if self.kind == "linear":
            return (1.0,)
        if self.kind == "scad":
            return (2 / (a + 1), 2 * a / (a + 1))
        return (a - a * a / 2, a)


def _out(value, omega):
    return float(value) if np.ndim(omega) == 0 else value


def psi_star(phi: PhiFamily, omega):
    """Closed-form conjugate ``psi*(omega) = sup_{t in [0,1]} omega t - phi(t)``."""
    w = np.asarray(omega, dtype=float)
    a = phi.a
    if phi.kind == "linear":
        val = np.where(w <= 1, 0.0, w - 1)
    elif phi.kind == "scad":
        lo, hi = 2 / (a + 1), 2 * a / (a + 1)
        mid = ((a + 1) * w - 2) ** 2 / (4 * (a * a - 1))
        val = np.where(w <= lo, 0.0, np.where(w <= hi, mid, w - 1))
    else:
        lo, hi = a - a * a / 2, a
        off = (a - 2) ** 2 / 4
        mid = (a * (a - 2) / 2 + w) ** 2 / (a * a) - off
        val = np.where(w <= lo, -off, np.where(w <= hi, mid, w - 1))
    return _out(val, omega)


def psi_star_prime(phi: PhiFamily, omega):
    """Derivative of ``psi*``; the right derivative (1) at the linear kink."""
    w = np.asarray(omega, dtype=float)
    a = phi.a
    if phi.kind == "linear":
        val = np.where(w >= 1, 1.0, 0.0)
    elif phi.kind == "scad":
        val = np.clip(((a + 1) * w - 2) / (2 * (a - 1)), 0.0, 1.0)
    else:
        val = np.clip((a - 2) / a + 2 * w / (a * a), 0.0, 1.0)
    return _out(val, omega)


def varphi_rho(phi: PhiFamily, rho: float, t):
    """Capped penalty ``t - psi*(rho t) / rho``, evaluated branchwise."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    t = np.asarray(t, dtype=float)
    a = phi.a
    if phi.kind == "linear":
        val = np.where(t <= 1 / rho, t, 1 / rho)
    elif phi.kind == "scad":
        lo, hi = 2 / (rho * (a + 1)), 2 * a / (rho * (a + 1))
        mid = t - ((a + 1) * rho * t - 2) ** 2 / (4 * rho * (a * a - 1))
        val = np.where(t <= lo, t, np.where(t <= hi, mid, 1 / rho))
    else:
        lo, hi = (2 * a - a * a) / (2 * rho), a / rho
        off = (a - 2) ** 2 / (4 * rho)
        mid = t + off - (a * (a - 2) / 2 + rho * t) ** 2 / (a * a * rho)
        val = np.where(t <= lo, t + off, np.where(t <= hi, mid, 1 / rho))
    return _out(val, t)


def weights_from_norms(phi: PhiFamily, rho: float, norms) -> np.ndarray:
    """MM weights from group norms using the explicit clipped formulas."""
    t = rho * np.asarray(norms, dtype=float)
    a = phi.a
    if phi.kind == "linear":
        return np.where(t >= 1, 1.0, 0.0)
    if phi.kind == "scad":
        return np.minimum(1.0, np.maximum(0.0, ((a + 1) * t - 2) / (2 * (a - 1))))
    return np.minimum(1.0, np.maximum(0.0, (a - 2) / a + 2 * t / (a * a)))


def weights(phi: PhiFamily, rho: float, x, groups) -> np.ndarray:
    """``w_i = (psi*)'(rho ||x_Ji||)`` for every group, each in ``[0, 1]``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    from .problem import group_norms

    return weights_from_norms(phi, rho, group_norms(x, groups))
