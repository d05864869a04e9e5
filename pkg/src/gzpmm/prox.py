"""Proximal operators, ball projections and Clarke Jacobian elements.

Conventions: ``prox_*(..., gamma, u)`` minimizes ``f(z) + gamma/2 ||z - u||^2``,
so ``1/gamma`` is the step. Jacobians are returned as
:class:`BlockDiagJacobian`, whose blocks all share the radial form
``alpha I + beta d d^T`` with ``d`` a unit vector.
"""
from __future__ import annotations

import numpy as np


class BlockDiagJacobian:
    """Block diagonal matrix ``diag(alpha_i I + beta_i d_i d_i^T)``.

    Parameters
    ----------
    group_of : ndarray of int, shape (p,)
        Group index of every coordinate.
    alpha, beta : ndarray, shape (m,)
        Per-block coefficients.
    direction : ndarray, shape (p,)
        Concatenated unit directions ``d_i`` (zero on blocks with ``beta_i = 0``).
    """

    def __init__(self, group_of, alpha, beta, direction):
        self.group_of = np.asarray(group_of)
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        self.m = self.alpha.size

    @property
    def shape(self):
        p = self.group_of.size
        return (p, p)

    @property
    def zero_blocks(self) -> np.ndarray:
        return (self.alpha == 0) & (self.beta == 0)

    @property
    def identity_blocks(self) -> np.ndarray:
        return (self.alpha == 1) & (self.beta == 0)

    def matvec(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        g = self.group_of
        proj = np.bincount(g, weights=self.direction * h, minlength=self.m)
        return self.alpha[g] * h + (self.beta * proj)[g] * self.direction

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        g = self.group_of
        same = g[:, None] == g[None, :]
        M = np.where(same, np.outer(self.direction, self.direction) * self.beta[g][:, None], 0.0)
        M[np.diag_indices_from(M)] += self.alpha[g]
        return M

    def sqrt(self) -> "BlockDiagJacobian":
        """Symmetric square root (blocks must be PSD)."""
        lam_perp = np.maximum(self.alpha, 0.0)
        lam_par = np.maximum(self.alpha + self.beta, 0.0)
        a = np.sqrt(lam_perp)
        return BlockDiagJacobian(self.group_of, a, np.sqrt(lam_par) - a, self.direction)


def _unit(y, norm):
    return np.divide(y, norm, out=np.zeros_like(y), where=norm > 0)


# -- loss ------------------------------------------------------------------

def prox_loss(q: int, n: int, gamma: float, u) -> np.ndarray:
    """Prox of ``||z||_q / sqrt(n)`` with step ``1/gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    t = 1.0 / (gamma * np.sqrt(n))
    if q == 1:
        return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)
    nu = np.linalg.norm(u)
    if nu <= t:
        return np.zeros_like(u)
    return u * ((nu - t) / nu)


def project_ball(radius: float, y) -> np.ndarray:
    """Euclidean projection onto ``{||y|| <= radius}``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    y = np.asarray(y, dtype=float)
    ny = np.linalg.norm(y)
    if ny <= radius:
        return y.copy()
    return y * (radius / ny)


def project_loss_dual_ball(q: int, n: int, gamma: float, y) -> np.ndarray:
    """Projection onto the dual-norm ball of ``||.||_q/sqrt(n)`` scaled by
    ``1/gamma``: the l2 ball (q=2) or the l-infinity box (q=1) of radius
    ``1/(gamma sqrt(n))``."""
    r = 1.0 / (gamma * np.sqrt(n))
    y = np.asarray(y, dtype=float)
    if q == 1:
        return np.clip(y, -r, r)
    return project_ball(r, y)


def jac_project_ball(radius: float, y) -> np.ndarray:
    """One Clarke Jacobian element of :func:`project_ball` at ``y`` (dense).

    The identity is chosen on the sphere ``||y|| = radius``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    y = np.asarray(y, dtype=float)
    ny = np.linalg.norm(y)
    d = y.size
    if ny <= radius:
        return np.eye(d)
    u = y / ny
    return (radius / ny) * (np.eye(d) - np.outer(u, u))


def jac_prox_loss(q: int, n: int, gamma: float, u) -> BlockDiagJacobian:
    """Clarke Jacobian element of :func:`prox_loss` at ``u``.

    Zero is selected on the kink surfaces (``|u_i| = t`` or ``||u|| = t``).
    """
    u = np.asarray(u, dtype=float)
    t = 1.0 / (gamma * np.sqrt(n))
    if q == 1:
        alpha = (np.abs(u) > t).astype(float)
        return BlockDiagJacobian(np.arange(u.size), alpha, np.zeros(u.size), np.zeros(u.size))
    nu = np.linalg.norm(u)
    zeros = np.zeros(u.size, dtype=np.intp)
    if nu <= t:
        return BlockDiagJacobian(zeros, [0.0], [0.0], np.zeros(u.size))
    c = t / nu
    return BlockDiagJacobian(zeros, [1.0 - c], [c], u / nu)


# -- weighted group penalty -------------------------------------------------

def prox_weighted_group(v, mu: float, gamma: float, z, groups) -> np.ndarray:
    """Prox of ``sum_i v_i ||x_Ji|| + mu/2 ||x||^2`` with step ``1/gamma``.

    Group ``i`` of the output is
    ``gamma/(gamma+mu) * max(1 - v_i/(gamma ||z_Ji||), 0) * z_Ji``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    g = groups.group_of
    norms = np.sqrt(np.bincount(g, weights=z * z, minlength=groups.m))
    shrink = np.maximum(1.0 - np.divide(v, gamma * norms, out=np.full(groups.m, np.inf), where=norms > 0), 0.0)
    shrink[v == 0] = 1.0
    return (gamma / (gamma + mu)) * shrink[g] * z


def project_group_balls(radii, y, groups) -> np.ndarray:
    """Projection onto the product of group balls ``{||y_Ji|| <= radii_i}``."""
    y = np.asarray(y, dtype=float)
    g = groups.group_of
    norms = np.sqrt(np.bincount(g, weights=y * y, minlength=groups.m))
    scale = np.minimum(1.0, np.divide(radii, norms, out=np.ones(groups.m), where=norms > 0))
    return scale[g] * y


def jac_prox_weighted_group(v, mu: float, gamma: float, z, groups) -> BlockDiagJacobian:
    """Clarke Jacobian element of :func:`prox_weighted_group` at ``z``.

    Active groups (``||z_Ji|| > v_i/gamma``) get
    ``gamma/(gamma+mu) * (I - (v_i/gamma)(I/||z|| - z z^T/||z||^3))``;
    the zero block is chosen on and inside the threshold sphere.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    g = groups.group_of
    norms = np.sqrt(np.bincount(g, weights=z * z, minlength=groups.m))
    active = (norms > v / gamma) | (v == 0)
    scale = gamma / (gamma + mu)
    c = np.divide(v, gamma * norms, out=np.zeros(groups.m), where=active & (norms > 0))
    alpha = np.where(active, scale * (1.0 - c), 0.0)
    beta = np.where(active, scale * c, 0.0)
    direction = _unit(z, norms[g])
    return BlockDiagJacobian(g, alpha, beta, direction)
