"""Proximal ADMM for the weighted group problem.

Splits ``z = Ax - b`` and linearizes the augmented term in ``x`` with the
metric ``gamma I - sigma A^T A``, so both blocks reduce to closed-form
proximal maps. Optional proximal terms ``gamma1/2 ||x - x_k||^2 +
gamma2/2 ||z - z_k||^2`` let it solve the same subproblems as the
semismooth Newton engine.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .prox import prox_loss, prox_weighted_group

TAU_MAX = (1 + np.sqrt(5)) / 2


def spectral_norm_sq(A, iters: int = 50, tol: float = 1e-8, seed: int = 0) -> float:
    """Estimate ``lambda_max(A^T A)`` by power iteration."""
    p = A.shape[1]
    x = np.random.Generator(np.random.Philox(seed)).standard_normal(p)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = A.T @ (A @ x)
        lam_new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        if abs(lam_new - lam) <= tol * max(lam_new, 1.0):
            lam = lam_new
            break
        lam = lam_new
    return lam


@dataclass
class AdmmConfig:
    sigma: float = 1.0
    gamma: float = 1.0
    tau: float = 1.618
    eps: float = 1e-5
    max_iter: int = 10000
    max_time_s: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 1 < self.tau < TAU_MAX:
            raise ValueError("tau must lie in (1, (1+sqrt(5))/2)")
        if self.eps <= 0 or self.max_iter < 1:
            raise ValueError("eps and max_iter must be positive")

    @classmethod
    def for_data(cls, data, sigma: float = 1.0, tau: float = 1.618, eps: float = 1e-5,
                 max_iter: int = 10000, **kw):
        gamma = 1.01 * sigma * spectral_norm_sq(data.A)
        cfg = cls(sigma=sigma, gamma=max(gamma, 1e-12), tau=tau, eps=eps, max_iter=max_iter, **kw)
        lam = cfg.metric_eigenvalue(data.A)
        if lam < -1e-9:
            # power iteration stalled short of lambda_max; use the exact value
            cfg.gamma = 1.01 * (cfg.gamma - lam)
        return cfg

    def metric_eigenvalue(self, A) -> float:
        """Smallest eigenvalue of ``gamma I - sigma A^T A``."""
        n, p = A.shape
        G = A @ A.T if n < p else A.T @ A
        return self.gamma - self.sigma * float(np.linalg.eigvalsh(G)[-1])

    def check_metric(self, A) -> float:
        """:meth:`metric_eigenvalue`, raising if it is negative."""
        lam = self.metric_eigenvalue(A)
        if lam < -1e-9:
            raise ValueError(f"gamma too small: gamma I - sigma A^T A has eigenvalue {lam:.3e}")
        return lam


@dataclass
class AdmmReport:
    iterations: int
    status: str
    kkt: float
    seconds: float
    primal_residuals: List[float] = field(default_factory=list, repr=False)


def admm_z_step(u, sigma: float, q: int, n: int) -> np.ndarray:
    """``prox_{f1/sigma}(u)`` with ``u = Ax - b + xi/sigma``."""
    return prox_loss(q, n, sigma, u)


def admm_x_step(x_j, z_next, xi_j, v, mu: float, sigma: float, gamma: float, data,
                gamma1: float = 0.0, x_anchor=None, Ax_j=None) -> np.ndarray:
    """Linearized x-update.

    ``x_tilde = x_j - A^T(sigma(A x_j - z - b) + xi) / gamma`` followed by the
    weighted group prox with weight ``gamma`` (``gamma + gamma1`` when a
    proximal anchor is present). ``Ax_j`` may be passed to skip one product.
    """
    A = data.A
    if Ax_j is None:
        Ax_j = A @ x_j
    x_tilde = x_j - (A.T @ (sigma * (Ax_j - z_next - data.b) + xi_j)) / gamma
    if gamma1 > 0:
        c = (gamma * x_tilde + gamma1 * np.asarray(x_anchor)) / (gamma + gamma1)
        return prox_weighted_group(v, mu, gamma + gamma1, c, data.groups)
    return prox_weighted_group(v, mu, gamma, x_tilde, data.groups)


def augmented_lagrangian(data, v, mu, sigma, x, z, xi) -> float:
    from .problem import eval_loss, group_norms

    r = data.A @ x - z - data.b
    return (eval_loss(z, data.q) + 0.5 * mu * float(x @ x)
            + float(np.asarray(v) @ group_norms(x, data.groups))
            + float(xi @ r) + 0.5 * sigma * float(r @ r))


def admm_run(data, v, mu: float, config: AdmmConfig, warm=None, prox=None, check=True):
    """Run pADMM from ``warm = (x0, z0, xi0)``; any entry may be ``None``.

    ``prox = (gamma1, x_anchor, gamma2, z_anchor)`` adds proximal terms.
    Stops when the shared KKT residual drops below ``config.eps``. On hitting
    ``max_iter`` the iterate with the smallest residual is returned.
    ``check=False`` skips the metric eigenvalue check for callers that have
    already done it for this ``A``.
    """
    from .pmm import kkt_residual

    A, b = data.A, data.b
    if check:
        config.check_metric(A)
    x0, z0, xi0 = warm if warm is not None else (None, None, None)
    x = np.zeros(data.p) if x0 is None else np.array(x0, dtype=float)
    z = A @ x - b if z0 is None else np.array(z0, dtype=float)
    xi = np.zeros(data.n) if xi0 is None else np.array(xi0, dtype=float)
    if x.shape != (data.p,) or z.shape != (data.n,) or xi.shape != (data.n,):
        raise ValueError("warm start has wrong dimensions")
    v = np.asarray(v, dtype=float)
    g1, xk, g2, zk = prox if prox is not None else (0.0, None, 0.0, None)
    sigma, gamma, tau = config.sigma, config.gamma, config.tau
    Ax = A @ x
    best = (np.inf, x, z, xi)
    hist = []
    status = "max_iter"
    t0 = time.monotonic()
    it = 0
    for it in range(1, config.max_iter + 1):
        u = Ax - b + xi / sigma
        if g2 > 0:
            z = prox_loss(data.q, data.n, sigma + g2, (sigma * u + g2 * zk) / (sigma + g2))
        else:
            z = admm_z_step(u, sigma, data.q, data.n)
        x = admm_x_step(x, z, xi, v, mu, sigma, gamma, data, g1, xk, Ax_j=Ax)
        Ax = A @ x
        r = Ax - z - b
        xi = xi + tau * sigma * r
        hist.append(float(np.linalg.norm(r)))
        err = kkt_residual(data, v, x, z, xi, mu=mu, prox=prox, Ax=Ax)
        if err < best[0]:
            best = (err, x, z, xi)
        if err <= config.eps:
            status = "converged"
            break
        if config.max_time_s is not None and time.monotonic() - t0 > config.max_time_s:
            status = "time_limit"
            break
    err, x, z, xi = best
    return x, z, xi, AdmmReport(it, status, err, time.monotonic() - t0, hist)
