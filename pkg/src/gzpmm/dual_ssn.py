"""Dual proximal-point / semismooth Newton solver for the weighted subproblem.

The subproblem solved at every MM step is

    min_{x, z}  f1(z) + mu/2 ||x||^2 + h(x) + gamma1/2 ||x - x_k||^2
                + gamma2/2 ||z - z_k||^2      s.t.  A x - z - b = 0,

with ``f1(z) = ||z||_q / sqrt(n)`` and ``h(x) = sum_i v_i ||x_Ji||``. Its dual
objective ``Psi(xi)`` is convex and continuously differentiable with gradient
``b + z(xi) - A x(xi)``, where ``z(xi)`` and ``x(xi)`` are the prox points

    z(xi) = prox_{f1/gamma2}(z_k + xi/gamma2)
    x(xi) = prox_{h/r}((gamma1 x_k - A^T xi)/r),     r = mu + gamma1.

``Psi`` is minimized by an inexact proximal point loop whose strongly convex
steps are solved by a semismooth Newton method with a Wolfe line search.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .problem import ProblemData, eval_loss
from .prox import jac_prox_loss, jac_prox_weighted_group, prox_loss, prox_weighted_group

logger = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 2000


@dataclass(frozen=True)
class SubproblemSpec:
    data: ProblemData
    v: np.ndarray
    x_anchor: np.ndarray
    z_anchor: np.ndarray
    gamma1: float
    gamma2: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        v = np.asarray(self.v, dtype=float)
        if v.shape != (self.data.m,) or np.any(v < 0):
            raise ValueError("v must hold one nonnegative weight per group")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "x_anchor", np.asarray(self.x_anchor, dtype=float))
        object.__setattr__(self, "z_anchor", np.asarray(self.z_anchor, dtype=float))

    @property
    def r(self) -> float:
        return self.mu + self.gamma1

    @property
    def constant(self) -> float:
        """Value of ``primal* + Psi(xi*)``."""
        xk, zk = self.x_anchor, self.z_anchor
        return 0.5 * self.gamma1 * float(xk @ xk) + 0.5 * self.gamma2 * float(zk @ zk)


@dataclass
class SsnParams:
    eta: float = 1e-2
    varsigma: float = 0.5
    beta: float = 0.5
    c1: float = 1e-4
    c2: float = 0.9
    varrho0: float = 1e-4
    varrho_floor: float = 1e-12
    max_newton: int = 50
    max_ppa: int = 100
    max_linesearch: int = 50
    cg_maxiter: int = 200


class _Point:
    """Everything the solver needs at one dual point."""

    __slots__ = ("xi", "u", "y", "z", "x", "Ax", "grad", "value")

    def __init__(self, spec: SubproblemSpec, xi):
        data = spec.data
        A = data.A
        self.xi = xi
        self.u = spec.z_anchor + xi / spec.gamma2
        self.y = (spec.gamma1 * spec.x_anchor - A.T @ xi) / spec.r
        self.z = prox_loss(data.q, data.n, spec.gamma2, self.u)
        self.x = prox_weighted_group(spec.v, 0.0, spec.r, self.y, data.groups)
        self.Ax = A @ self.x
        self.grad = data.b + self.z - self.Ax
        x, z = self.x, self.z
        h = float(spec.v @ np.sqrt(np.bincount(data.groups.group_of, weights=x * x, minlength=data.m)))
        self.value = (float(data.b @ xi)
                      + spec.gamma2 * float(z @ (self.u - 0.5 * z)) - eval_loss(z, data.q)
                      + spec.r * float(x @ (self.y - 0.5 * x)) - h)


def dual_objective(spec: SubproblemSpec, xi) -> float:
    """Dual objective ``Psi(xi)`` (to be minimized)."""
    return _Point(spec, np.asarray(xi, dtype=float)).value


def dual_gradient(spec: SubproblemSpec, xi) -> np.ndarray:
    """``grad Psi(xi) = b + z(xi) - A x(xi)``."""
    return _Point(spec, np.asarray(xi, dtype=float)).grad


def recover_primal(spec: SubproblemSpec, xi):
    """Primal points ``(x(xi), z(xi))`` minimizing the Lagrangian at ``xi``."""
    pt = _Point(spec, np.asarray(xi, dtype=float))
    return pt.x, pt.z


def primal_objective(spec: SubproblemSpec, x) -> float:
    """Subproblem objective at ``x`` with ``z = A x - b``."""
    data = spec.data
    x = np.asarray(x, dtype=float)
    w = data.A @ x - data.b
    dx, dz = x - spec.x_anchor, w - spec.z_anchor
    h = float(spec.v @ np.sqrt(np.bincount(data.groups.group_of, weights=x * x, minlength=data.m)))
    return (eval_loss(w, data.q) + 0.5 * spec.mu * float(x @ x) + h
            + 0.5 * spec.gamma1 * float(dx @ dx) + 0.5 * spec.gamma2 * float(dz @ dz))


def _gap(spec: SubproblemSpec, pt: _Point) -> float:
    # x-terms of primal and Lagrangian cancel exactly; only the z-block remains
    e = pt.Ax - spec.data.b - pt.z
    q = spec.data.q
    return (eval_loss(pt.z + e, q) - eval_loss(pt.z, q)
            + float((spec.gamma2 * (pt.z - spec.z_anchor) - pt.xi) @ e)
            + 0.5 * spec.gamma2 * float(e @ e))


def duality_gap(spec: SubproblemSpec, xi) -> float:
    """``primal(x(xi)) + Psi(xi) - constant``, evaluated without cancellation."""
    return _gap(spec, _Point(spec, np.asarray(xi, dtype=float)))


# -- Newton system ----------------------------------------------------------

class NewtonMatrix:
    """``W = varrho I + P/gamma2 + A D A^T / r`` at one dual point.

    ``P`` and ``D`` are Clarke Jacobian elements of the two prox maps. The
    second term is the loss part ``gamma2^{-1}(I - U)`` and the third the
    group part ``r^{-1} A (I - V) A^T`` in projection form.
    """

    def __init__(self, spec: SubproblemSpec, pt: _Point, varrho: float, cg_maxiter: int = 200):
        data = spec.data
        self.spec, self.varrho, self.cg_maxiter = spec, varrho, cg_maxiter
        self.P = jac_prox_loss(data.q, data.n, spec.gamma2, pt.u)
        self.D = jac_prox_weighted_group(spec.v, 0.0, spec.r, pt.y, data.groups)
        keep = ~self.D.zero_blocks
        self.cols = np.flatnonzero(keep[data.groups.group_of])

    def matvec(self, d) -> np.ndarray:
        A, s = self.spec.data.A, self.spec
        out = self.varrho * d + self.P.matvec(d) / s.gamma2
        if self.cols.size:
            out = out + (A @ self.D.matvec(A.T @ d)) / s.r
        return out

    # E = varrho I + P/gamma2 keeps the radial block form
    def _E(self):
        P, g2 = self.P, self.spec.gamma2
        return P.alpha / g2 + self.varrho, P.beta / g2, P.direction, P.group_of

    def _E_solve(self, M):
        alpha, beta, d, group_of = self._E()
        if self.spec.data.q == 1:
            a = alpha[group_of]
            return M / (a[:, None] if M.ndim == 2 else a)
        a, b = alpha[0], beta[0]
        if b == 0:
            return M / a
        proj = d @ M
        return (M - (b / (a + b)) * (np.outer(d, proj) if M.ndim == 2 else d * proj)) / a

    def _E_dense(self):
        alpha, beta, d, group_of = self._E()
        if self.spec.data.q == 1:
            return np.diag(alpha[group_of])
        return alpha[0] * np.eye(d.size) + beta[0] * np.outer(d, d)

    def _factor_B(self):
        """``B`` with ``B B^T = A D A^T`` restricted to active columns."""
        A, cols = self.spec.data.A, self.cols
        S = self.D.sqrt()
        g = S.group_of[cols]
        Ac = A[:, cols]
        dirs = S.direction[cols]
        B = Ac * S.alpha[g]
        if np.any(S.beta != 0):
            ids, local = np.unique(g, return_inverse=True)
            onehot = np.zeros((cols.size, ids.size))
            onehot[np.arange(cols.size), local] = 1.0
            proj = (Ac * dirs) @ onehot
            B += (proj[:, local] * S.beta[g]) * dirs
        return B

    def solve(self, rhs, tol: float):
        """Solve ``W d = rhs``; direct (Cholesky / Woodbury) or CG."""
        n, pa, r = rhs.size, self.cols.size, self.spec.r
        if pa == 0:
            return self._E_solve(rhs), "direct"
        if min(n, pa) <= DIRECT_SOLVE_LIMIT:
            B = self._factor_B()
            if n <= pa:
                W = self._E_dense() + (B @ B.T) / r
                return scipy.linalg.cho_solve(scipy.linalg.cho_factor(W), rhs), "cholesky"
            # Woodbury: W^{-1} = E^{-1} - E^{-1} B (r I + B^T E^{-1} B)^{-1} B^T E^{-1}
            EinvB = self._E_solve(B)
            K = r * np.eye(pa) + B.T @ EinvB
            Einv_rhs = self._E_solve(rhs)
            corr = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K), B.T @ Einv_rhs)
            return Einv_rhs - EinvB @ corr, "woodbury"
        return self._cg(rhs, tol), "cg"

    def _cg(self, rhs, tol):
        op = LinearOperator((rhs.size, rhs.size), matvec=self.matvec, dtype=float)
        nr = np.linalg.norm(rhs)
        d, info = cg(op, rhs, rtol=min(1.0, tol / nr) if nr > 0 else 1.0,
                     atol=0.0, maxiter=self.cg_maxiter)
        if info != 0:
            logger.warning("CG did not converge in %d iterations; using steepest descent",
                           self.cg_maxiter)
            return rhs.copy()
        return d


def newton_matrix_apply(spec: SubproblemSpec, xi, d, varrho: float = 0.0) -> np.ndarray:
    """Apply the generalized Hessian element ``W`` at ``xi`` to ``d``."""
    pt = _Point(spec, np.asarray(xi, dtype=float))
    return NewtonMatrix(spec, pt, varrho).matvec(np.asarray(d, dtype=float))


def solve_newton_system(spec: SubproblemSpec, xi, grad, varrho: float,
                        params: Optional[SsnParams] = None) -> np.ndarray:
    """Direction ``d`` with ``W d = -grad`` up to ``min(eta, ||grad||^{1+varsigma})``."""
    params = params or SsnParams()
    grad = np.asarray(grad, dtype=float)
    gn = np.linalg.norm(grad)
    if gn == 0:
        return np.zeros_like(grad)
    pt = _Point(spec, np.asarray(xi, dtype=float))
    W = NewtonMatrix(spec, pt, varrho, params.cg_maxiter)
    d, _ = W.solve(-grad, min(params.eta, gn ** (1 + params.varsigma)))
    return d


# -- semismooth Newton --------------------------------------------------------

@dataclass
class SncgResult:
    xi: np.ndarray
    iterations: int
    grad_norms: List[float]
    values: List[float]
    status: str
    point: object = field(repr=False, default=None)


def sncg_solve(spec: SubproblemSpec, xi0, varrho: float, tol_grad: float,
               anchor=None, inexact_factor: float = 0.0,
               params: Optional[SsnParams] = None) -> SncgResult:
    """Minimize ``Upsilon(xi) = Psi(xi) + varrho/2 ||xi - anchor||^2``.

    Stops when ``||grad Upsilon|| <= max(tol_grad, inexact_factor * ||xi - anchor||)``.
    """
    params = params or SsnParams()
    xi = np.array(xi0, dtype=float)
    anchor = xi.copy() if anchor is None else np.asarray(anchor, dtype=float)

    def upsilon(pt):
        diff = pt.xi - anchor
        return pt.value + 0.5 * varrho * float(diff @ diff), pt.grad + varrho * diff

    pt = _Point(spec, xi)
    val, G = upsilon(pt)
    norms, values = [float(np.linalg.norm(G))], [val]
    status = "max_iter"
    it = 0
    for it in range(params.max_newton + 1):
        gn = norms[-1]
        if gn <= max(tol_grad, inexact_factor * np.linalg.norm(pt.xi - anchor)):
            status = "converged"
            break
        if it == params.max_newton:
            break
        W = NewtonMatrix(spec, pt, varrho, params.cg_maxiter)
        d, _ = W.solve(-G, min(params.eta, gn ** (1 + params.varsigma)))
        slope = float(G @ d)
        if not slope < 0:
            d, slope = -G, -gn * gn
        slack = 1e-15 * (1.0 + abs(val))
        step, fallback = 1.0, None
        for _ in range(params.max_linesearch):
            trial = _Point(spec, pt.xi + step * d)
            tval, tG = upsilon(trial)
            if tval <= val + params.c1 * step * slope + slack:
                if fallback is None:
                    fallback = (trial, tval, tG)
                if abs(float(tG @ d)) <= params.c2 * abs(slope):
                    break
            step *= params.beta
        else:
            if fallback is None:
                logger.warning("line search failed after %d halvings; taking smallest step",
                               params.max_linesearch)
            else:
                trial, tval, tG = fallback
        pt, val, G = trial, tval, tG
        norms.append(float(np.linalg.norm(G)))
        values.append(val)
    return SncgResult(xi=pt.xi, iterations=len(norms) - 1, grad_norms=norms,
                      values=values, status=status, point=pt)


# -- proximal point outer loop ----------------------------------------------

@dataclass
class PpaResult:
    xi: np.ndarray
    x: np.ndarray
    z: np.ndarray
    grad_norm: float
    gap: float
    status: str
    ppa_iterations: int
    newton_iterations: int
    varrhos: List[float] = field(default_factory=list)


def ppa_solve(spec: SubproblemSpec, xi0=None, tol: float = 1e-8,
              params: Optional[SsnParams] = None) -> PpaResult:
    """Solve the subproblem through its dual to scaled tolerance ``tol``.

    Exit requires ``||A x - z - b|| / (1 + ||b||) <= tol`` and the duality gap
    scaled by ``1 + ||b||`` below ``tol``.
    """
    params = params or SsnParams()
    data = spec.data
    scale = 1.0 + np.linalg.norm(data.b)
    xi = np.zeros(data.n) if xi0 is None else np.array(xi0, dtype=float)
    varrho, alpha = params.varrho0, 1.0
    newton_total = 0
    varrhos = []
    pt = _Point(spec, xi)
    status = "max_iter"
    j = 0
    for j in range(params.max_ppa + 1):
        gnorm, gap = float(np.linalg.norm(pt.grad)), _gap(spec, pt)
        if gnorm <= tol * scale and abs(gap) <= tol * scale:
            status = "converged"
            break
        if j == params.max_ppa:
            break
        varrhos.append(varrho)
        res = sncg_solve(spec, pt.xi, varrho, tol_grad=0.1 * tol * scale, anchor=pt.xi,
                         inexact_factor=alpha * varrho, params=params)
        newton_total += res.iterations
        pt = res.point
        varrho = max(params.varrho_floor, 0.5 * varrho)
        alpha *= 0.5
    return PpaResult(xi=pt.xi, x=pt.x, z=pt.z, grad_norm=float(np.linalg.norm(pt.grad)),
                     gap=_gap(spec, pt), status=status, ppa_iterations=j,
                     newton_iterations=newton_total, varrhos=varrhos)
