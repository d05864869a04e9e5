"""Inexact proximal MM driver.

Each outer step freezes the majorization weights ``w = w_rho(x^k)``, forms the
group penalties ``v = lam (1 - w)`` and solves the strongly convex subproblem

    min  f1(Ax - b) + mu/2 ||x||^2 + sum_i v_i ||x_Ji|| + 1/2 ||x - x^k||^2_{Q_k}

with ``Q_k = gamma1_k I + gamma2_k A^T A``. The solve is accepted when the
realized inexactness vector ``delta^k`` obeys

    ||delta^k|| <= ||Q^{1/2}(x^k - x^{k-1})|| / (sqrt(2) ||Q^{-1/2}||),

where ``Q`` uses the floors of the proximal weights; otherwise the inner
tolerance is tightened and the subproblem re-solved.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dual_ssn import SsnParams, SubproblemSpec, ppa_solve
from .problem import (ProblemData, RegularizerSpec, eval_potential,
                      eval_surrogate_objective, group_norms, q_norm_sq)
from .prox import prox_loss, prox_weighted_group
from .surrogate import PhiFamily, weights

logger = logging.getLogger(__name__)


def lambda_base(A, b) -> float:
    """``max(1e-6, 0.05 max|A^T b|) / sqrt(n)``, the scale all lambda choices multiply.

    The ``1/sqrt(n)`` factor matches the normalization of the loss; up to the
    tiny ``mu`` term the solutions equal those of the unnormalized rule
    applied to ``||Ax - b||_q``.
    """
    return max(1e-6, 0.05 * float(np.max(np.abs(A.T @ b)))) / np.sqrt(A.shape[0])


@dataclass
class PmmConfig:
    reg: RegularizerSpec
    init_lambda: float
    init_gamma1: float = 10.0
    init_gamma2: float = 10.0
    gamma1_0: float = 10.0
    gamma2_0: float = 10.0
    gamma1_floor: float = 1e-6
    gamma2_floor: float = 1e-6
    varrho: float = 1 / 1.4
    eps_pmm: float = 1e-5
    eps_sncg: float = 1e-8
    max_outer: int = 500
    delta_retries: int = 3
    tighten: float = 0.1
    engine: str = "sncg"
    admm: Optional[object] = None
    max_time_s: Optional[float] = None
    ssn: SsnParams = field(default_factory=SsnParams)

    def __post_init__(self):
        if not 0 < self.varrho <= 1:
            raise ValueError("varrho must lie in (0, 1]")
        if not (0 < self.gamma1_floor <= self.gamma1_0 and 0 < self.gamma2_floor <= self.gamma2_0):
            raise ValueError("need 0 < gamma floor <= initial gamma")
        if self.init_lambda < 0 or self.init_gamma1 <= 0 or self.init_gamma2 <= 0:
            raise ValueError("invalid initialization parameters")
        if self.gamma1_0 > self.init_gamma1 or self.gamma2_0 > self.init_gamma2:
            logger.info("initial proximal weights exceed the initialization weights")
        if self.engine not in ("sncg", "padmm"):
            raise ValueError("engine must be 'sncg' or 'padmm'")

    @classmethod
    def defaults(cls, data: ProblemData, lambda_scale: float = 2.0, init_scale: float = 0.2,
                 phi: Optional[PhiFamily] = None, rho: float = 2.0, **overrides):
        """Synthetic-data defaults for the given loss order.

        ``init_scale`` multiplies :func:`lambda_base` to give the
        initialization weight; ``lambda_scale`` multiplies that again for the
        MM penalty ``lam``.
        """
        phi = phi or PhiFamily("scad", 4.0)
        lam0 = init_scale * lambda_base(data.A, data.b)
        if data.q == 1:
            kw = dict(init_gamma1=10.0, init_gamma2=10.0, gamma1_0=10.0, gamma2_0=10.0, eps_pmm=1e-5)
        else:
            kw = dict(init_gamma1=0.01, init_gamma2=0.001, gamma1_0=0.01, gamma2_0=0.01, eps_pmm=1e-7)
        if overrides.get("engine") == "padmm":
            # the baseline runs each subproblem once at its own tolerance
            kw["delta_retries"] = 0
        kw.update(overrides)
        reg = RegularizerSpec.from_lambda(lambda_scale * lam0, rho, phi)
        return cls(reg=reg, init_lambda=lam0, **kw)


@dataclass
class PmmRecord:
    k: int
    potential: float
    objective: float
    q_step: float
    kkt: float
    inner_kkt: float
    delta_norm: float
    delta_bound: float
    retries: int
    gamma1: float
    gamma2: float
    inner_iterations: int
    newton_iterations: int
    inner_status: str
    weights: np.ndarray = field(repr=False)

    @property
    def slack(self) -> float:
        return max(0.0, self.delta_norm - self.delta_bound)


@dataclass
class PmmTrace:
    records: List[PmmRecord] = field(default_factory=list)
    x0: Optional[np.ndarray] = None
    potential0: float = float("nan")
    status: str = "running"
    z: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    xi_hat: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    init_seconds: float = 0.0
    seconds: float = 0.0
    init_status: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def potentials(self) -> np.ndarray:
        return np.array([self.potential0] + [r.potential for r in self.records])

    @property
    def inner_iterations(self) -> int:
        return sum(r.inner_iterations for r in self.records)


# -- residuals ----------------------------------------------------------------

def kkt_residual(data: ProblemData, v, x, z, xi, delta=None, mu: Optional[float] = None,
                 prox=None, Ax=None) -> float:
    """Scaled KKT residual ``sqrt(r1 + r2 + r3) / (1 + ||b||)``.

    ``r1 = ||z - P_f1(z + xi)||^2``,
    ``r2 = ||x - P_h(delta + (1-mu) x - A^T xi)||^2``,
    ``r3 = ||A x - z - b||^2``.
    ``prox = (gamma1, x_anchor, gamma2, z_anchor)`` adds the proximal terms
    of the MM subproblem to the stationarity conditions; ``Ax`` may be
    passed to skip one product.
    """
    mu = data.mu if mu is None else mu
    A, b = data.A, data.b
    x, z, xi = (np.asarray(t, dtype=float) for t in (x, z, xi))
    gz = xi.copy()
    gx = delta - mu * x - A.T @ xi if delta is not None else -mu * x - A.T @ xi
    if prox is not None:
        g1, xk, g2, zk = prox
        gz -= g2 * (z - zk)
        gx -= g1 * (x - xk)
    r1 = z - prox_loss(data.q, data.n, 1.0, z + gz)
    r2 = x - prox_weighted_group(v, 0.0, 1.0, x + gx, data.groups)
    r3 = (A @ x if Ax is None else Ax) - z - b
    return float(np.sqrt(r1 @ r1 + r2 @ r2 + r3 @ r3) / (1.0 + np.linalg.norm(b)))


def subproblem_kkt(spec: SubproblemSpec, x, z, xi) -> float:
    return kkt_residual(spec.data, spec.v, x, z, xi, mu=spec.mu,
                        prox=(spec.gamma1, spec.x_anchor, spec.gamma2, spec.z_anchor))


def lambda_min_q(A, gamma1_floor: float, gamma2_floor: float) -> float:
    """Smallest eigenvalue of ``gamma1_floor I + gamma2_floor A^T A``."""
    n, p = A.shape
    if n < p:
        return gamma1_floor
    return gamma1_floor + gamma2_floor * max(0.0, float(np.linalg.eigvalsh(A.T @ A)[0]))


def compute_q_half_bound(x_k, x_km1, gamma1_floor, gamma2_floor, A, lam_min=None) -> float:
    """``||Q^{1/2}(x_k - x_km1)|| * sqrt(lambda_min(Q)) / sqrt(2)``."""
    if lam_min is None:
        lam_min = lambda_min_q(A, gamma1_floor, gamma2_floor)
    d = np.asarray(x_k, dtype=float) - np.asarray(x_km1, dtype=float)
    return float(np.sqrt(q_norm_sq(d, A, gamma1_floor, gamma2_floor) * lam_min / 2.0))


def _project_subdiff_loss(q, n, w, snap, g):
    """Project ``g`` onto the subdifferential of ``||.||_q/sqrt(n)`` at ``w``
    with the coordinates in ``snap`` treated as zero."""
    c = 1.0 / np.sqrt(n)
    if q == 1:
        return np.where(snap | (w == 0), np.clip(g, -c, c), c * np.sign(w))
    if snap.all() or not np.any(w):
        return g * min(1.0, c / max(np.linalg.norm(g), 1e-300))
    return c * w / np.linalg.norm(w)


def realize_delta(spec: SubproblemSpec, x, z, xi) -> np.ndarray:
    """Inexactness vector of an approximate subproblem solution.

    Returns ``delta`` in ``A^T d f1(Ax - b) + mu x + d h(x) + Q_k (x - x_k)``
    built from the nearest subgradients to the ones certified by ``(z, xi)``.
    Since ``Ax - b`` only matches ``z`` up to the feasibility residual
    ``e``, residual coordinates no larger than ``||e||_inf`` (the whole
    residual when ``||Ax - b|| <= ||e||`` for q=2) are treated as zero.
    """
    data = spec.data
    A, groups = data.A, data.groups
    x, z, xi = (np.asarray(t, dtype=float) for t in (x, z, xi))
    w = A @ x - data.b
    e = w - z
    if data.q == 1:
        snap = np.abs(w) <= np.max(np.abs(e))
    else:
        snap = np.full(z.size, np.linalg.norm(w) <= np.linalg.norm(e))
    eta = _project_subdiff_loss(data.q, data.n, w, snap, xi - spec.gamma2 * (z - spec.z_anchor))
    # nearest element of d h(x) to the subgradient certified by the x-block
    g = -A.T @ xi - spec.mu * x - spec.gamma1 * (x - spec.x_anchor)
    norms = group_norms(x, groups)
    gn = group_norms(g, groups)
    on = norms > 0
    unit = np.divide(x, norms[groups.group_of], out=np.zeros_like(x), where=on[groups.group_of])
    ball = g * np.minimum(1.0, np.divide(spec.v, gn, out=np.ones_like(gn), where=gn > 0))[groups.group_of]
    s = np.where(on[groups.group_of], spec.v[groups.group_of] * unit, ball)
    return (A.T @ (eta + spec.gamma2 * (w - spec.z_anchor))
            + spec.mu * x + spec.gamma1 * (x - spec.x_anchor) + s)


# -- driver -------------------------------------------------------------------

def _solve_subproblem(spec, warm, tol, config, admm_cfg):
    if config.engine == "sncg":
        res = ppa_solve(spec, warm[2], tol=tol, params=config.ssn)
        return res.x, res.z, res.xi, res.ppa_iterations, res.newton_iterations, res.status
    from dataclasses import replace

    from .padmm import admm_run

    # retries tighten the pADMM tolerance in proportion to the SNCG one
    cfg = replace(admm_cfg, eps=admm_cfg.eps * tol / config.eps_sncg)
    x, z, xi, rep = admm_run(spec.data, spec.v, spec.mu, cfg, warm, check=False,
                             prox=(spec.gamma1, spec.x_anchor, spec.gamma2, spec.z_anchor))
    return x, z, xi, rep.iterations, 0, rep.status


def init_point(data: ProblemData, config: PmmConfig):
    """Approximate solution of the l2,1-regularized initialization problem

    ``min f1(Ax - b) + lam~ sum_i ||x_Ji|| + g1~/2 ||x||^2 + g2~/2 ||Ax||^2``,

    posed as a subproblem with anchors ``x = 0``, ``z = -b`` and ``mu = 0``.
    Returns the point and the inner solver result.
    """
    spec = SubproblemSpec(data, np.full(data.m, config.init_lambda), np.zeros(data.p),
                          -data.b, config.init_gamma1, config.init_gamma2, 0.0)
    res = ppa_solve(spec, None, tol=config.eps_sncg, params=config.ssn)
    return res.x, res


def pmm_run(data: ProblemData, config: PmmConfig, x0=None, xi0=None):
    """Run the inexact proximal MM method.

    Parameters
    ----------
    data : ProblemData
    config : PmmConfig
    x0, xi0 : ndarray, optional
        Starting point and dual warm start. When ``x0`` is omitted the
        initialization problem is solved first (not counted in ``seconds``).

    Returns
    -------
    x : ndarray
        Final iterate.
    trace : PmmTrace
        Per-iteration records and the final primal/dual triple.
    """
    reg = config.reg
    trace = PmmTrace()
    t0 = time.monotonic()
    if x0 is None:
        x0, init = init_point(data, config)
        xi0 = init.xi
        trace.init_status = init.status
    trace.init_seconds = time.monotonic() - t0
    x = np.array(x0, dtype=float)
    trace.x0 = x.copy()
    A, b = data.A, data.b
    g1f, g2f = config.gamma1_floor, config.gamma2_floor
    lam_min = lambda_min_q(A, g1f, g2f)
    x_prev = x.copy()
    z = A @ x - b
    xi = np.zeros(data.n) if xi0 is None else np.array(xi0, dtype=float)
    gamma1, gamma2 = config.gamma1_0, config.gamma2_0
    admm_cfg = None
    if config.engine == "padmm":
        from .padmm import AdmmConfig

        admm_cfg = config.admm or AdmmConfig.for_data(data)
        admm_cfg.check_metric(A)
    trace.potential0 = eval_potential(x, x_prev, data, reg, g1f, g2f)
    start = time.monotonic()
    trace.status = "max_iter"
    for k in range(config.max_outer):
        w = weights(reg.phi, reg.rho, x, data.groups)
        v = reg.lam * (1.0 - w)
        bound = compute_q_half_bound(x, x_prev, g1f, g2f, A, lam_min)
        spec = SubproblemSpec(data, v, x, A @ x - b, gamma1, gamma2, data.mu)
        tol = config.eps_sncg
        warm = (x, z, xi)
        it_in = it_newton = 0
        for retry in range(config.delta_retries + 1):
            x_new, z_new, xi_new, n_in, n_newton, inner_status = _solve_subproblem(
                spec, warm, tol, config, admm_cfg)
            it_in += n_in
            it_newton += n_newton
            if not np.all(np.isfinite(x_new)):
                trace.status = "inner_failed"
                break
            delta = realize_delta(spec, x_new, z_new, xi_new)
            dnorm = float(np.linalg.norm(delta))
            if dnorm <= bound or retry == config.delta_retries:
                break
            tol *= config.tighten
            warm = (x_new, z_new, xi_new)
        if trace.status == "inner_failed":
            break
        if dnorm > bound:
            logger.debug("outer %d: delta bound violated by %.3e", k, dnorm - bound)
        # multiplier of the weighted problem without proximal terms
        xi_hat = xi_new - gamma2 * (z_new - spec.z_anchor)
        kkt = kkt_residual(data, v, x_new, z_new, xi_hat)
        trace.records.append(PmmRecord(
            k=k, potential=eval_potential(x_new, x, data, reg, g1f, g2f),
            objective=eval_surrogate_objective(x_new, data, reg),
            q_step=float(np.sqrt(q_norm_sq(x_new - x, A, g1f, g2f))), kkt=kkt,
            inner_kkt=subproblem_kkt(spec, x_new, z_new, xi_new),
            delta_norm=dnorm, delta_bound=bound, retries=retry, gamma1=gamma1, gamma2=gamma2,
            inner_iterations=it_in, newton_iterations=it_newton, inner_status=inner_status,
            weights=w))
        x_prev, x, z, xi = x, x_new, z_new, xi_new
        trace.v, trace.xi_hat = v, xi_hat
        gamma1 = max(g1f, config.varrho * gamma1)
        gamma2 = max(g2f, config.varrho * gamma2)
        if kkt <= config.eps_pmm:
            trace.status = "converged"
            break
        if config.max_time_s is not None and time.monotonic() - start > config.max_time_s:
            trace.status = "time_limit"
            break
    trace.seconds = time.monotonic() - start
    trace.z, trace.xi = z, xi
    if trace.v is None:
        trace.v = reg.lam * (1.0 - weights(reg.phi, reg.rho, x, data.groups))
    return x, trace
