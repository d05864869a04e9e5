"""Experiment runner: metrics, grids, CSV reports."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data import CovarianceKind, NoiseKind, SyntheticSpec, load_libsvm, make_synthetic
from .padmm import AdmmConfig
from .pmm import PmmConfig, init_point, kkt_residual, lambda_base, pmm_run
from .problem import ProblemData, RegularizerSpec, eval_surrogate_objective, group_norms
from .surrogate import PhiFamily

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("probname", "solver", "lambda", "noise_group_sparsity", "seed", "L2err", "nnz",
               "ng", "true_ng", "pobj", "kkt", "time_s", "iters", "status")
SOLVERS = ("pmm", "padmm")
FAILED = ("inner_failed", "error")


# -- metrics -------------------------------------------------------------------

def metric_nnz(x) -> int:
    """Entries above ``1e-8 ||x||_inf``."""
    x = np.abs(np.asarray(x, dtype=float))
    top = x.max(initial=0.0)
    return 0 if top == 0 else int(np.count_nonzero(x > 1e-8 * top))


def metric_ng(x, groups) -> int:
    """Groups whose norm exceeds ``1e-8`` times the largest group norm."""
    gn = group_norms(x, groups)
    top = gn.max(initial=0.0)
    return 0 if top == 0 else int(np.count_nonzero(gn > 1e-8 * top))


def active_groups(x, groups) -> Tuple[int, ...]:
    gn = group_norms(x, groups)
    top = gn.max(initial=0.0)
    if top == 0:
        return ()
    return tuple(int(i) for i in np.flatnonzero(gn > 1e-8 * top))


def metric_l2err(x_out, x_star) -> float:
    """``||x_out - x*|| / ||x*||``; the absolute error when ``x* = 0``
    (see :func:`l2err_is_relative`)."""
    x_out = np.asarray(x_out, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    err = float(np.linalg.norm(x_out - x_star))
    ns = float(np.linalg.norm(x_star))
    if ns == 0:
        logger.warning("x_star is zero; reporting absolute error")
        return err
    return err / ns


def l2err_is_relative(x_star) -> bool:
    return bool(np.any(np.asarray(x_star)))


def plateau_width(values, rel: float = 0.05) -> int:
    """Length of the longest run of consecutive grid points whose adjacent
    values differ by less than ``rel`` relative."""
    v = np.asarray(values, dtype=float)
    best = run = 1 if v.size else 0
    for a, b in zip(v[:-1], v[1:]):
        close = abs(b - a) < rel * max(abs(a), abs(b), 1e-300)
        run = run + 1 if close else 1
        best = max(best, run)
    return best


def is_nonincreasing(values, rel: float = 0.10) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1 + rel) + 1e-300))


# -- reports -------------------------------------------------------------------

@dataclass
class RunReport:
    probname: str
    solver: str
    lam: float
    noise_gs: float
    seed: int
    l2err: float
    nnz: int
    ng: int
    true_ng: int
    pobj: float
    kkt: float
    wall_seconds: float
    outer_iterations: int
    inner_iterations: int
    status: str
    support_recovered: bool = False
    l2err_relative: bool = True

    @property
    def failed(self) -> bool:
        return self.status.split(":")[0] in FAILED

    def row(self) -> dict:
        return {"probname": self.probname, "solver": self.solver, "lambda": repr(self.lam),
                "noise_group_sparsity": repr(self.noise_gs), "seed": self.seed,
                "L2err": repr(self.l2err), "nnz": self.nnz, "ng": self.ng, "true_ng": self.true_ng,
                "pobj": repr(self.pobj), "kkt": repr(self.kkt), "time_s": f"{self.wall_seconds:.3f}",
                "iters": self.outer_iterations, "status": self.status}


def write_csv(reports: Sequence[RunReport], stream) -> None:
    w = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())


def reports_to_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()


# -- configuration -------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment grid.

    Exactly one problem source: ``problem = "synthetic"`` (built from the
    ``n, p, m, r_bar, cov, noise, noise_gs, noise_groups`` fields) or a path
    to a LIBSVM file. ``lambda = gamma_bar * lambda_base(A, b)`` and the
    initialization weight is ``init_scale * lambda_base(A, b)``.
    ``sweep_lambda`` and ``sweep_noise_gs`` override ``gamma_bar`` and
    ``noise_gs`` with grids.
    """

    problem: str = "synthetic"
    q: int = 1
    family: str = "scad"
    a: Optional[float] = None
    rho: Optional[float] = None
    gamma_bar: float = 0.4
    init_scale: float = 0.2
    sweep_lambda: Tuple[float, ...] = ()
    sweep_noise_gs: Tuple[float, ...] = ()
    seeds: Tuple[int, ...] = (0,)
    solver: str = "both"
    out: Optional[str] = None
    max_time_s: Optional[float] = None
    max_outer: int = 500
    mu: float = 1e-8
    n: int = 100
    p: int = 500
    m: int = 50
    r_bar: int = 5
    cov: str = "identity"
    noise: str = "normal100"
    noise_gs: float = 0.8
    noise_groups: int = 50
    groups: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if not self.problem:
            raise ValueError("a problem source is required")
        if self.q not in (1, 2):
            raise ValueError("q must be 1 or 2")
        if self.solver not in SOLVERS + ("both",):
            raise ValueError(f"solver must be one of {SOLVERS + ('both',)}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.gamma_bar <= 0 or self.init_scale <= 0:
            raise ValueError("lambda multipliers must be positive")
        if any(g <= 0 for g in self.sweep_lambda):
            raise ValueError("sweep_lambda values must be positive")
        if any(not 0 <= g <= 1 for g in self.sweep_noise_gs):
            raise ValueError("sweep_noise_gs values must lie in [0, 1]")
        if not self.is_synthetic and self.sweep_noise_gs:
            raise ValueError("noise sweeps need a synthetic problem")
        self.phi  # validates family and a
        CovarianceKind.parse(self.cov)
        NoiseKind.parse(self.noise)

    @property
    def is_synthetic(self) -> bool:
        return self.problem == "synthetic"

    @property
    def phi(self) -> PhiFamily:
        a = self.a if self.a is not None else (4.0 if self.is_synthetic else 6.0)
        return PhiFamily(self.family, a if self.family != "linear" else 0.0)

    @property
    def solvers(self) -> Tuple[str, ...]:
        return SOLVERS if self.solver == "both" else (self.solver,)

    @property
    def lambda_grid(self) -> Tuple[float, ...]:
        return tuple(self.sweep_lambda) or (self.gamma_bar,)

    @property
    def gs_grid(self) -> Tuple[float, ...]:
        return tuple(self.sweep_noise_gs) or (self.noise_gs,)

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


def build_instance(config: ExperimentConfig, seed: int, noise_gs: float) -> ProblemData:
    if config.is_synthetic:
        spec = SyntheticSpec(config.n, config.p, config.m, config.r_bar,
                             CovarianceKind.parse(config.cov),
                             NoiseKind.parse(config.noise, group_sparsity=noise_gs,
                                             noise_groups=config.noise_groups),
                             q=config.q, mu=config.mu, seed=seed)
        return make_synthetic(spec)
    groups = None
    if config.groups:
        parts = [int(t) for t in str(config.groups).replace(",", " ").split()]
        groups = parts[0] if len(parts) == 1 else parts
    return load_libsvm(config.problem, groups_spec=groups, q=config.q, mu=config.mu)


def solver_config(config: ExperimentConfig, data: ProblemData, solver: str, gamma_bar: float,
                  rho: float) -> PmmConfig:
    engine = "sncg" if solver == "pmm" else "padmm"
    kw = dict(engine=engine, max_outer=config.max_outer, max_time_s=config.max_time_s)
    if not config.is_synthetic:
        kw.update(init_gamma1=0.01, init_gamma2=1e-4, gamma1_0=0.01, gamma2_0=0.01)
        if engine == "padmm":
            kw["admm"] = AdmmConfig.for_data(data, sigma=1.168)
    return PmmConfig.defaults(data, lambda_scale=gamma_bar / config.init_scale,
                              init_scale=config.init_scale, phi=config.phi, rho=rho, **kw)


def run_point(config: ExperimentConfig, data: ProblemData, seed: int, noise_gs: float,
              gamma_bar: float, solver: str) -> RunReport:
    """One solve; failures are captured in the report status."""
    lam = gamma_bar * lambda_base(data.A, data.b)
    truth = data.truth.x_star if data.truth is not None else np.zeros(data.p)
    true_ng = len(data.truth.support) if data.truth is not None else 0
    try:
        rho = config.rho
        cfg = solver_config(config, data, solver, gamma_bar, rho or 2.0)
        x0, init = init_point(data, cfg)
        if rho is None and not config.is_synthetic:
            top = float(np.max(np.abs(x0)))
            rho = max(1.0, 6.0 / top) if top > 0 else 1.0
            cfg = replace(cfg, reg=RegularizerSpec.from_lambda(cfg.reg.lam, rho, cfg.reg.phi))
        x, trace = pmm_run(data, cfg, x0=x0, xi0=init.xi)
        xi_hat = trace.xi_hat if trace.xi_hat is not None else trace.xi
        kkt = kkt_residual(data, trace.v, x, trace.z, xi_hat)
        return RunReport(data.name, solver, lam, noise_gs, seed, metric_l2err(x, truth),
                         metric_nnz(x), metric_ng(x, data.groups), true_ng,
                         eval_surrogate_objective(x, data, cfg.reg), kkt, trace.seconds,
                         len(trace), trace.inner_iterations, trace.status,
                         data.truth is not None and active_groups(x, data.groups) == data.truth.support,
                         l2err_is_relative(truth))
    except Exception as exc:  # recorded, the row is still emitted
        logger.exception("solve failed")
        nan = float("nan")
        return RunReport(data.name, solver, lam, noise_gs, seed, nan, 0, 0, true_ng, nan, nan,
                         0.0, 0, 0, f"error:{type(exc).__name__}")


def _task(args):
    config, seed, gs, gamma_bar, solver, data = args
    if data is None:
        data = build_instance(config, seed, gs)
    return run_point(config, data, seed, gs, gamma_bar, solver)


def run_experiment(config: ExperimentConfig) -> List[RunReport]:
    """Run every (seed, noise sparsity, lambda, solver) grid point.

    Reports come back in grid order regardless of ``workers``. The CSV is
    written to ``config.out`` when set.
    """
    shared = None if config.is_synthetic else build_instance(config, 0, 0.0)
    tasks = [(config, seed, gs, gb, solver, shared)
             for seed in config.seeds for gs in config.gs_grid
             for gb in config.lambda_grid for solver in config.solvers]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(_task, tasks))
    else:
        reports = []
        cache = {}
        for t in tasks:
            key = (t[1], t[2])
            if shared is None and key not in cache:
                cache = {key: build_instance(config, t[1], t[2])}
            reports.append(_task(t[:5] + (shared if shared is not None else cache[key],)))
    if config.out:
        with open(config.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(reports, fh)
    return reports
