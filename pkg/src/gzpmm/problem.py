"""Problem data model and objective evaluations.

Every solver in the package works on the objects defined here. A
:class:`GroupStructure` partitions the features and :class:`ProblemData`
holds ``(A, b)`` with its loss order. The evaluation functions cover the
group zero-norm objective, its DC surrogate and the MM potential.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .surrogate import PhiFamily, varphi_rho


class GroupStructure:
    """Partition of ``{0, ..., p-1}`` into ``m`` disjoint, nonempty groups.

    Parameters
    ----------
    groups : sequence of sequences of int
        The index sets ``J_1, ..., J_m``. Indices are stored sorted.
    p : int, optional
        Feature count. Inferred from the largest index when omitted.
    """

    def __init__(self, groups: Sequence[Sequence[int]], p: Optional[int] = None):
        sets = [np.sort(np.asarray(g, dtype=np.intp).ravel()) for g in groups]
        if not sets:
            raise ValueError("at least one group is required")
        if any(s.size == 0 for s in sets):
            raise ValueError("groups must be nonempty")
        flat = np.concatenate(sets)
        if p is None:
            p = int(flat.max()) + 1
        if flat.size != p or flat.min() < 0 or flat.max() >= p:
            raise ValueError("groups must partition range(p) exactly")
        group_of = np.full(p, -1, dtype=np.intp)
        for i, s in enumerate(sets):
            if np.any(group_of[s] >= 0) or np.unique(s).size != s.size:
                raise ValueError("groups must be pairwise disjoint")
            group_of[s] = i
        if np.any(group_of < 0):
            raise ValueError("groups must cover every feature")
        self.groups = tuple(sets)
        self.p = int(p)
        self.m = len(sets)
        self.group_of = group_of
        self.group_of.setflags(write=False)
        self.sizes = np.array([s.size for s in sets], dtype=np.intp)

    @classmethod
    def contiguous(cls, p: int, m: Optional[int] = None, sizes: Optional[Sequence[int]] = None):
        """Contiguous groups, either ``m`` groups of size ``ceil(p/m)`` (short
        final group) or an explicit list of group sizes."""
        if sizes is None:
            if m is None or m < 1 or m > p:
                raise ValueError("need 1 <= m <= p")
            size = -(-p // m)
            sizes = [size] * (p // size)
            if p % size:
                sizes.append(p % size)
        sizes = [int(s) for s in sizes]
        if sum(sizes) != p or min(sizes) < 1:
            raise ValueError(f"group sizes {sizes} do not sum to p={p}")
        edges = np.cumsum([0] + sizes)
        return cls([range(edges[i], edges[i + 1]) for i in range(len(sizes))], p=p)

    def expand(self, values: np.ndarray) -> np.ndarray:
        """Broadcast one value per group to one value per feature."""
        return np.asarray(values)[self.group_of]

    def __len__(self):
        return self.m

    def __eq__(self, other):
        return (isinstance(other, GroupStructure) and self.p == other.p
                and np.array_equal(self.group_of, other.group_of))

    def __repr__(self):
        return f"GroupStructure(p={self.p}, m={self.m})"


@dataclass(frozen=True)
class Truth:
    """Ground truth of a generated instance."""

    x_star: np.ndarray
    support: tuple
    noise: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ProblemData:
    A: np.ndarray
    b: np.ndarray
    groups: GroupStructure
    q: int = 1
    mu: float = 1e-8
    truth: Optional[Truth] = None
    name: str = "problem"

    def __post_init__(self):
        A = np.asfortranarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != b.size:
            raise ValueError(f"A has shape {A.shape} but b has length {b.size}")
        if A.shape[1] != self.groups.p:
            raise ValueError(f"A has {A.shape[1]} columns, groups cover p={self.groups.p}")
        if self.q not in (1, 2):
            raise ValueError("loss order q must be 1 or 2")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.truth is not None and np.asarray(self.truth.x_star).size != A.shape[1]:
            raise ValueError("x_star length does not match p")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.groups.m


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty parameters ``nu`` and ``rho``; ``lam = rho * nu``."""

    nu: float
    rho: float
    phi: PhiFamily = field(default_factory=lambda: PhiFamily("scad", 4.0))

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.rho >= 1:
            raise ValueError("rho must be >= 1")

    @property
    def lam(self) -> float:
        return self.rho * self.nu

    @classmethod
    def from_lambda(cls, lam: float, rho: float, phi: PhiFamily):
        return cls(nu=lam / rho, rho=rho, phi=phi)


def group_norms(x, groups: GroupStructure) -> np.ndarray:
    """Euclidean norm of ``x`` restricted to each group."""
    x = np.asarray(x, dtype=float)
    if x.shape != (groups.p,):
        raise ValueError(f"x has shape {x.shape}, expected ({groups.p},)")
    sq = np.bincount(groups.group_of, weights=x * x, minlength=groups.m)
    return np.sqrt(sq)


def eval_loss(z, q: int) -> float:
    """``||z||_q / sqrt(n)``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("empty residual")
    norm = np.abs(z).sum() if q == 1 else np.linalg.norm(z)
    return float(norm / np.sqrt(z.size))


def eval_surrogate_objective(x, data: ProblemData, reg: RegularizerSpec) -> float:
    """DC surrogate ``loss + mu/2 ||x||^2 + rho*nu * sum_i varphi_rho(||x_Ji||)``.

    Values are reported as computed. Every family has ``varphi_rho(0) = 0``
    (for ``mcp`` the offset branch lies at negative ``t``), so there is no
    constant to subtract.
    """
    x = np.asarray(x, dtype=float)
    penalty = varphi_rho(reg.phi, reg.rho, group_norms(x, data.groups)).sum()
    return (eval_loss(data.A @ x - data.b, data.q)
            + 0.5 * data.mu * float(x @ x) + reg.lam * float(penalty))


def eval_true_objective(x, data: ProblemData, nu: float) -> float:
    """Group zero-norm objective; a group counts when its norm is exactly > 0."""
    x = np.asarray(x, dtype=float)
    count = int(np.count_nonzero(group_norms(x, data.groups) > 0))
    return (eval_loss(data.A @ x - data.b, data.q)
            + 0.5 * data.mu * float(x @ x) + nu * count)


def q_norm_sq(d, A, gamma1, gamma2) -> float:
    """``||d||_Q^2`` with ``Q = gamma1 I + gamma2 A^T A``."""
    d = np.asarray(d, dtype=float)
    Ad = A @ d
    return float(gamma1 * (d @ d) + gamma2 * (Ad @ Ad))


def eval_potential(x, y, data: ProblemData, reg: RegularizerSpec,
                   gamma1_floor: float, gamma2_floor: float) -> float:
    """Potential ``Theta_surrogate(x) + 1/4 ||x - y||_Q^2``."""
    if gamma1_floor <= 0 or gamma2_floor <= 0:
        raise ValueError("gamma floors must be positive")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return eval_surrogate_objective(x, data, reg) + 0.25 * q_norm_sq(d, data.A, gamma1_floor, gamma2_floor)
