"""Synthetic instances and LIBSVM text I/O.

All randomness goes through NumPy's Philox counter-based bit generator. A run
seed is expanded with :class:`numpy.random.SeedSequence` into one child
stream per random component, so switching the noise law leaves the design
and the ground truth bitwise unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .problem import GroupStructure, ProblemData, Truth

NOISE_KINDS = ("normal100", "scaled_t4", "cauchy", "mixed_normal", "laplace")


def rng(seed) -> np.random.Generator:
    """Philox generator from an int or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


# -- covariance -----------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceKind:
    """``identity``, ``ar`` (``Sigma_ij = c^|i-j|``) or ``cs`` (``alpha`` off the diagonal)."""

    kind: str = "identity"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "ar", "cs"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind != "identity" and not 0 < self.param < 1:
            raise ValueError("covariance parameter must lie in (0, 1)")

    @classmethod
    def parse(cls, text: str) -> "CovarianceKind":
        """``identity``, ``ar:0.5``, ``cs:0.6`` or a preset index ``1``..``5``."""
        text = text.strip().lower()
        if text in PRESET_COVARIANCES:
            return PRESET_COVARIANCES[text]
        kind, _, val = text.partition(":")
        return cls(kind, float(val) if val else 0.0)

    def label(self) -> str:
        return "identity" if self.kind == "identity" else f"{self.kind}:{self.param:g}"


PRESET_COVARIANCES = {
    "1": CovarianceKind("identity"),
    "2": CovarianceKind("ar", 0.5),
    "3": CovarianceKind("ar", 0.8),
    "4": CovarianceKind("cs", 0.6),
    "5": CovarianceKind("cs", 0.8),
}


def gen_covariance(kind: CovarianceKind, p: int) -> np.ndarray:
    if p < 1:
        raise ValueError("p must be positive")
    if kind.kind == "identity":
        return np.eye(p)
    if kind.kind == "ar":
        idx = np.arange(p)
        return kind.param ** np.abs(idx[:, None] - idx[None, :])
    S = np.full((p, p), kind.param)
    np.fill_diagonal(S, 1.0)
    return S


def sample_design(n: int, Sigma, seed) -> np.ndarray:
    """Rows i.i.d. ``N(0, Sigma)`` as ``Z L^T`` with ``L`` the Cholesky factor."""
    Sigma = np.asarray(Sigma, dtype=float)
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    Z = rng(seed).standard_normal((n, Sigma.shape[0]))
    return Z @ L.T


# -- noise -------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseKind:
    """Noise law plus its group sparsity.

    The length-``n`` noise vector is split into ``min(noise_groups, n)``
    contiguous groups, and ``floor(group_sparsity * m_noise)`` of them are
    zeroed at random.
    """

    kind: str = "normal100"
    group_sparsity: float = 0.0
    noise_groups: int = 50

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not 0 <= self.group_sparsity <= 1:
            raise ValueError("group_sparsity must lie in [0, 1]")
        if self.noise_groups < 1:
            raise ValueError("noise_groups must be positive")

    @classmethod
    def parse(cls, text: str, **kw) -> "NoiseKind":
        text = text.strip().lower()
        if text.isdigit():
            text = NOISE_KINDS[int(text) - 1]
        return cls(text, **kw)


def draw_noise_law(kind: str, size: int, gen: np.random.Generator) -> np.ndarray:
    if kind == "normal100":
        return 10.0 * gen.standard_normal(size)
    if kind == "scaled_t4":
        return math.sqrt(2.0) * gen.standard_t(4, size)
    if kind == "cauchy":
        return np.tan(np.pi * (gen.random(size) - 0.5))
    if kind == "mixed_normal":
        return gen.uniform(1.0, 5.0, size) * gen.standard_normal(size)
    if kind == "laplace":
        return gen.laplace(0.0, 1.0, size)
    raise ValueError(f"unknown noise kind {kind!r}")


def gen_noise(kind: Union[NoiseKind, str], n: int, seed):
    """Noise vector and the indices of its nonzero groups.

    Returns
    -------
    noise : ndarray, shape (n,)
    support : tuple of int
        Indices of the noise groups left active.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(kind, str):
        kind = NoiseKind(kind)
    gen = rng(seed)
    mg = min(kind.noise_groups, n)
    groups = GroupStructure.contiguous(n, mg)
    mg = groups.m
    n_zero = int(math.floor(kind.group_sparsity * mg + 1e-12))
    zeroed = gen.permutation(mg)[:n_zero]
    active = np.ones(mg, dtype=bool)
    active[zeroed] = False
    values = draw_noise_law(kind.kind, n, gen)
    noise = np.where(active[groups.group_of], values, 0.0)
    return noise, tuple(int(i) for i in np.flatnonzero(active))


def gen_truth(groups: GroupStructure, r_bar: int, seed):
    """``r_bar`` random groups filled with ``5 randn - 0.5``; zero elsewhere."""
    if not 0 <= r_bar <= groups.m:
        raise ValueError("need 0 <= r_bar <= m")
    gen = rng(seed)
    support = np.sort(gen.permutation(groups.m)[:r_bar])
    x = np.zeros(groups.p)
    for i in support:
        J = groups.groups[i]
        x[J] = 5.0 * gen.standard_normal(J.size) - 0.5
    return x, tuple(int(i) for i in support)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 100
    p: int = 500
    m: int = 50
    r_bar: int = 5
    cov: CovarianceKind = field(default_factory=CovarianceKind)
    noise: NoiseKind = field(default_factory=NoiseKind)
    q: int = 1
    mu: float = 1e-8
    seed: int = 0

    def name(self) -> str:
        return (f"syn_n{self.n}_p{self.p}_m{self.m}_r{self.r_bar}_{self.cov.label()}"
                f"_{self.noise.kind}_gs{self.noise.group_sparsity:g}_s{self.seed}")


def make_synthetic(spec: SyntheticSpec) -> ProblemData:
    """Instance ``b = A x* + noise`` with contiguous feature groups."""
    groups = GroupStructure.contiguous(spec.p, spec.m)
    s_design, s_truth, s_noise = np.random.SeedSequence(spec.seed).spawn(3)
    A = sample_design(spec.n, gen_covariance(spec.cov, spec.p), s_design)
    x_star, support = gen_truth(groups, spec.r_bar, s_truth)
    noise, _ = gen_noise(spec.noise, spec.n, s_noise)
    b = A @ x_star + noise
    return ProblemData(A, b, groups, q=spec.q, mu=spec.mu,
                       truth=Truth(x_star, support, noise), name=spec.name())


# -- LIBSVM ------------------------------------------------------------------------

class LibsvmFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def make_groups(p: int, groups_spec=None) -> GroupStructure:
    """Groups from a GroupStructure, a group count, a list of sizes,
    or ``None`` for contiguous groups of 10 features."""
    if isinstance(groups_spec, GroupStructure):
        if groups_spec.p != p:
            raise ValueError(f"groups cover {groups_spec.p} features, data has {p}")
        return groups_spec
    if groups_spec is None:
        return GroupStructure.contiguous(p, -(-p // 10))
    if isinstance(groups_spec, (int, np.integer)):
        return GroupStructure.contiguous(p, int(groups_spec))
    return GroupStructure.contiguous(p, sizes=list(groups_spec))


def parse_libsvm(stream: Union[TextIO, Iterable[str]], groups_spec=None, p: Optional[int] = None,
                 q: int = 1, mu: float = 1e-8, name: str = "libsvm") -> ProblemData:
    """Read ``label idx:val ...`` lines (1-based, strictly ascending indices).

    Blank lines are skipped. ``p`` defaults to the largest index seen.
    """
    labels, rows, cols, vals = [], [], [], []
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmFormatError(lineno, f"bad label {tokens[0]!r}") from None
        last = 0
        r = len(labels)
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise LibsvmFormatError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise LibsvmFormatError(lineno, f"index {idx} is not positive")
            if idx <= last:
                raise LibsvmFormatError(lineno, f"index {idx} not ascending after {last}")
            last = idx
            rows.append(r)
            cols.append(idx - 1)
            vals.append(val)
        labels.append(label)
    if not labels:
        raise ValueError("empty LIBSVM input")
    p_seen = max(cols) + 1 if cols else 0
    if p is None:
        p = p_seen
    elif p < p_seen:
        raise ValueError(f"declared p={p} but index {p_seen} present")
    if p < 1:
        raise ValueError("no features present")
    A = np.zeros((len(labels), p))
    A[rows, cols] = vals
    return ProblemData(A, np.array(labels), make_groups(p, groups_spec), q=q, mu=mu, name=name)


def load_libsvm(path, **kw) -> ProblemData:
    with open(path, encoding="utf-8") as fh:
        kw.setdefault("name", str(path).rsplit("/", 1)[-1])
        return parse_libsvm(fh, **kw)


def write_libsvm(data: ProblemData, stream: TextIO) -> None:
    """One line per row; exact zeros omitted, values in shortest round-trip form."""
    A = np.asarray(data.A)
    for i in range(A.shape[0]):
        row = A[i]
        nz = np.flatnonzero(row)
        parts = [repr(float(data.b[i]))]
        parts += [f"{j + 1}:{float(row[j])!r}" for j in nz]
        stream.write(" ".join(parts) + "\n")
