import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gzpmm.problem import (GroupStructure, ProblemData, RegularizerSpec, Truth, eval_loss,
                           eval_potential, eval_surrogate_objective, eval_true_objective,
                           group_norms, q_norm_sq)
from gzpmm.surrogate import PhiFamily, varphi_rho

G22 = GroupStructure([[0, 1], [2, 3]])
finite = st.floats(-1e3, 1e3, allow_nan=False)


def _data(A, b, groups=G22, q=2, mu=0.0):
    return ProblemData(np.asarray(A, float), np.asarray(b, float), groups, q=q, mu=mu)


class TestGroupStructure:
    def test_sorted_and_counts(self):
        g = GroupStructure([[2, 0], [1]])
        assert g.m == 2 and g.p == 3
        assert list(g.groups[0]) == [0, 2]
        assert list(g.group_of) == [0, 1, 0]

    @pytest.mark.parametrize("groups", [[[0, 1], [1, 2]], [[0], []], [[0, 2]], []])
    def test_rejects_non_partitions(self, groups):
        with pytest.raises(ValueError):
            GroupStructure(groups, p=3)

    def test_contiguous(self):
        g = GroupStructure.contiguous(10, 3)
        assert list(g.sizes) == [4, 4, 2]
        assert list(GroupStructure.contiguous(5, sizes=[2, 3]).sizes) == [2, 3]
        with pytest.raises(ValueError):
            GroupStructure.contiguous(5, sizes=[2, 2])

    def test_equality(self):
        assert GroupStructure.contiguous(4, 2) == G22
        assert GroupStructure.contiguous(4, 4) != G22


class TestProblemData:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            _data(np.zeros((3, 4)), np.zeros(2))
        with pytest.raises(ValueError):
            _data(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ValueError):
            _data(np.zeros((2, 4)), np.zeros(2), q=3)
        with pytest.raises(ValueError):
            _data(np.zeros((2, 4)), np.zeros(2), mu=-1)
        with pytest.raises(ValueError):
            ProblemData(np.zeros((2, 4)), np.zeros(2), G22, truth=Truth(np.zeros(3), ()))

    def test_column_major(self):
        d = _data(np.ones((2, 4)), np.zeros(2))
        assert d.A.flags.f_contiguous and (d.n, d.p, d.m) == (2, 4, 2)

    def test_regularizer(self):
        reg = RegularizerSpec(nu=0.5, rho=3.0)
        assert reg.lam == 1.5
        assert RegularizerSpec.from_lambda(1.5, 3.0, reg.phi).nu == pytest.approx(0.5)
        with pytest.raises(ValueError):
            RegularizerSpec(nu=1.0, rho=0.5)
        with pytest.raises(ValueError):
            RegularizerSpec(nu=0.0, rho=2.0)


class TestEvaluations:
    def test_group_norms_examples(self):
        assert list(group_norms(np.zeros(4), G22)) == [0, 0]
        assert list(group_norms([3, 4, 0, 0], G22)) == [5, 0]
        with pytest.raises(ValueError):
            group_norms(np.zeros(3), G22)

    def test_group_norms_brute_force(self):
        gen = np.random.default_rng(0)
        g = GroupStructure.contiguous(6, 3)
        x = gen.standard_normal(6)
        brute = [np.sqrt(sum(x[j] ** 2 for j in J)) for J in g.groups]
        np.testing.assert_allclose(group_norms(x, g), brute, rtol=1e-15)

    def test_loss_examples(self):
        assert eval_loss(np.zeros(4), 1) == 0
        assert eval_loss([3, 4, 0, 0], 2) == 2.5
        assert eval_loss([1, -1, 2, 0], 1) == 2.0
        with pytest.raises(ValueError):
            eval_loss([], 1)

    def test_surrogate_examples(self):
        zero = _data(np.zeros((2, 4)), np.zeros(2))
        for phi in (PhiFamily("linear"), PhiFamily("scad", 4)):
            reg = RegularizerSpec(1.0, 2.0, phi)
            assert eval_surrogate_objective(np.zeros(4), zero, reg) == 0
        reg = RegularizerSpec(1.0, 2.0, PhiFamily("scad", 4))
        assert eval_surrogate_objective([1, 0, 0, 0], zero, reg) == pytest.approx(1.0)

    def test_mcp_zero_at_origin(self):
        # the first MCP branch needs t <= (2a - a^2) / (2 rho) < 0, so no offset appears at t = 0
        zero = _data(np.zeros((2, 4)), np.zeros(2))
        for a in (2.5, 3.0, 4.0, 7.0):
            reg = RegularizerSpec(1.0, 2.0, PhiFamily("mcp", a))
            assert eval_surrogate_objective(np.zeros(4), zero, reg) == pytest.approx(0.0, abs=1e-15)

    def test_surrogate_composition(self):
        gen = np.random.default_rng(1)
        g = GroupStructure.contiguous(6, 3)
        d = _data(gen.standard_normal((5, 6)), gen.standard_normal(5), g, q=1, mu=0.3)
        reg = RegularizerSpec(0.7, 2.5, PhiFamily("scad", 3.7))
        x = gen.standard_normal(6)
        want = (np.abs(d.A @ x - d.b).sum() / np.sqrt(5) + 0.15 * x @ x
                + reg.lam * varphi_rho(reg.phi, reg.rho, group_norms(x, g)).sum())
        assert eval_surrogate_objective(x, d, reg) == pytest.approx(want, rel=1e-14)

    def test_true_objective(self):
        zero = _data(np.zeros((2, 4)), np.zeros(2))
        assert eval_true_objective(np.zeros(4), zero, 2.0) == 0
        assert eval_true_objective([3, 4, 0, 0], zero, 2.0) == 2.0
        gen = np.random.default_rng(2)
        g = GroupStructure.contiguous(12, 4)
        x = gen.standard_normal(12) * (gen.random(12) < 0.3)
        d = _data(np.zeros((3, 12)), np.zeros(3), g)
        count = sum(1 for J in g.groups if np.any(x[J] != 0))
        assert eval_true_objective(x, d, 1.0) == count

    def test_potential_examples(self):
        zero = _data(np.zeros((2, 4)), np.zeros(2))
        reg = RegularizerSpec(1.0, 2.0)
        x = np.array([0.3, 0, 0, 1])
        theta = eval_surrogate_objective(x, zero, reg)
        assert eval_potential(x, x, zero, reg, 1, 1) == theta
        y = x - [2, 0, 0, 0]
        assert eval_potential(x, y, zero, reg, 1.0, 5.0) == pytest.approx(theta + 1)
        with pytest.raises(ValueError):
            eval_potential(x, y, zero, reg, 0.0, 1.0)

    def test_potential_expansion(self):
        gen = np.random.default_rng(3)
        d = _data(gen.standard_normal((3, 4)), gen.standard_normal(3))
        reg = RegularizerSpec(0.4, 2.0)
        x, y = gen.standard_normal(4), gen.standard_normal(4)
        dx = x - y
        want = eval_surrogate_objective(x, d, reg) + 0.25 * (0.1 * dx @ dx + 0.02 * np.sum((d.A @ dx) ** 2))
        assert eval_potential(x, y, d, reg, 0.1, 0.02) == pytest.approx(want, rel=1e-14)
        assert q_norm_sq(dx, d.A, 0.1, 0.02) == pytest.approx(0.1 * dx @ dx + 0.02 * np.sum((d.A @ dx) ** 2))


# -- properties -------------------------------------------------------------

@given(st.sampled_from([PhiFamily("linear"), PhiFamily("scad", 3), PhiFamily("scad", 4),
                        PhiFamily("mcp", 3), PhiFamily("mcp", 4)]),
       st.floats(1, 50))
def test_capped_penalty_below_one(phi, rho):
    t = np.linspace(0, 10, 2001)
    assert np.all(rho * varphi_rho(phi, rho, t) <= 1 + 1e-12)


@given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite))
def test_group_norms_lipschitz(x, y):
    g = GroupStructure.contiguous(6, 3)
    diff = group_norms(x - y, g)
    assert np.all(np.abs(group_norms(x, g) - group_norms(y, g)) <= diff * (1 + 1e-12) + 1e-9)


@settings(max_examples=50)
@given(arrays(float, 4, elements=st.floats(-10, 10)), st.integers(1, 2))
def test_potential_on_diagonal(x, q):
    d = _data(np.arange(8.0).reshape(2, 4), [1.0, -1.0], q=q)
    reg = RegularizerSpec(0.3, 2.0)
    assert eval_potential(x, x, d, reg, 1e-3, 1e-3) == eval_surrogate_objective(x, d, reg)


@settings(max_examples=50)
@given(arrays(float, 4, elements=st.floats(-10, 10)), arrays(float, 4, elements=st.floats(-10, 10)))
def test_surrogate_bounded_by_true(x, z):
    d = _data(np.arange(8.0).reshape(2, 4), [1.0, -1.0], q=1)
    reg = RegularizerSpec(0.3, 2.0)
    assert eval_surrogate_objective(x, d, reg) <= eval_true_objective(x, d, reg.nu) + 1e-9
    assert eval_potential(x, z, d, reg, 1e-2, 1e-2) >= eval_surrogate_objective(x, d, reg) - 1e-12
