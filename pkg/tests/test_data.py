import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gzpmm.data import (CovarianceKind, LibsvmFormatError, NoiseKind, SyntheticSpec,
                        draw_noise_law, gen_covariance, gen_noise, gen_truth, make_groups,
                        make_synthetic, parse_libsvm, rng, sample_design, write_libsvm)
from gzpmm.problem import GroupStructure, ProblemData


class TestCovariance:
    def test_examples(self):
        np.testing.assert_array_equal(gen_covariance(CovarianceKind(), 3), np.eye(3))
        S = gen_covariance(CovarianceKind("ar", 0.5), 3)
        assert S[0, 0] == 1 and S[0, 1] == 0.5 and S[0, 2] == 0.25
        C = gen_covariance(CovarianceKind("cs", 0.6), 4)
        assert np.all(np.diag(C) == 1) and C[1, 3] == 0.6

    def test_validation(self):
        with pytest.raises(ValueError):
            CovarianceKind("ar", 1.0)
        with pytest.raises(ValueError):
            CovarianceKind("toeplitz", 0.5)
        with pytest.raises(ValueError):
            gen_covariance(CovarianceKind(), 0)

    def test_parse(self):
        assert CovarianceKind.parse("ar:0.8") == CovarianceKind("ar", 0.8)
        assert CovarianceKind.parse("4") == CovarianceKind("cs", 0.6)
        assert CovarianceKind.parse(" Identity ") == CovarianceKind()
        assert CovarianceKind("cs", 0.8).label() == "cs:0.8"

    @pytest.mark.parametrize("kind", [CovarianceKind("ar", 0.8), CovarianceKind("cs", 0.8)])
    def test_positive_definite(self, kind):
        assert np.linalg.eigvalsh(gen_covariance(kind, 50))[0] > 0


class TestDesign:
    def test_identity_moments(self):
        A = sample_design(20000, np.eye(3), 0)
        np.testing.assert_allclose(np.cov(A.T), np.eye(3), atol=0.03)

    def test_ar_correlation(self):
        A = sample_design(20000, gen_covariance(CovarianceKind("ar", 0.5), 4), 1)
        R = np.corrcoef(A.T)
        assert R[0, 1] == pytest.approx(0.5, abs=0.02) and R[0, 2] == pytest.approx(0.25, abs=0.02)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            sample_design(3, np.array([[1.0, 2.0], [2.0, 1.0]]), 0)


class TestNoise:
    def test_laws(self):
        gen = rng(2)
        N = 200000
        assert np.var(draw_noise_law("normal100", N, gen)) == pytest.approx(100, rel=0.05)
        assert np.mean(np.abs(draw_noise_law("laplace", N, gen))) == pytest.approx(1, rel=0.02)
        assert np.var(draw_noise_law("scaled_t4", N, gen)) == pytest.approx(4, rel=0.15)
        assert np.median(np.abs(draw_noise_law("cauchy", N, gen))) == pytest.approx(1, rel=0.02)
        # E[U^2] for U ~ U(1, 5) is 31/3
        assert np.var(draw_noise_law("mixed_normal", N, gen)) == pytest.approx(31 / 3, rel=0.03)

    def test_full_sparsity_is_zero(self):
        noise, support = gen_noise(NoiseKind(group_sparsity=1.0), 100, 0)
        assert not np.any(noise) and support == ()

    @pytest.mark.parametrize("gs,n,active", [(0.8, 100, 10), (0.25, 100, 38), (0.5, 30, 15), (0.0, 7, 7)])
    def test_realized_sparsity(self, gs, n, active):
        noise, support = gen_noise(NoiseKind(group_sparsity=gs), n, 3)
        assert len(support) == active
        g = GroupStructure.contiguous(n, min(50, n))
        nz = [i for i, J in enumerate(g.groups) if np.any(noise[J])]
        assert tuple(nz) == support

    def test_parse_and_validation(self):
        assert NoiseKind.parse("3").kind == "cauchy"
        assert NoiseKind.parse("Laplace", group_sparsity=0.5).group_sparsity == 0.5
        with pytest.raises(ValueError):
            NoiseKind("student")
        with pytest.raises(ValueError):
            NoiseKind(group_sparsity=1.5)
        with pytest.raises(ValueError):
            gen_noise("laplace", 0, 0)


class TestTruth:
    def test_support_and_moments(self):
        g = GroupStructure.contiguous(5000, 500)
        x, support = gen_truth(g, 100, 4)
        assert len(support) == 100 and list(support) == sorted(support)
        on = np.concatenate([x[g.groups[i]] for i in support])
        off = np.delete(x, np.concatenate([g.groups[i] for i in support]))
        assert not np.any(off)
        assert np.mean(on) == pytest.approx(-0.5, abs=0.2) and np.var(on) == pytest.approx(25, rel=0.05)

    def test_bounds(self):
        g = GroupStructure.contiguous(10, 5)
        assert not np.any(gen_truth(g, 0, 0)[0])
        with pytest.raises(ValueError):
            gen_truth(g, 6, 0)


class TestSynthetic:
    def test_instance(self):
        spec = SyntheticSpec(n=40, p=60, m=6, r_bar=2, noise=NoiseKind(group_sparsity=0.5), seed=5)
        d = make_synthetic(spec)
        assert (d.n, d.p, d.m, d.q) == (40, 60, 6, 1)
        np.testing.assert_allclose(d.b, d.A @ d.truth.x_star + d.truth.noise, rtol=1e-13, atol=1e-12)
        assert d.name == spec.name()

    def test_deterministic(self):
        spec = SyntheticSpec(n=20, p=30, m=3, r_bar=1, seed=9)
        a, b = make_synthetic(spec), make_synthetic(spec)
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.b, b.b)

    def test_streams_are_independent(self):
        base = SyntheticSpec(n=20, p=30, m=3, r_bar=1, seed=9)
        other = SyntheticSpec(n=20, p=30, m=3, r_bar=1, seed=9, noise=NoiseKind("cauchy"))
        a, b = make_synthetic(base), make_synthetic(other)
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.truth.x_star, b.truth.x_star)
        assert not np.array_equal(a.truth.noise, b.truth.noise)


class TestLibsvm:
    def test_parse_example(self):
        d = parse_libsvm(["2.5 1:1 3:-4\n"], groups_spec=1)
        np.testing.assert_array_equal(d.A, [[1, 0, -4]])
        assert list(d.b) == [2.5]

    def test_infers_p(self):
        d = parse_libsvm(["1 2:1\n", "\n", "0 5:3\n"])
        assert d.A.shape == (2, 5) and d.m == 1
        d = parse_libsvm(["1 2:1\n"], p=4)
        assert d.p == 4
        with pytest.raises(ValueError):
            parse_libsvm(["1 9:1\n"], p=4)

    def test_write_examples(self):
        d = ProblemData(np.array([[0.0, 0.1], [0.0, 0.0]]), np.array([1.0, -2.0]),
                        GroupStructure.contiguous(2, 1))
        out = io.StringIO()
        write_libsvm(d, out)
        assert out.getvalue() == "1.0 2:0.1\n-2.0\n"

    @pytest.mark.parametrize("line,lineno", [("1 1:x\n", 1), ("1 2:1 2:1\n", 1), ("1 0:1\n", 1),
                                              ("y 1:1\n", 1), ("1 1\n", 1)])
    def test_malformed(self, line, lineno):
        with pytest.raises(LibsvmFormatError) as err:
            parse_libsvm([line])
        assert err.value.lineno == lineno

    def test_empty(self):
        with pytest.raises(ValueError):
            parse_libsvm(["\n", "  \n"])

    def test_make_groups(self):
        assert make_groups(25).m == 3
        assert make_groups(10, 5).m == 5
        assert list(make_groups(5, [2, 3]).sizes) == [2, 3]
        with pytest.raises(ValueError):
            make_groups(5, GroupStructure.contiguous(4, 2))


finite = st.floats(-1e6, 1e6, allow_subnormal=False)


@settings(max_examples=50)
@given(arrays(float, (4, 6), elements=finite), arrays(float, 4, elements=finite))
def test_round_trip(A, b):
    A = np.where(np.abs(A) < 1, 0.0, A)  # keep it sparse-ish
    A[:, -1] = A[:, -1] + (A[:, -1] == 0)  # pin p through the last column
    d = ProblemData(A, b, GroupStructure.contiguous(6, 2))
    out = io.StringIO()
    write_libsvm(d, out)
    back = parse_libsvm(io.StringIO(out.getvalue()), groups_spec=2)
    np.testing.assert_array_equal(back.A, d.A)
    np.testing.assert_array_equal(back.b, d.b)
