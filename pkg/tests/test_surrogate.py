import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gzpmm.problem import GroupStructure
from gzpmm.surrogate import (PhiFamily, psi_star, psi_star_prime, varphi_rho, weights,
                             weights_from_norms)

FAMILIES = [PhiFamily("linear"), PhiFamily("scad", 3), PhiFamily("scad", 4), PhiFamily("scad", 3.7),
            PhiFamily("mcp", 3), PhiFamily("mcp", 4), PhiFamily("mcp", 3.7)]
family = st.sampled_from(FAMILIES)


def test_family_validation():
    with pytest.raises(ValueError):
        PhiFamily("scad", 1.0)
    with pytest.raises(ValueError):
        PhiFamily("mcp", 2.0)
    with pytest.raises(ValueError):
        PhiFamily("huber", 2.0)
    assert PhiFamily("SCAD", 4).kind == "scad"


@pytest.mark.parametrize("phi", FAMILIES, ids=str)
def test_phi_normalization(phi):
    t = np.linspace(0, 1, 10001)
    assert phi.phi(1.0) == pytest.approx(1.0)
    assert np.min(phi.phi(t)) == pytest.approx(0.0, abs=1e-8)
    assert t[np.argmin(phi.phi(t))] == pytest.approx(phi.t_star, abs=1e-4)


def test_psi_star_examples():
    assert psi_star(PhiFamily("linear"), 0.5) == 0
    assert psi_star(PhiFamily("linear"), 2.0) == 1
    assert psi_star(PhiFamily("scad", 4), 1.0) == pytest.approx(0.15, abs=1e-15)
    assert psi_star(PhiFamily("mcp", 4), 0.0) == pytest.approx(0.0, abs=1e-15)


# values from exact maximization of the quadratic over [0, 1] at 30 digits
@pytest.mark.parametrize("phi,omega,want", [
    (PhiFamily("scad", 3.7), 1.3, 0.332783687943262448),
    (PhiFamily("scad", 3.7), -0.5, 0.0),
    (PhiFamily("scad", 3.7), 2.0, 1.0),
    (PhiFamily("scad", 3), 0.9, 0.08),
    (PhiFamily("mcp", 3.7), 1.3, 0.720745069393718093),
    (PhiFamily("mcp", 3.7), -3.0, -0.720964207450694078),
    (PhiFamily("mcp", 3.7), 4.5, 3.5),
    (PhiFamily("mcp", 4), 2.0, 1.25),
])
def test_psi_star_frozen(phi, omega, want):
    assert psi_star(phi, omega) == pytest.approx(want, rel=1e-13, abs=1e-15)


def test_psi_star_prime_examples():
    scad = PhiFamily("scad", 4)
    assert psi_star_prime(scad, 0.3) == 0
    assert psi_star_prime(scad, 1.0) == pytest.approx(0.5)
    for phi in FAMILIES:
        assert psi_star_prime(phi, 1e6) == 1
    assert psi_star_prime(PhiFamily("linear"), 1.0) == 1


def test_varphi_examples():
    scad = PhiFamily("scad", 4)
    assert varphi_rho(scad, 2, 0.1) == pytest.approx(0.1)
    assert varphi_rho(scad, 2, 0.5) == pytest.approx(0.425)
    assert varphi_rho(scad, 2, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        varphi_rho(scad, 0, 1.0)


def test_weights_examples():
    g = GroupStructure.contiguous(4, 2)
    x = np.array([0.3, 0.4, 0.0, 0.0])
    np.testing.assert_allclose(weights(PhiFamily("scad", 4), 2, x, g), [0.5, 0.0])
    np.testing.assert_allclose(weights(PhiFamily("scad", 2.5), 2, np.zeros(4), g), [0, 0])
    np.testing.assert_allclose(weights(PhiFamily("mcp", 4), 2, x, g)[1], 0.5)
    with pytest.raises(ValueError):
        weights(PhiFamily("mcp", 4), 0, x, g)


def test_scalar_and_array_outputs():
    phi = PhiFamily("scad", 4)
    assert isinstance(psi_star(phi, 1.0), float)
    assert psi_star(phi, np.array([1.0, 2.0])).shape == (2,)


# -- properties ------------------------------------------------------------------

@given(family, st.floats(-2, 5))
def test_conjugate_grid(phi, omega):
    t = np.linspace(0, 1, 10001)
    assert psi_star(phi, omega) == pytest.approx(np.max(omega * t - phi.phi(t)), abs=1e-6)


@given(family, st.floats(-3, 6))
def test_derivative_matches_differences(phi, omega):
    if any(abs(omega - k) < 1e-3 for k in phi.kinks()):
        return
    h = 1e-6
    fd = (psi_star(phi, omega + h) - psi_star(phi, omega - h)) / (2 * h)
    assert psi_star_prime(phi, omega) == pytest.approx(fd, rel=1e-6, abs=1e-8)


@given(family, st.floats(-3, 6), st.floats(0, 3))
def test_psi_star_monotone_convex(phi, w, dw):
    f0, f1, f2 = psi_star(phi, w), psi_star(phi, w + dw), psi_star(phi, w + 2 * dw)
    assert f1 >= f0 - 1e-12
    assert f0 + f2 >= 2 * f1 - 1e-9
    assert 0 <= psi_star_prime(phi, w) <= psi_star_prime(phi, w + dw) <= 1


@given(family, st.floats(0.5, 20), st.floats(0, 5))
def test_varphi_definition(phi, rho, t):
    assert varphi_rho(phi, rho, t) == pytest.approx(t - psi_star(phi, rho * t) / rho, abs=1e-14)


@given(st.sampled_from(FAMILIES[:4]), st.floats(0.5, 20), st.floats(0, 1))
def test_varphi_cap(phi, rho, s):
    start = phi.kinks()[-1] / rho
    assert varphi_rho(phi, rho, start + 10 * s) == pytest.approx(1 / rho, rel=1e-12)


@given(family, st.floats(0.5, 20), st.lists(st.floats(0, 5), min_size=2, max_size=8))
def test_weights_closed_form_and_monotone(phi, rho, norms):
    norms = np.sort(norms)
    w = weights_from_norms(phi, rho, norms)
    np.testing.assert_allclose(w, psi_star_prime(phi, rho * norms), atol=1e-15)
    assert np.all((w >= 0) & (w <= 1)) and np.all(np.diff(w) >= 0)
