import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisotrap.fockspace import MINUS, PLUS, FockBasis, ModeAngle, bimodal_fock_state, loop_rotation
from anisotrap.hamiltonian import (
    analytic_spectrum,
    build_H_eff,
    build_H_phi,
    build_H_t,
    numeric_spectrum,
    singlet_state,
)
from anisotrap.numerics import max_asymmetry
from anisotrap.trap import EffectiveModel
from oracles import KronSpace


def off_block_norm(H, basis):
    mask = basis.charges[:, None] != basis.charges[None, :]
    return np.max(np.abs(H[mask]))


def test_vacuum_is_annihilated(unit_model):
    b = FockBasis(3)
    v = b.basis_vector(0, 0, MINUS)
    assert np.vdot(v, build_H_phi(unit_model, b, 0.4) @ v) == 0
    assert not np.any(build_H_phi(unit_model, b, 0.4) @ v)


@pytest.mark.parametrize("N", [2, 3, 5])
def test_singlet_coupling_element(N):
    g = EffectiveModel(1.7, 0.0, 0.3)
    b = FockBasis(6)
    ang = ModeAngle(0.3, 1.1)
    H = build_H_phi(g, b, 1.1)
    up = bimodal_fock_state(N - 2, ang, b, spin=PLUS)
    down = bimodal_fock_state(N, ang, b)
    assert np.vdot(up, H @ down) == pytest.approx(-1.7 * math.sqrt(N * (N - 1)), abs=1e-12)


def test_matches_kron_oracle(rng):
    b = FockBasis(5)
    space = KronSpace(7)
    g = EffectiveModel(0.8, 0.0, 0.9)
    for phi in rng.uniform(0, 2 * math.pi, 5):
        H = build_H_phi(g, b, phi)
        Hk = space.hamiltonian(0.8, 0.9, phi)
        for C in b.exact_charges:
            sl = b.block(C)
            for j in range(sl.start, sl.stop):
                e = np.zeros(b.dim, dtype=complex)
                e[j] = 1
                np.testing.assert_allclose(space.to_package(Hk @ space.from_package(e, b), b), H @ e, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(phi=st.floats(-10, 10), theta=st.floats(0, math.pi / 2), lam=st.floats(0.01, 10))
def test_covariance_hermiticity_blocks(phi, theta, lam):
    g = EffectiveModel(lam, 0.0, theta)
    b = FockBasis(5)
    H0 = build_H_phi(g, b, 0.0)
    H = build_H_phi(g, b, phi)
    U = loop_rotation(phi, b)
    np.testing.assert_allclose(H, U[:, None] * H0 * U.conj()[None, :], atol=1e-11 * max(1, lam))
    assert max_asymmetry(H) <= 1e-12
    assert off_block_norm(H, b) == 0


def test_build_H_t_and_periods():
    g = EffectiveModel(1.0, 0.37, 0.5)
    b = FockBasis(4)
    T = 4 * math.pi / g.dnu
    H0 = build_H_phi(g, b, 0.0)
    np.testing.assert_array_equal(build_H_t(g, b, 0.0), H0)
    np.testing.assert_allclose(build_H_t(g, b, T), H0, atol=1e-13)
    # period pi in phi, so T/2 in t
    np.testing.assert_allclose(build_H_t(g, b, T / 2), H0, atol=1e-13)
    assert np.max(np.abs(build_H_t(g, b, T / 4) - H0)) > 0.1
    t = 0.77
    np.testing.assert_array_equal(build_H_t(g, b, t), build_H_phi(g, b, g.dnu * t / 2))


def test_H_eff():
    b = FockBasis(4)
    g0 = EffectiveModel(1.0, 0.0, 0.5)
    np.testing.assert_array_equal(build_H_eff(g0, b), build_H_phi(g0, b, 0.0))
    g = EffectiveModel(1.0, 0.4, 0.5)
    diff = build_H_eff(g, b) - build_H_phi(g, b, 0.0)
    expected = np.diag([0.2 * (nb - na) for na, nb, _ in b.states])
    np.testing.assert_allclose(diff, expected, atol=1e-15)
    assert off_block_norm(build_H_eff(g, b), b) == 0


def test_H_eff_isotropic_spectrum():
    b = FockBasis(4)
    g = EffectiveModel(2.0, 0.0, 0.5)
    w = np.linalg.eigvalsh(build_H_eff(g, b)[b.block(3), b.block(3)])
    assert w[0] == pytest.approx(-2 * math.sqrt(6))
    assert w[-1] == pytest.approx(2 * math.sqrt(6))


@pytest.mark.parametrize("N, mag", [(2, math.sqrt(2)), (3, math.sqrt(6))])
def test_analytic_energies(N, mag):
    g = EffectiveModel(1.3, 0.0, 0.4)
    entries = analytic_spectrum(g, FockBasis(5), 0.2, [N])
    assert [e.energy for e in entries] == pytest.approx([-1.3 * mag, 1.3 * mag])
    assert [e.label for e in entries] == [("singlet", N, -1), ("singlet", N, 1)]


def test_analytic_residuals():
    g = EffectiveModel(1.3, 0.0, 0.4)
    b = FockBasis(7)
    H = build_H_phi(g, b, 2.1)
    entries = analytic_spectrum(g, b, 2.1, range(0, 8))
    assert entries[0].label == ("doublet", 0) and entries[1].label == ("doublet", 1)
    for e in entries:
        assert np.linalg.norm(H @ e.vector - e.energy * e.vector) <= 1e-10
        assert np.linalg.norm(e.vector) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        analytic_spectrum(g, b, 0.0, [8])


def test_singlet_state_validation():
    b = FockBasis(3)
    with pytest.raises(ValueError):
        singlet_state(1, 1, ModeAngle(0.3), b)
    with pytest.raises(ValueError):
        singlet_state(2, 0, ModeAngle(0.3), b)


@pytest.mark.parametrize("C", [2, 3, 4, 6])
def test_block_eigenvalue_multiset(C):
    """Block C holds +-lam sqrt(k(k-1)) for every k = 2..C and two zeros.

    The A-mode singlet sits at k = C; the others carry B-mode excitations.
    """
    lam = 1.1
    g = EffectiveModel(lam, 0.0, 0.7)
    b = FockBasis(6)
    sl = b.block(C)
    w = np.linalg.eigvalsh(build_H_phi(g, b, 0.5)[sl, sl])
    expected = sorted([0.0, 0.0] + [s * lam * math.sqrt(k * (k - 1)) for k in range(2, C + 1) for s in (-1, 1)])
    assert len(w) == sl.stop - sl.start
    np.testing.assert_allclose(w, expected, atol=1e-10)


def test_numeric_labels_roundtrip():
    g = EffectiveModel(1.0, 0.0, 0.45)
    b = FockBasis(6)
    num = numeric_spectrum(g, b, 0.9)
    ana = analytic_spectrum(g, b, 0.9, range(0, 7))
    by_label = {e.label: e for e in num if e.label is not None}
    for a in ana:
        assert a.label in by_label
        e = by_label[a.label]
        assert abs(np.vdot(a.vector, e.vector)) ** 2 > 0.999
        assert e.energy == pytest.approx(a.energy, rel=1e-10, abs=1e-12)
    assert len(num) == sum(b.block(C).stop - b.block(C).start for C in b.exact_charges)


def test_spectrum_is_phi_independent(rng):
    for g in (EffectiveModel(1.0, 0.0, 0.45), EffectiveModel(1.0, 0.0, math.pi / 4)):
        b = FockBasis(5)
        ref = sorted(e.energy for e in numeric_spectrum(g, b, 0.0))
        for phi in rng.uniform(0, 2 * math.pi, 4):
            np.testing.assert_allclose(sorted(e.energy for e in numeric_spectrum(g, b, phi)), ref, atol=1e-10)
