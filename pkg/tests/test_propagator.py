import math

import numpy as np
import pytest

import anisotrap.propagator as prop
from anisotrap.berry import berry_closed_form
from anisotrap.errors import ConvergenceError, PhysicsError
from anisotrap.experiment import prepare_superposition
from anisotrap.fockspace import FockBasis, ModeAngle, bimodal_fock_state, conserved_charge
from anisotrap.hamiltonian import build_H_phi, build_H_t, singlet_energy, singlet_state
from anisotrap.numerics import fidelity, unitary_exp
from anisotrap.propagator import (
    adiabatic_components,
    adiabaticity_ratio,
    bipartite_exp,
    cycle_period,
    evolve,
    evolve_adiabatic,
    evolve_exact_closed,
    evolve_stepped,
    initial_step_count,
)
from anisotrap.trap import EffectiveModel
from conftest import random_block_state
from oracles import KronSpace, ode_evolve


def test_cycle_period():
    assert cycle_period(EffectiveModel(1.0, 4 * math.pi, 0.3)) == pytest.approx(1.0)
    g = EffectiveModel(3.0, 1.0, 0.3)
    T = cycle_period(g)
    assert g.dnu * T / 2 == pytest.approx(2 * math.pi)
    assert T == pytest.approx(12 * math.pi / g.lam)
    assert cycle_period(EffectiveModel(1.0, -0.5, 0.3)) == pytest.approx(8 * math.pi)
    with pytest.raises(PhysicsError, match="isotropic trap has no intrinsic cycle"):
        cycle_period(EffectiveModel(1.0, 0.0, 0.3))


def test_adiabaticity_ratio():
    assert adiabaticity_ratio(EffectiveModel(2.0, 2.0 * math.sqrt(0.1), 0.3)) == pytest.approx(0.1)
    assert adiabaticity_ratio(EffectiveModel(2.0, 0.0, 0.3)) == 0
    r1 = adiabaticity_ratio(EffectiveModel(2.0, 0.4, 0.3))
    assert adiabaticity_ratio(EffectiveModel(2.0, 0.2, 0.3)) == pytest.approx(r1 / 4)
    with pytest.raises(PhysicsError):
        adiabaticity_ratio(EffectiveModel(0.0, 0.2, 0.3))


def test_isotropic_eigenstate_is_stationary():
    g = EffectiveModel(1.3, 0.0, 0.5)
    b = FockBasis(5)
    psi = singlet_state(4, 1, ModeAngle(0.5), b)
    t = 2.7
    res = evolve_exact_closed(psi, g, b, t)
    np.testing.assert_allclose(res.final_state, np.exp(-1j * singlet_energy(1.3, 4, 1) * t) * psi, atol=1e-12)


def test_closed_blockwise_equals_full_space(rng):
    g = EffectiveModel(1.0, 0.3, 0.7)
    b = FockBasis(5)
    psi = random_block_state(b, range(6), rng)
    a = evolve_exact_closed(psi, g, b, 5.3).final_state
    f = evolve_exact_closed(psi, g, b, 5.3, full_space=True).final_state
    np.testing.assert_allclose(a, f, atol=1e-12)


def test_closed_matches_ode_oracle(rng):
    lam, dnu, theta = 1.0, 0.45, 0.6
    g = EffectiveModel(lam, dnu, theta)
    b = FockBasis(4)
    space = KronSpace(6)
    psi = random_block_state(b, range(5), rng)
    t = cycle_period(g)
    res = evolve_exact_closed(psi, g, b, t)
    ref = space.to_package(ode_evolve(space, space.from_package(psi, b), lam, theta, dnu, t), b)
    assert fidelity(ref, res.final_state) >= 1 - 1e-10
    assert res.norm_drift <= 1e-10 and res.charge_drift <= 1e-10
    # U_G(2 pi) is the identity, so one cycle is exp(-i H_eff T) alone
    from anisotrap.hamiltonian import build_H_eff

    np.testing.assert_allclose(res.final_state, unitary_exp(build_H_eff(g, b), t) @ psi, atol=1e-10)


def test_initial_state_checks():
    g = EffectiveModel(1.0, 0.3, 0.7)
    b = FockBasis(3)
    with pytest.raises(ValueError, match="normalized"):
        evolve_exact_closed(2 * b.basis_vector(0, 0), g, b, 1.0)
    with pytest.raises(ValueError, match="shape"):
        evolve_exact_closed(np.ones(3), g, b, 1.0)
    top = b.basis_vector(2, 0, 1)  # charge 4 > n_max
    with pytest.raises(PhysicsError, match="truncation"):
        evolve_exact_closed(top, g, b, 1.0)


def test_bipartite_exp_matches_dense(rng):
    X = rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4))
    U = bipartite_exp(X, 0.37)
    for k in range(3):
        H = np.zeros((6, 6), dtype=complex)
        H[:2, 2:] = X[k]
        H[2:, :2] = X[k].conj().T
        np.testing.assert_allclose(U[k], unitary_exp(H, 0.37), atol=1e-13)


def test_stepped_agrees_with_closed(rng):
    g = EffectiveModel(1.0, math.sqrt(0.1), 0.4)
    b = FockBasis(6)
    T = cycle_period(g)
    for _ in range(2):
        psi = random_block_state(b, range(7), rng)
        s = evolve_stepped(psi, g, b, T)
        c = evolve_exact_closed(psi, g, b, T)
        assert fidelity(s.final_state, c.final_state) >= 1 - 1e-8
        assert s.norm_drift <= 1e-10 and s.charge_drift <= 1e-10
        assert s.step_count >= initial_step_count(g, T)


def test_stepped_second_order():
    g = EffectiveModel(1.0, 0.5, 0.4)
    b = FockBasis(4)
    psi = prepare_superposition(2, g, b)
    T = cycle_period(g)
    exact = evolve_exact_closed(psi, g, b, T).final_state
    errs = [np.linalg.norm(evolve_stepped(psi, g, b, T, steps=n).final_state - exact) for n in (400, 800, 1600)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 3.6 < e1 / e2 < 4.4


def test_stepped_time_independent_any_steps(rng):
    g = EffectiveModel(1.0, 0.0, 0.4)
    b = FockBasis(4)
    psi = random_block_state(b, range(5), rng)
    ref = unitary_exp(build_H_phi(g, b, 0.0), 3.1) @ psi
    for n in (1, 7, 50):
        np.testing.assert_allclose(evolve_stepped(psi, g, b, 3.1, steps=n).final_state, ref, atol=1e-12)


def test_charge_constant_along_trajectory(rng):
    g = EffectiveModel(1.0, 0.6, 1.1)
    b = FockBasis(5)
    psi = random_block_state(b, range(6), rng)
    C = np.real(np.diag(conserved_charge(b)))
    c0 = np.sum(C * np.abs(psi) ** 2)
    for t in np.linspace(0.5, 6.0, 4):
        out = evolve_stepped(psi, g, b, t, steps=500).final_state
        assert abs(np.sum(C * np.abs(out) ** 2) - c0) <= 1e-10


def test_stepped_errors(monkeypatch):
    g = EffectiveModel(1.0, 0.5, 0.4)
    b = FockBasis(3)
    psi = b.basis_vector(2, 0)
    with pytest.raises(ValueError):
        evolve_stepped(psi, g, b, 1.0, steps=0)
    monkeypatch.setattr(prop, "MAX_STEPS", 64)
    with pytest.raises(ConvergenceError):
        evolve_stepped(psi, g, b, 50.0)


def test_adiabatic_singlet_phases():
    g = EffectiveModel(1.0, 0.05, 0.4)
    b = FockBasis(5)
    T = cycle_period(g)
    psi = singlet_state(4, 1, ModeAngle(0.4), b)
    out = evolve_adiabatic(psi, g, b).final_state
    expected = np.exp(-1j * singlet_energy(1.0, 4, 1) * T + 1j * berry_closed_form(4, 0.4, "singlet_N")) * psi
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_adiabatic_symmetric_direction_dynamical_only():
    g = EffectiveModel(1.0, 0.05, math.pi / 4)
    b = FockBasis(5)
    T = cycle_period(g)
    psi = singlet_state(3, -1, ModeAngle(math.pi / 4), b)
    out = evolve_adiabatic(psi, g, b).final_state
    np.testing.assert_allclose(out, np.exp(-1j * singlet_energy(1.0, 3, -1) * T) * psi, atol=1e-12)


def test_adiabatic_fidelity_small_ratio():
    # the protocol state's error is quadratic in dnu/lambda with a large prefactor
    for ratio_sq, bound in [(1e-4, 0.99), (1e-6, 0.9999)]:
        g = EffectiveModel(1.0, math.sqrt(ratio_sq), math.pi / 6)
        b = FockBasis(5)
        psi = prepare_superposition(4, g, b)
        exact = evolve_exact_closed(psi, g, b, cycle_period(g)).final_state
        assert fidelity(evolve_adiabatic(psi, g, b).final_state, exact) >= bound


def test_adiabatic_error_quadratic_for_protocol_state():
    b = FockBasis(5)
    errs = []
    for k in range(4):
        g = EffectiveModel(1.0, math.sqrt(1e-3) / 2**k, math.pi / 6)
        psi = prepare_superposition(4, g, b)
        exact = evolve_exact_closed(psi, g, b, cycle_period(g)).final_state
        errs.append(1 - fidelity(evolve_adiabatic(psi, g, b).final_state, exact))
    for e1, e2 in zip(errs, errs[1:]):
        assert 0.15 <= e2 / e1 <= 0.4


def test_doublet_member_follows_holonomy():
    """|1>_0|-> comes back with phase +1, the non-abelian holonomy value.

    The abelian ket-family phase exp(i gamma_1) would be -1 at theta = pi/6.
    """
    b = FockBasis(3)
    theta = math.pi / 6
    psi = bimodal_fock_state(1, ModeAngle(theta), b)
    g = EffectiveModel(1.0, 1e-3, theta)
    exact = evolve_exact_closed(psi, g, b, cycle_period(g)).final_state
    assert np.vdot(psi, exact) == pytest.approx(1.0, abs=1e-2)
    assert np.exp(1j * berry_closed_form(1, theta)) == pytest.approx(-1.0)
    np.testing.assert_allclose(evolve_adiabatic(psi, g, b).final_state, psi, atol=1e-12)


def test_adiabatic_guards():
    b = FockBasis(5)
    psi = singlet_state(3, 1, ModeAngle(0.4), b)
    with pytest.raises(PhysicsError):
        evolve_adiabatic(psi, EffectiveModel(1.0, 1.0, 0.4), b)
    with pytest.warns(UserWarning):
        evolve_adiabatic(psi, EffectiveModel(1.0, 0.5, 0.4), b)
    g = EffectiveModel(1.0, 0.05, 0.4)
    kernel = b.basis_vector(0, 2)  # B-mode content outside the labelled family
    with pytest.raises(PhysicsError, match="residual norm"):
        adiabatic_components(kernel, g, b)
    with pytest.raises(PhysicsError, match="one full cycle"):
        evolve(psi, g, b, "adiabatic", t=1.0)
    with pytest.raises(ValueError):
        evolve(psi, g, b, "euler")


def test_decomposition_of_protocol_state():
    g = EffectiveModel(1.0, 0.05, math.pi / 6)
    b = FockBasis(5)
    parts = adiabatic_components(prepare_superposition(4, g, b), g, b)
    weights = {label: abs(c) ** 2 for label, c, _ in parts}
    assert weights == pytest.approx(
        {("singlet", 4, 1): 0.25, ("singlet", 4, -1): 0.25, ("singlet", 5, 1): 0.25, ("singlet", 5, -1): 0.25}
    )


def test_hamiltonian_period_consistent_with_propagation(rng):
    g = EffectiveModel(1.0, 0.3, 0.7)
    b = FockBasis(3)
    T = cycle_period(g)
    np.testing.assert_allclose(build_H_t(g, b, T), build_H_t(g, b, 0.0), atol=1e-13)
