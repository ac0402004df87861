"""One-cycle interference protocol.

Prepare ``(|N>_0 + |N+1>_0)|-> / sqrt(2)``, evolve for one cycle ``T``, and
read the driven-mode quadrature in the interaction picture. Over one cycle
the two Fock components pick up geometric phases differing by
``2 pi cos(2 theta)``; at ``theta = pi/6`` this is half a turn and the
quadrature comes out with the opposite sign to an isotropic trap run for
the same time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from anisotrap.berry import berry_closed_form, phase_difference
from anisotrap.errors import PhysicsError
from anisotrap.fockspace import FockBasis, ModeAngle, bimodal_fock_state, ladder, rotated_mode, spin_op
from anisotrap.hamiltonian import build_H_phi, singlet_energy
from anisotrap.propagator import cycle_period, evolve, evolve_adiabatic, evolve_exact_closed
from anisotrap.trap import CouplingGeometry, ValidityThresholds, feasibility_report, validity_report

SIGNAL_NULL = 0.1
CANONICAL_THETA = math.pi / 6


def prepare_superposition(N: int, g, basis: FockBasis) -> np.ndarray:
    if N < 2:
        raise PhysicsError("the protocol needs N >= 2")
    if N + 1 > basis.n_max:
        raise PhysicsError(f"N + 1 = {N + 1} exceeds n_max = {basis.n_max}")
    angle = ModeAngle(g.theta, 0.0)
    psi = bimodal_fock_state(N, angle, basis) + bimodal_fock_state(N + 1, angle, basis)
    return psi / np.linalg.norm(psi)


def observable_O(g, basis: FockBasis) -> np.ndarray:
    """Driven-mode quadrature ``(A_0^dag + A_0) / 2``."""
    A = rotated_mode(ModeAngle(g.theta, 0.0), "A", basis)
    return 0.5 * (A + A.conj().T)


def observable_O_interaction(g, basis: FockBasis, t: float) -> np.ndarray:
    """The quadrature conjugated by free trap evolution up to time ``t``."""
    a = ladder("a", basis)
    b = ladder("b", basis)
    c, s = math.cos(g.theta), math.sin(g.theta)
    raise_ = c * np.exp(1j * g.nu_a * t) * a.conj().T + s * np.exp(1j * g.nu_b * t) * b.conj().T
    return 0.5 * (raise_ + raise_.conj().T)


def schrodinger_expectation(psi_I: np.ndarray, g, basis: FockBasis, t: float) -> float:
    """``<O>`` after undoing the interaction picture on the state instead of the operator."""
    na = np.array([st[0] for st in basis.states], dtype=float)
    nb = np.array([st[1] for st in basis.states], dtype=float)
    sz = np.real(np.diag(spin_op("sz", basis)))
    E_trap = g.nu_a * na + g.nu_b * nb + 0.5 * (g.nu_a + g.nu_b) * sz
    psi_S = np.exp(-1j * E_trap * t) * psi_I
    return float(np.real(np.vdot(psi_S, observable_O(g, basis) @ psi_S)))


def expectation(psi: np.ndarray, O: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, O @ psi)))


def bracket(N: int, lam: float, T: float) -> float:
    E1 = singlet_energy(lam, N, 1) * T
    E2 = singlet_energy(lam, N + 1, 1) * T
    return math.cos(E1) * math.cos(E2) * math.sqrt(N + 1) + math.sin(E1) * math.sin(E2) * math.sqrt(N - 1)


def closed_form_expectation(N: int, g, T: float, geometric: bool = True) -> float:
    """Adiabatic prediction for ``<O_I(T)>``.

    ``geometric=False`` drops the Berry-phase difference, which is the
    isotropic (dynamical-phase-only) prediction.
    """
    if N < 2:
        raise PhysicsError("closed form needs N >= 2")
    dgamma = 0.0
    if geometric:
        dgamma = berry_closed_form(N, g.theta) - berry_closed_form(N + 1, g.theta)
    return 0.5 * math.cos(dgamma + g.nu_bar * T) * bracket(N, g.lam, T)


def isotropic_reference(N: int, g, basis: FockBasis, T: float | None = None) -> dict:
    """Same initial state, evolved for the same ``T`` under the frozen ``H(phi=0)``."""
    T = cycle_period(g) if T is None else T
    psi0 = prepare_superposition(N, g, basis)
    H0 = build_H_phi(g, basis, 0.0)
    psi = np.zeros_like(psi0)
    for C in basis.support_charges(psi0):
        sl = basis.block(C)
        w, V = np.linalg.eigh(H0[sl, sl])
        psi[sl] = V @ (np.exp(-1j * w * T) * (V.conj().T @ psi0[sl]))
    O_T = observable_O_interaction(g, basis, T)
    return {
        "state": psi,
        "expval": expectation(psi, O_T),
        "closed_form": closed_form_expectation(N, g, T, geometric=False),
    }


@dataclass(frozen=True)
class ExperimentRecord:
    inputs: dict
    gamma_N: float
    gamma_N1: float
    delta_gamma_mod2pi: float
    expval_aniso: float
    expval_closed_form: float
    expval_iso_ref: float
    expval_iso_closed_form: float
    sign_flip_ratio: float
    final_state_overlap: float
    adiabatic_error: float
    signal_factor: float
    signal_null: bool
    suggested_nu_bar: float
    canonical: bool
    validity: dict = field(default_factory=dict)
    final_state: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_flat(self) -> dict:
        """Ordered flat mapping consumed by the serializers."""
        out = {f"in_{k}": v for k, v in self.inputs.items()}
        for name in (
            "gamma_N",
            "gamma_N1",
            "delta_gamma_mod2pi",
            "expval_aniso",
            "expval_closed_form",
            "expval_iso_ref",
            "expval_iso_closed_form",
            "sign_flip_ratio",
            "final_state_overlap",
            "adiabatic_error",
            "signal_factor",
            "signal_null",
            "suggested_nu_bar",
            "canonical",
        ):
            out[name] = getattr(self, name)
        out.update({f"validity_{k}": v for k, v in self.validity.items()})
        return out


def _suggested_nu_bar(g, T: float) -> float:
    """Nearest mean frequency (dnu fixed) for which ``nu_bar T`` is a multiple of 2 pi."""
    m = round(g.nu_bar * T / (2 * math.pi))
    return 2 * math.pi * m / T


def run_cycle_experiment(
    N: int,
    g,
    basis: FockBasis,
    method: str = "closed",
    steps: int | None = None,
    thresholds: ValidityThresholds = ValidityThresholds(),
) -> ExperimentRecord:
    T = cycle_period(g)
    if isinstance(g, CouplingGeometry):
        validity = validity_report(g, thresholds)
    else:
        validity = feasibility_report(g, thresholds)
    if method == "adiabatic" and not validity["adiabatic_ok"]:
        raise PhysicsError(
            f"adiabatic method requested but |dnu/lambda|^2 = {validity['adiabatic_ratio']:.3g} "
            f">= {thresholds.adiabatic_max}"
        )
    psi0 = prepare_superposition(N, g, basis)
    res = evolve(psi0, g, basis, method, T, steps)
    psi_T = res.final_state
    O_T = observable_O_interaction(g, basis, T)
    aniso = expectation(psi_T, O_T)
    iso = isotropic_reference(N, g, basis, T)

    try:
        exact = psi_T if method == "closed" else evolve_exact_closed(psi0, g, basis, T).final_state
        ad = psi_T if method == "adiabatic" else evolve_adiabatic(psi0, g, basis).final_state
        ad_err = 1.0 - abs(np.vdot(ad, exact)) ** 2
    except PhysicsError:
        ad_err = math.nan

    gN = berry_closed_form(N, g.theta)
    gN1 = berry_closed_form(N + 1, g.theta)
    factor = math.cos(gN - gN1 + g.nu_bar * T)
    inputs = {"N": N, "n_max": basis.n_max, "method": method, "T": T}
    inputs.update(g.to_dict())
    return ExperimentRecord(
        inputs=inputs,
        gamma_N=gN,
        gamma_N1=gN1,
        delta_gamma_mod2pi=phase_difference(N, g.theta),
        expval_aniso=aniso,
        expval_closed_form=closed_form_expectation(N, g, T),
        expval_iso_ref=iso["expval"],
        expval_iso_closed_form=iso["closed_form"],
        sign_flip_ratio=aniso / iso["expval"] if iso["expval"] != 0 else math.nan,
        final_state_overlap=float(abs(np.vdot(iso["state"], psi_T))),
        adiabatic_error=float(ad_err),
        signal_factor=factor,
        signal_null=min(abs(factor), abs(math.cos(g.nu_bar * T))) < SIGNAL_NULL,
        suggested_nu_bar=_suggested_nu_bar(g, T),
        canonical=abs(g.theta - CANONICAL_THETA) < 1e-9,
        validity=validity,
        final_state=psi_T,
    )
