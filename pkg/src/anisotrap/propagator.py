"""Time evolution over one cycle of the loop.

Three routes, all acting blockwise on conserved-charge sectors:

``closed``
    ``psi(t) = R(phi(t)) exp(-i H_eff t) psi(0)``, exact up to eigensolver
    precision; one diagonalization per block.
``stepped``
    midpoint exponential integrator of ``i d/dt psi = H(t) psi`` built
    directly from ``H(t)``; second order in the step.
``adiabatic``
    expansion in instantaneous eigenstates, each multiplied by its dynamical
    and geometric phase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from anisotrap.berry import berry_closed_form, zero_space_frame, zero_space_holonomy_closed
from anisotrap.errors import ConvergenceError, PhysicsError
from anisotrap.fockspace import MINUS, PLUS, FockBasis, ModeAngle, bimodal_fock_state, loop_rotation
from anisotrap.hamiltonian import build_H_eff, loop_terms, singlet_energy, singlet_state
from anisotrap.numerics import hermitian_eig

MAX_STEPS = 2**20
REFINE_TARGET = 1e-10
CHUNK = 2048


@dataclass(frozen=True)
class EvolutionResult:
    final_state: np.ndarray
    t_final: float
    method: str
    norm_drift: float
    charge_drift: float
    step_count: int | None = None


def cycle_period(g) -> float:
    """``T = 4 pi / |dnu|``, the time for the loop phase to advance by 2 pi."""
    if g.dnu == 0:
        raise PhysicsError("isotropic trap has no intrinsic cycle (dnu = 0)")
    return 4.0 * math.pi / abs(g.dnu)


def adiabaticity_ratio(g) -> float:
    if g.lam == 0:
        raise PhysicsError("lambda = 0: no coupling, adiabaticity undefined")
    return (g.dnu / g.lam) ** 2


def _check_initial(psi0: np.ndarray, basis: FockBasis) -> list[int]:
    psi0 = np.asarray(psi0)
    if psi0.shape != (basis.dim,):
        raise ValueError(f"state has shape {psi0.shape}, basis dimension is {basis.dim}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    support = basis.support_charges(psi0)
    if support and support[-1] > basis.n_max:
        raise PhysicsError(
            f"initial state populates charge {support[-1]} > n_max = {basis.n_max}; "
            "truncation would not be exact"
        )
    return support


def _result(psi0, psi, basis, t, method, steps=None) -> EvolutionResult:
    C = basis.charges
    c0 = float(np.sum(C * np.abs(psi0) ** 2))
    c1 = float(np.sum(C * np.abs(psi) ** 2))
    return EvolutionResult(
        final_state=psi,
        t_final=t,
        method=method,
        norm_drift=abs(float(np.linalg.norm(psi)) - float(np.linalg.norm(psi0))),
        charge_drift=abs(c1 - c0),
        step_count=steps,
    )


def evolve_exact_closed(psi0, g, basis: FockBasis, t: float, full_space: bool = False) -> EvolutionResult:
    """Exact state at time ``t`` through the co-rotating frame.

    ``full_space`` exponentiates the whole truncated matrix at once instead of
    block by block; it exists to cross-check the blockwise path.
    """
    support = _check_initial(psi0, basis)
    psi0 = np.asarray(psi0, dtype=complex)
    H = build_H_eff(g, basis)
    if full_space:
        w, V = hermitian_eig(H)
        psi = V @ (np.exp(-1j * w * t) * (V.conj().T @ psi0))
    else:
        psi = np.zeros_like(psi0)
        for C in support:
            sl = basis.block(C)
            w, V = hermitian_eig(H[sl, sl])
            psi[sl] = V @ (np.exp(-1j * w * t) * (V.conj().T @ psi0[sl]))
    psi = loop_rotation(g.dnu * t / 2.0, basis) * psi
    return _result(psi0, psi, basis, t, "closed")


def bipartite_exp(X: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` for a stack of ``H = [[0, X], [X^dag, 0]]``.

    Uses ``X^dag X = W s^2 W^dag``; costs one Hermitian eigendecomposition of
    the smaller side per matrix instead of one of the full block.
    """
    K, m, n = X.shape
    Xh = X.conj().transpose(0, 2, 1)
    s2, W = np.linalg.eigh(Xh @ X)
    s = np.sqrt(np.clip(s2, 0.0, None))
    Wh = W.conj().transpose(0, 2, 1)
    sin_s = dt * np.sinc(s * dt / np.pi)  # sin(s dt) / s
    cos_m1 = -0.5 * dt**2 * np.sinc(s * dt / (2 * np.pi)) ** 2  # (cos(s dt) - 1) / s^2
    XW = X @ W
    U = np.empty((K, m + n, m + n), dtype=complex)
    U[:, :m, :m] = np.eye(m) + (XW * cos_m1[:, None, :]) @ XW.conj().transpose(0, 2, 1)
    U[:, m:, m:] = (W * np.cos(s * dt)[:, None, :]) @ Wh
    U[:, :m, m:] = -1j * (XW * sin_s[:, None, :]) @ Wh
    U[:, m:, :m] = -1j * (W * sin_s[:, None, :]) @ XW.conj().transpose(0, 2, 1)
    return U


def _stepped_block(Hc, K, v, spins, dnu, t, steps):
    """Midpoint steps inside one charge block.

    ``H(phi)`` only connects spin-down to spin-up states of a block, so every
    step exponential is taken with :func:`bipartite_exp`.
    """
    lo = np.flatnonzero(spins == MINUS)
    hi = np.flatnonzero(spins == PLUS)
    if hi.size == 0:
        # no spin-up partner inside the truncation: H vanishes on this block
        return v.copy()
    perm = np.concatenate([lo, hi])
    Kh = K.conj().T
    Xc, Xk, Xkh = Hc[np.ix_(lo, hi)], K[np.ix_(lo, hi)], Kh[np.ix_(lo, hi)]
    dt = t / steps
    w = v[perm]
    for start in range(0, steps, CHUNK):
        k = np.arange(start, min(start + CHUNK, steps))
        z = np.exp(-1j * dnu * (k + 0.5) * dt)[:, None, None]
        X = Xc[None] + z * Xk[None] + np.conj(z) * Xkh[None]
        for Uk in bipartite_exp(X, dt):
            w = Uk @ w
    out = np.empty_like(v)
    out[perm] = w
    return out


def _stepped_once(psi0, g, basis, support, t, steps):
    psi = np.zeros_like(psi0)
    spins = np.array([st[2] for st in basis.states])
    for C in support:
        sl = basis.block(C)
        Hc, K = loop_terms(g.lam, g.theta, basis, C)
        psi[sl] = _stepped_block(Hc, K, psi0[sl], spins[sl], g.dnu, t, steps)
    return psi


def initial_step_count(g, t: float) -> int:
    return max(1, math.ceil(64.0 * abs(t) * (abs(g.lam) + abs(g.dnu))))


def evolve_stepped(psi0, g, basis: FockBasis, t: float, steps: int | None = None) -> EvolutionResult:
    """Midpoint exponential integration of the time-dependent Hamiltonian.

    With ``steps=None`` the step count starts at ``ceil(64 t (lam + |dnu|))``
    and doubles until two successive refinements agree to fidelity
    ``1 - 1e-10``; more than ``2**20`` steps raises :class:`ConvergenceError`.
    """
    support = _check_initial(psi0, basis)
    psi0 = np.asarray(psi0, dtype=complex)
    if steps is not None:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        return _result(psi0, _stepped_once(psi0, g, basis, support, t, steps), basis, t, "stepped", steps)
    n = initial_step_count(g, t)
    prev = _stepped_once(psi0, g, basis, support, t, n)
    while True:
        n *= 2
        if n > MAX_STEPS:
            raise ConvergenceError(f"stepped integrator did not converge within {MAX_STEPS} steps")
        cur = _stepped_once(psi0, g, basis, support, t, n)
        if 1.0 - abs(np.vdot(prev, cur)) ** 2 <= REFINE_TARGET:
            return _result(psi0, cur, basis, t, "stepped", n)
        prev = cur


def adiabatic_components(psi0, g, basis: FockBasis, atol: float = 1e-10) -> list[tuple]:
    """Split ``psi0`` over the labelled instantaneous eigenstates at ``phi = 0``.

    Returns ``(label, coefficient, vector)`` triples. Weight outside the
    singlets and the zero doublet raises :class:`PhysicsError`.
    """
    support = _check_initial(psi0, basis)
    angle = ModeAngle(g.theta, 0.0)
    parts = []
    for C in support:
        if C < 2:
            refs = [(("doublet", C), bimodal_fock_state(C, angle, basis))]
        else:
            refs = [(("singlet", C, s), singlet_state(C, s, angle, basis)) for s in (1, -1)]
        parts.extend((lab, complex(np.vdot(v, psi0)), v) for lab, v in refs)
    residual = psi0 - sum(c * v for _, c, v in parts)
    r = float(np.linalg.norm(residual))
    if r > atol:
        raise PhysicsError(
            f"initial state has weight outside the labelled eigenstates (residual norm {r:.3e})"
        )
    return parts


def evolve_adiabatic(psi0, g, basis: FockBasis) -> EvolutionResult:
    """Adiabatic state after one full cycle ``T``.

    Singlets pick up ``exp(-i E T) exp(i gamma)`` with the singlet-family
    phase. The zero doublet members live in degenerate zero-energy subspaces
    and are carried by the holonomy of those subspaces, which is the identity
    for the charge-0 and charge-1 blocks.
    """
    T = cycle_period(g)
    ratio = adiabaticity_ratio(g)
    if ratio >= 1.0:
        raise PhysicsError(f"|dnu/lambda|^2 = {ratio:.3g} >= 1: adiabatic approximation invalid")
    if ratio > 0.1:
        warnings.warn(f"|dnu/lambda|^2 = {ratio:.3g} > 0.1: adiabatic error may be large")
    psi0 = np.asarray(psi0, dtype=complex)
    psi = np.zeros_like(psi0)
    for label, c, v in adiabatic_components(psi0, g, basis):
        if label[0] == "singlet":
            _, N, s = label
            phase = -singlet_energy(g.lam, N, s) * T + berry_closed_form(N, g.theta, "singlet_N")
            psi += c * np.exp(1j * phase) * v
        else:
            C = label[1]
            sl = basis.block(C)
            F = zero_space_frame(g.theta, basis, C)
            W = zero_space_holonomy_closed(g.theta, basis, C)
            # the labelled member is the first frame vector
            psi[sl] += c * (F @ W[:, 0])
    return _result(psi0, psi, basis, T, "adiabatic")


def evolve(psi0, g, basis: FockBasis, method: str, t: float | None = None, steps: int | None = None) -> EvolutionResult:
    """Dispatch on ``method``; ``t`` defaults to one cycle."""
    if t is None:
        t = cycle_period(g)
    if method == "closed":
        return evolve_exact_closed(psi0, g, basis, t)
    if method == "stepped":
        return evolve_stepped(psi0, g, basis, t, steps)
    if method == "adiabatic":
        if not math.isclose(t, cycle_period(g), rel_tol=1e-12):
            raise PhysicsError("the adiabatic propagator is defined for one full cycle only")
        return evolve_adiabatic(psi0, g, basis)
    raise ValueError(f"unknown method {method!r}")
