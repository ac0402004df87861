"""Interaction-picture Hamiltonian, its rotating-frame generator and spectra.

With ``hbar = 1`` the loop-phase Hamiltonian is

    H(phi) = -lam [ (A_phi^dag)^2 sigma_- + A_phi^2 sigma_+ ],
    A_phi^dag = cos(theta) e^{-i phi} a^dag + sin(theta) e^{i phi} b^dag,

and the time dependence enters only through ``phi = dnu t / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from anisotrap.fockspace import (
    MINUS,
    PLUS,
    FockBasis,
    ModeAngle,
    bimodal_fock_state,
    ladder,
    number_difference,
    spin_op,
)
from anisotrap.numerics import hermitian_eig

LABEL_OVERLAP = 0.99


@lru_cache(maxsize=32)
def _raising_terms(n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``a^dag^2 s_-``, ``a^dag b^dag s_-``, ``b^dag^2 s_-`` on ``FockBasis(n_max)``."""
    basis = FockBasis(n_max)
    ad = ladder("a", basis).conj().T
    bd = ladder("b", basis).conj().T
    sm = spin_op("sm", basis)
    out = (ad @ ad @ sm, ad @ bd @ sm, bd @ bd @ sm)
    for m in out:
        m.setflags(write=False)
    return out


def loop_terms(lam: float, theta: float, basis: FockBasis, charge: int | None = None):
    """Fourier pieces of the loop Hamiltonian: ``H(phi) = Hc + e^{-2i phi} K + e^{2i phi} K^dag``.

    Restricted to one charge block when ``charge`` is given.
    """
    xaa, xab, xbb = _raising_terms(basis.n_max)
    c, s = np.cos(theta), np.sin(theta)
    P = -lam * c * c * xaa
    Q = -lam * 2.0 * c * s * xab
    R = -lam * s * s * xbb
    K = P + R.conj().T
    Hc = Q + Q.conj().T
    if charge is not None:
        sl = basis.block(charge)
        K, Hc = K[sl, sl], Hc[sl, sl]
    return Hc, K


def _h_phi(lam: float, theta: float, basis: FockBasis, phi: float, charge: int | None = None) -> np.ndarray:
    Hc, K = loop_terms(lam, theta, basis, charge)
    z = np.exp(-2j * phi)
    return Hc + z * K + np.conj(z) * K.conj().T


def build_H_phi(g, basis: FockBasis, phi: float) -> np.ndarray:
    """Loop-phase Hamiltonian at ``phi`` on the full truncated space."""
    return _h_phi(g.lam, g.theta, basis, phi)


def build_H_t(g, basis: FockBasis, t: float) -> np.ndarray:
    """Interaction-picture Hamiltonian at time ``t`` (``phi = dnu t / 2``)."""
    return build_H_phi(g, basis, g.dnu * t / 2.0)


def build_H_eff(g, basis: FockBasis) -> np.ndarray:
    """Time-independent generator in the frame co-rotating with the loop.

    ``psi(t) = R(phi(t)) exp(-i H_eff t) psi(0)`` with
    ``R(phi) = exp(i phi (b^dag b - a^dag a))``.
    """
    return build_H_phi(g, basis, 0.0) + np.diag(0.5 * g.dnu * number_difference(basis))


@dataclass(frozen=True)
class SpectrumEntry:
    energy: float
    vector: np.ndarray
    label: tuple | None
    charge: int


def singlet_state(N: int, sign: int, angle: ModeAngle, basis: FockBasis) -> np.ndarray:
    """``(|N>_phi|-> - sign |N-2>_phi|+>) / sqrt(2)``, energy ``sign * lam sqrt(N(N-1))``."""
    if N < 2:
        raise ValueError("singlets need N >= 2")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    up = bimodal_fock_state(N, angle, basis, spin=MINUS)
    down = bimodal_fock_state(N - 2, angle, basis, spin=PLUS)
    return (up - sign * down) / np.sqrt(2.0)


def singlet_energy(lam: float, N: int, sign: int) -> float:
    return sign * lam * np.sqrt(N * (N - 1.0))


def analytic_spectrum(g, basis: FockBasis, phi: float, N_list) -> list[SpectrumEntry]:
    """Closed-form eigenpairs of the driven-mode family.

    ``N >= 2`` gives the two singlets (minus first); ``N`` in {0, 1} gives the
    corresponding zero-energy doublet member ``|N>_phi|->``.
    """
    angle = ModeAngle(g.theta, phi)
    out = []
    for N in N_list:
        if N < 0 or N > basis.n_max:
            raise ValueError(f"N = {N} outside 0..n_max = {basis.n_max}")
        if N < 2:
            vec = bimodal_fock_state(N, angle, basis)
            out.append(SpectrumEntry(0.0, vec, ("doublet", N), N))
            continue
        for sign in (-1, 1):
            out.append(
                SpectrumEntry(
                    singlet_energy(g.lam, N, sign),
                    singlet_state(N, sign, angle, basis),
                    ("singlet", N, sign),
                    N,
                )
            )
    return out


def align_cluster(V: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Rotate the orthonormal columns of ``V`` (a degenerate eigenspace) so the
    first column is the normalized projection of ``target``."""
    coeff = V.conj().T @ target
    norm = np.linalg.norm(coeff)
    if norm == 0 or V.shape[1] == 1:
        return V
    first = coeff / norm
    # complete to a unitary: QR of [first, I] keeps first as the leading column up to phase
    M = np.column_stack([first, np.eye(len(first), dtype=complex)])
    Qm, _ = np.linalg.qr(M)
    Qm[:, 0] *= np.vdot(Qm[:, 0], first) / abs(np.vdot(Qm[:, 0], first))
    return V @ Qm[:, : V.shape[1]]


def clusters(w: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group ascending eigenvalues into runs closer than ``tol``."""
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= tol:
            cur.append(i)
        else:
            groups.append(np.array(cur))
            cur = [i]
    groups.append(np.array(cur))
    return groups


def numeric_spectrum(g, basis: FockBasis, phi: float, degeneracy_tol: float = 1e-9) -> list[SpectrumEntry]:
    """Blockwise diagonalization over the complete charge blocks.

    Each eigenvector is labelled with the analytic family member it matches
    (overlap^2 > 0.99). Inside degenerate clusters the basis is first rotated
    onto the analytic vector. Everything else is left unlabelled.
    """
    scale = max(abs(g.lam), 1e-300)
    out = []
    for C in basis.exact_charges:
        sl = basis.block(C)
        w, V = hermitian_eig(_h_phi(g.lam, g.theta, basis, phi, C))
        refs = analytic_spectrum(g, basis, phi, [C])
        labels = [None] * len(w)
        for grp in clusters(w, degeneracy_tol * scale):
            for ref in refs:
                if abs(w[grp].mean() - ref.energy) > 1e3 * degeneracy_tol * scale:
                    continue
                Vg = align_cluster(V[:, grp], ref.vector[sl])
                V[:, grp] = Vg
                ov = abs(np.vdot(ref.vector[sl], Vg[:, 0])) ** 2
                if ov > LABEL_OVERLAP:
                    labels[grp[0]] = ref.label
        for i in range(len(w)):
            full = np.zeros(basis.dim, dtype=complex)
            full[sl] = V[:, i]
            out.append(SpectrumEntry(float(w[i]), full, labels[i], C))
    return out
