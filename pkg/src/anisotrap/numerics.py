"""Dense complex linear algebra used throughout the package.

Matrices and vectors are plain ``numpy`` arrays of dtype ``complex128``.
Eigendecomposition is delegated to LAPACK through :func:`numpy.linalg.eigh`;
everything else here is thin contract checking around it.
"""

from __future__ import annotations

import numpy as np

from anisotrap.errors import HermiticityError

HERMITIAN_ATOL = 1e-12


def max_asymmetry(H: np.ndarray) -> float:
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def check_hermitian(H: np.ndarray, atol: float = HERMITIAN_ATOL) -> None:
    """Raise :class:`HermiticityError` unless ``H`` is square and Hermitian.

    The tolerance is absolute for matrices of norm <= 1 and scales with the
    largest entry otherwise, so physical-unit Hamiltonians (rad/s) are not
    rejected for rounding noise.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise HermiticityError(f"expected a non-empty square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))))
    asym = max_asymmetry(H)
    if asym > atol * scale:
        raise HermiticityError(f"matrix is not Hermitian: max |H - H^dagger| = {asym:.3e}")


def hermitian_eig(H: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of ``H``."""
    H = np.asarray(H, dtype=complex)
    if check:
        check_hermitian(H)
    return np.linalg.eigh(H)


def unitary_exp(H: np.ndarray, s: float, check: bool = True) -> np.ndarray:
    """Return ``exp(-i H s)`` for Hermitian ``H``."""
    w, V = hermitian_eig(H, check=check)
    return (V * np.exp(-1j * w * s)) @ V.conj().T


def batched_unitary_exp(H: np.ndarray, s: float) -> np.ndarray:
    """``exp(-i H[k] s)`` for a stack of Hermitian matrices of shape (K, d, d)."""
    w, V = np.linalg.eigh(H)
    return np.einsum("kij,kj,klj->kil", V, np.exp(-1j * w * s), V.conj())


def overlap(u: np.ndarray, v: np.ndarray) -> complex:
    """``<u|v>``, conjugating the first argument."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return complex(np.vdot(u, v))


def fidelity(u: np.ndarray, v: np.ndarray) -> float:
    return abs(overlap(u, v)) ** 2


def wrap_phase(x):
    """Reduce angles to (-pi, pi].

    Values within 1e-12 of either end are reported as exactly +pi, so that
    a half turn prints the same regardless of rounding direction.
    """
    y = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)
    y = np.where(np.abs(y) >= np.pi - 1e-12, np.pi, y)
    return float(y) if y.ndim == 0 else y


def phase_distance(x, y) -> float:
    """Circular distance between two angles."""
    return float(abs(np.angle(np.exp(1j * (np.asarray(x) - np.asarray(y))))))
