"""Truncated two-mode boson x two-level spin Hilbert space.

States are ``(n_a, n_b, spin)`` with ``spin`` 0 for ``|->`` and 1 for ``|+>``
and ``n_a + n_b <= n_max``. They are ordered by the conserved charge
``C = n_a + n_b + 2*[spin=+]``, then ``n_a``, then ``spin``, so every charge
block is a contiguous slice of the basis.

Blocks with ``C <= n_max`` are complete. The two top blocks (``C = n_max+1``
and ``n_max+2``) only hold their spin-up part; operators silently drop
transitions that would leave the truncation, so results are exact only for
states supported on ``C <= n_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import factorial

import numpy as np

MINUS, PLUS = 0, 1


@dataclass(frozen=True)
class ModeAngle:
    """Mixing angle ``theta`` of the driven mode and loop phase ``phi``."""

    theta: float
    phi: float = 0.0

    @property
    def cos(self) -> float:
        return float(np.cos(self.theta))

    @property
    def sin(self) -> float:
        return float(np.sin(self.theta))


@dataclass(frozen=True)
class FockBasis:
    n_max: int
    states: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        states = [
            (na, n - na, s)
            for n in range(self.n_max + 1)
            for na in range(n + 1)
            for s in (MINUS, PLUS)
        ]
        states.sort(key=lambda st: (st[0] + st[1] + 2 * st[2], st[0], st[2]))
        object.__setattr__(self, "states", tuple(states))

    @property
    def dim(self) -> int:
        return len(self.states)

    @cached_property
    def index(self) -> dict:
        return {st: i for i, st in enumerate(self.states)}

    @cached_property
    def charges(self) -> np.ndarray:
        return np.array([na + nb + 2 * s for na, nb, s in self.states])

    @cached_property
    def _block_slices(self) -> dict:
        out = {}
        for i, c in enumerate(self.charges):
            c = int(c)
            start, _ = out.get(c, (i, i))
            out[c] = (start, i + 1)
        return {c: slice(*se) for c, se in out.items()}

    def block(self, charge: int) -> slice:
        """Slice of the basis holding charge ``charge``."""
        return self._block_slices[charge]

    @property
    def block_charges(self) -> list[int]:
        return sorted(self._block_slices)

    @property
    def exact_charges(self) -> list[int]:
        """Charges whose blocks are complete (``C <= n_max``)."""
        return list(range(self.n_max + 1))

    def basis_vector(self, na: int, nb: int, spin: int = MINUS) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[(na, nb, spin)]] = 1.0
        return v

    def support_charges(self, psi: np.ndarray, atol: float = 1e-14) -> list[int]:
        """Charges on which ``psi`` has non-negligible weight."""
        w = np.abs(psi) ** 2
        return sorted({int(c) for c in self.charges[w > atol]})


def ladder(mode: str, basis: FockBasis) -> np.ndarray:
    """Annihilation operator of mode ``'a'`` or ``'b'``."""
    if mode not in ("a", "b"):
        raise ValueError(f"unknown mode {mode!r}")
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, (na, nb, s) in enumerate(basis.states):
        if mode == "a" and na > 0:
            out[basis.index[(na - 1, nb, s)], j] = np.sqrt(na)
        elif mode == "b" and nb > 0:
            out[basis.index[(na, nb - 1, s)], j] = np.sqrt(nb)
    return out


def spin_op(kind: str, basis: FockBasis) -> np.ndarray:
    """``'sm'`` (sigma-minus), ``'sp'`` (sigma-plus) or ``'sz'`` on the full space."""
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, (na, nb, s) in enumerate(basis.states):
        if kind == "sz":
            out[j, j] = 1.0 if s == PLUS else -1.0
        elif kind == "sm" and s == PLUS:
            out[basis.index[(na, nb, MINUS)], j] = 1.0
        elif kind == "sp" and s == MINUS:
            out[basis.index[(na, nb, PLUS)], j] = 1.0
        elif kind not in ("sm", "sp", "sz"):
            raise ValueError(f"unknown spin operator {kind!r}")
    return out


def number_difference(basis: FockBasis) -> np.ndarray:
    """Diagonal of ``b^dag b - a^dag a``, the generator of the loop rotation."""
    return np.array([nb - na for na, nb, _ in basis.states], dtype=float)


def loop_rotation(phi: float, basis: FockBasis) -> np.ndarray:
    """Diagonal of ``exp(i phi (b^dag b - a^dag a))``.

    Conjugation by this operator maps the driven mode at loop phase 0 onto
    the one at ``phi``; at ``phi = 2 pi`` it is the identity.
    """
    return np.exp(1j * phi * number_difference(basis))


def rotated_mode(angle: ModeAngle, which: str, basis: FockBasis) -> np.ndarray:
    """Annihilator of the driven mode ``'A'`` or of its orthogonal partner ``'B'``.

    ``A = cos(theta) e^{i phi} a + sin(theta) e^{-i phi} b`` and
    ``B = -sin(theta) e^{i phi} a + cos(theta) e^{-i phi} b``, so that
    ``[A, B^dag] = 0`` and ``A^dag A + B^dag B = a^dag a + b^dag b``.
    """
    a = ladder("a", basis)
    b = ladder("b", basis)
    c, s = angle.cos, angle.sin
    ea, eb = np.exp(1j * angle.phi), np.exp(-1j * angle.phi)
    if which == "A":
        return c * ea * a + s * eb * b
    if which == "B":
        return -s * ea * a + c * eb * b
    raise ValueError(f"unknown rotated mode {which!r}")


def rotated_fock_state(
    n_A: int, n_B: int, angle: ModeAngle, basis: FockBasis, spin: int = MINUS
) -> np.ndarray:
    """``(A^dag)^n_A (B^dag)^n_B / sqrt(n_A! n_B!)`` applied to the vacuum."""
    if n_A < 0 or n_B < 0:
        raise ValueError("occupations must be non-negative")
    if n_A + n_B > basis.n_max:
        raise ValueError(
            f"n_A + n_B = {n_A + n_B} exceeds n_max = {basis.n_max}; amplitude would be truncated"
        )
    Ad = rotated_mode(angle, "A", basis).conj().T
    Bd = rotated_mode(angle, "B", basis).conj().T
    v = basis.basis_vector(0, 0, MINUS)
    for _ in range(n_A):
        v = Ad @ v
    for _ in range(n_B):
        v = Bd @ v
    v /= np.sqrt(factorial(n_A) * factorial(n_B))
    if spin == PLUS:
        v = spin_op("sp", basis) @ v
    return v


def bimodal_fock_state(N: int, angle: ModeAngle, basis: FockBasis, spin: int = MINUS) -> np.ndarray:
    """``|N>_phi``: N quanta in the driven mode, vacuum in its partner."""
    return rotated_fock_state(N, 0, angle, basis, spin=spin)


def conserved_charge(basis: FockBasis) -> np.ndarray:
    """``a^dag a + b^dag b + 2 sigma_+ sigma_-`` as a diagonal matrix."""
    return np.diag(basis.charges.astype(complex))
