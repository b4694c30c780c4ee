"""Qubit-level linear algebra: Pauli operators, basis states, entropy.

Everything operates on small dense complex arrays (2x2 single-qubit
operators, 4x4 two-qubit operators) in double precision.  The Pauli
convention is fixed once here; every correlation sign downstream depends
on it, so do not change it without re-deriving the cross-basis
probability tables.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_ATOL = 1e-12

BASES = ("X", "Y", "Z")

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
ID4 = np.eye(4, dtype=complex)

_PAULI = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

_SQRT_HALF = 1.0 / np.sqrt(2.0)


def pauli(axis: str) -> np.ndarray:
    """Return the standard 2x2 Pauli matrix for axis ``'X'``, ``'Y'`` or ``'Z'``."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of {BASES}") from None


def eigenstate(basis: str, bit: int) -> np.ndarray:
    """Eigenvector of ``pauli(basis)`` with eigenvalue +1 (bit 0) or -1 (bit 1).

    Returns a unit-norm length-2 complex vector.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    sign = 1.0 - 2.0 * bit
    if basis == "Z":
        return np.array([1.0, 0.0], dtype=complex) if bit == 0 else np.array([0.0, 1.0], dtype=complex)
    if basis == "X":
        return np.array([_SQRT_HALF, sign * _SQRT_HALF], dtype=complex)
    if basis == "Y":
        return np.array([_SQRT_HALF, sign * 1.0j * _SQRT_HALF], dtype=complex)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def frame_rotation(beta: float) -> np.ndarray:
    """Unitary mapping the sender's frame to a receiver frame misaligned by ``beta``.

    The rotation acts about the shared Z direction, so Z eigenstates pick up
    only a global phase while the X and Y eigenbases rotate into each other.
    """
    return np.array([[1.0, 0.0], [0.0, np.exp(1.0j * beta)]], dtype=complex)


def rotated_eigenstate(basis: str, bit: int, beta: float) -> np.ndarray:
    """Receiver-frame eigenstate: ``frame_rotation(beta) @ eigenstate(basis, bit)``."""
    return frame_rotation(beta) @ eigenstate(basis, bit)


def projector(ket: np.ndarray) -> np.ndarray:
    """Rank-one projector |ket><ket|."""
    return np.outer(ket, ket.conj())


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two 2x2 operators, giving a 4x4 two-qubit operator."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError(f"tensor expects 2x2 factors, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - m.conj().T)) <= atol)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy h(x) in bits, with the 0*log(0) = 0 convention."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))
