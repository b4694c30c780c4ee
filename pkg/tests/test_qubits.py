import numpy as np
import pytest

from rfiqkd import qubits


def test_pauli_z_is_diag_plus_minus():
    assert np.allclose(qubits.pauli("Z"), np.diag([1.0, -1.0]))


def test_pauli_involution_and_orthogonality():
    for axis in qubits.BASES:
        p = qubits.pauli(axis)
        assert np.allclose(p @ p, np.eye(2))
        assert abs(np.trace(p)) < 1e-15
    assert abs(np.trace(qubits.pauli("X") @ qubits.pauli("Y"))) < 1e-15


def test_pauli_rejects_unknown_axis():
    with pytest.raises(ValueError):
        qubits.pauli("W")


def test_eigenstates_are_eigenvectors():
    for basis in qubits.BASES:
        for bit in (0, 1):
            v = qubits.eigenstate(basis, bit)
            assert abs(np.vdot(v, v) - 1.0) < 1e-12
            assert np.allclose(qubits.pauli(basis) @ v, (1 - 2 * bit) * v)


def test_eigenstate_examples():
    assert np.allclose(qubits.eigenstate("Z", 0), [1.0, 0.0])
    # mutually unbiased bases
    assert abs(abs(np.vdot(qubits.eigenstate("X", 0), qubits.eigenstate("Z", 0))) ** 2 - 0.5) < 1e-12
    # orthogonality within a basis
    assert abs(np.vdot(qubits.eigenstate("Y", 0), qubits.eigenstate("Y", 1))) < 1e-12


def test_eigenstate_completeness():
    for prep in qubits.BASES:
        for i in (0, 1):
            a = qubits.eigenstate(prep, i)
            for meas in qubits.BASES:
                total = sum(
                    abs(np.vdot(a, qubits.eigenstate(meas, j))) ** 2 for j in (0, 1)
                )
                assert abs(total - 1.0) < 1e-12


def test_tensor_identity_and_bell_correlations():
    bell = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)
    rho = np.outer(bell, bell.conj())
    assert np.allclose(qubits.tensor(qubits.ID2, qubits.ID2), np.eye(4))
    zz = qubits.tensor(qubits.pauli("Z"), qubits.pauli("Z"))
    yy = qubits.tensor(qubits.pauli("Y"), qubits.pauli("Y"))
    assert abs(np.trace(zz @ rho).real - 1.0) < 1e-12
    # the shared reference state anti-correlates the Y axes
    assert abs(np.trace(yy @ rho).real + 1.0) < 1e-12


def test_tensor_dimension_mismatch():
    with pytest.raises(ValueError):
        qubits.tensor(np.eye(4), np.eye(2))


def test_tensor_hermitian_and_trace_product():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        a = a + a.conj().T
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = b + b.conj().T
        t = qubits.tensor(a, b)
        assert qubits.is_hermitian(t, atol=1e-10)
        assert abs(np.trace(t) - np.trace(a) * np.trace(b)) < 1e-12


def test_binary_entropy_values():
    assert qubits.binary_entropy(0.5) == 1.0
    assert qubits.binary_entropy(0.0) == 0.0
    assert qubits.binary_entropy(1.0) == 0.0
    # frozen from a 50-digit mpmath evaluation of -x*log2(x)-(1-x)*log2(1-x)
    assert abs(qubits.binary_entropy(0.11) - 0.499915958164528) < 1e-15


def test_binary_entropy_symmetry():
    for x in np.linspace(0.0, 1.0, 1000):
        assert abs(qubits.binary_entropy(x) - qubits.binary_entropy(1.0 - x)) < 1e-12


def test_binary_entropy_domain():
    with pytest.raises(ValueError):
        qubits.binary_entropy(-0.01)
    with pytest.raises(ValueError):
        qubits.binary_entropy(1.01)


def test_rotated_eigenstate_overlap():
    # receiver X measured against sender X at 45 degrees of misalignment
    a = qubits.eigenstate("X", 0)
    c = qubits.rotated_eigenstate("X", 0, np.pi / 4)
    assert abs(abs(np.vdot(a, c)) ** 2 - np.cos(np.pi / 8) ** 2) < 1e-12
