"""Dense linear algebra layer: eigendecomposition, exact unitaries, rays."""

import numpy as np
import pytest

from holonomy_lab.errors import DimensionMismatchError, NotHermitianError
from holonomy_lab.linalg import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Ray,
    canonical_gauge,
    eigh,
    expm_unitary,
    overlap,
)


def _series_expm(h, dt, terms=60):
    """Power-series oracle for exp(-i H dt), independent of eigh."""
    acc = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ (-1j * dt * h) / k
        acc = acc + term
    return acc


def _char_poly_eigvals_2x2(h):
    """Roots of the characteristic polynomial, independent of eigh."""
    tr = np.trace(h)
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    roots = np.roots([1.0, -tr, det])
    return np.sort(roots.real)


class TestEigh:
    def test_diagonal(self):
        es = eigh(np.diag([0.0, 1.0]).astype(complex))
        assert np.allclose(es.values, [0.0, 1.0])
        assert np.allclose(np.abs(es.vectors), np.eye(2))

    def test_pauli_x_spectrum(self):
        es = eigh(PAULI_X)
        assert np.allclose(es.values, [-1.0, 1.0])

    def test_field_dot_sigma_against_char_poly(self):
        b = np.array([1.2, -0.8, 1.3265649146323562])
        b = 2.0 * b / np.linalg.norm(b)
        h = b[0] * PAULI_X + b[1] * PAULI_Y + b[2] * PAULI_Z
        es = eigh(h)
        assert np.allclose(es.values, [-2.0, 2.0], atol=1e-12)
        assert np.allclose(es.values, _char_poly_eigvals_2x2(h), atol=1e-10)

    def test_residual_and_orthonormality(self):
        rng = np.random.default_rng(7)
        for dim in (2, 5, 16):
            a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            h = (a + a.conj().T) / 2
            es = eigh(h)
            scale = np.max(np.abs(h))
            res = np.max(np.abs(h @ es.vectors - es.vectors * es.values))
            assert res <= 1e-9 * scale
            gram = es.vectors.conj().T @ es.vectors
            assert np.max(np.abs(gram - np.eye(dim))) <= 1e-9
            assert np.max(np.abs(es.reconstruct() - h)) <= 1e-9 * scale

    def test_values_ascend_and_gap(self):
        es = eigh(np.diag([3.0, -1.0, 0.5]).astype(complex))
        assert np.all(np.diff(es.values) >= 0)
        assert es.gap == pytest.approx(1.5)

    def test_not_hermitian_rejected(self):
        with pytest.raises(NotHermitianError):
            eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatchError):
            eigh(np.zeros((2, 3)))


class TestExpmUnitary:
    def test_zero_hamiltonian(self):
        assert np.allclose(expm_unitary(np.zeros((3, 3)), 0.7), np.eye(3))

    def test_diagonal_phases(self):
        e = np.array([0.3, -1.1, 2.0])
        u = expm_unitary(np.diag(e).astype(complex), 0.9)
        assert np.allclose(np.diag(u), np.exp(-1j * e * 0.9), atol=1e-12)

    def test_pauli_x_half_period_vs_series(self):
        u = expm_unitary(PAULI_X, np.pi)
        assert np.max(np.abs(u - (-np.eye(2)))) <= 1e-10
        assert np.max(np.abs(u - _series_expm(PAULI_X, np.pi))) <= 1e-10

    def test_unitary_within_tolerance(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = (a + a.conj().T) / 2
        u = expm_unitary(h, 2.37)
        assert np.max(np.abs(u.conj().T @ u - np.eye(6))) <= 1e-10

    def test_group_property(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            h = (a + a.conj().T) / 2
            s, t = rng.uniform(-1, 1, 2)
            lhs = expm_unitary(h, s + t)
            rhs = expm_unitary(h, s) @ expm_unitary(h, t)
            assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def test_hbar_scaling(self):
        u1 = expm_unitary(PAULI_Z, 1.0, hbar=2.0)
        u2 = expm_unitary(PAULI_Z, 0.5, hbar=1.0)
        assert np.allclose(u1, u2, atol=1e-14)


class TestOverlap:
    def test_basis_cases(self):
        e0, e1 = np.eye(2)
        assert overlap(e0, e0) == pytest.approx(1.0)
        assert overlap(e0, e1) == pytest.approx(0.0)
        plus = (e0 + e1) / np.sqrt(2)
        assert overlap(e0, plus) == pytest.approx(1 / np.sqrt(2))

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert overlap(a, b) == pytest.approx(np.conj(overlap(b, a)))

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            overlap(np.ones(2), np.ones(3))


class TestRay:
    def test_scale_invariance_bulk(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            dim = rng.integers(2, 6)
            psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            lam = (rng.standard_normal() + 1j * rng.standard_normal())
            if abs(lam) < 1e-3:
                lam += 1.0
            r1, r2 = Ray(psi), Ray(lam * psi)
            assert r1 == r2
            assert np.allclose(r1.vector, r2.vector, atol=1e-12)

    def test_canonicalization_idempotent(self):
        psi = np.array([0.3 - 0.4j, 0.5 + 0.2j, -0.1j])
        once = canonical_gauge(psi)
        twice = canonical_gauge(once)
        assert np.allclose(once, twice, atol=1e-15)
        idx = np.argmax(np.abs(once))
        assert once[idx].imag == pytest.approx(0.0, abs=1e-15)
        assert once[idx].real > 0

    def test_distinct_rays_unequal(self):
        assert Ray([1.0, 0.0]) != Ray([0.0, 1.0])

    def test_fidelity_threshold(self):
        a = Ray([1.0, 0.0])
        far = Ray([np.sqrt(1 - 1e-8), 1e-4])  # fidelity 1 - 1e-8: distinct
        assert a != far
        near = Ray([np.sqrt(1 - 1e-12), 1e-6])  # fidelity 1 - 1e-12: same ray
        assert a == near
