"""Dense complex linear algebra for small Hilbert spaces (dim <= 16).

States are plain complex ndarrays of shape (dim,), matrices are (dim, dim).
Rays (projective states) get a small wrapper because they carry a canonical
gauge and a fidelity-based equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, NotHermitianError

HERMITICITY_RTOL = 1e-12
RAY_FIDELITY_TOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_state(amplitudes) -> np.ndarray:
    """Coerce to a normalized complex vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = np.linalg.norm(psi)
    if n == 0 or not np.isfinite(n):
        raise ValueError("state vector must be nonzero and finite")
    return psi / n


def require_hermitian(matrix: np.ndarray) -> np.ndarray:
    """Return the matrix if Hermitian within tolerance, else raise.

    Tolerance is relative: max|A - A^dagger| <= 1e-12 * max|A|.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotHermitianError("matrix has non-finite entries")
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return a
    dev = np.max(np.abs(a - a.conj().T))
    if dev > HERMITICITY_RTOL * scale:
        raise NotHermitianError(
            f"max |A - A^dagger| = {dev:.3e} exceeds {HERMITICITY_RTOL:.0e} * max|A| = "
            f"{HERMITICITY_RTOL * scale:.3e}"
        )
    return a


def overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-space inner product <a|b> (conjugate-linear in the first slot)."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"state dims differ: {a.shape[0]} vs {b.shape[0]}")
    return complex(np.vdot(a, b))


def canonical_gauge(psi: np.ndarray) -> np.ndarray:
    """Fix the global phase: largest-modulus component made real non-negative.

    Ties in modulus resolve to the lowest index, so the rule is deterministic
    and idempotent.
    """
    psi = as_state(psi)
    idx = int(np.argmax(np.abs(psi)))
    ph = psi[idx] / abs(psi[idx])
    return psi * np.conj(ph)


@dataclass(frozen=True)
class Ray:
    """A point of projective Hilbert space: a state modulo complex scale.

    The stored representative is in the canonical gauge, so two Rays built
    from lambda*psi and psi hold identical vectors (up to roundoff).
    Equality is fidelity-based: |<r1|r2>|^2 >= 1 - 1e-10.
    """

    vector: np.ndarray = field(repr=False)

    def __init__(self, amplitudes):
        object.__setattr__(self, "vector", canonical_gauge(amplitudes))

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def fidelity(self, other: "Ray") -> float:
        return abs(overlap(self.vector, other.vector)) ** 2

    def __eq__(self, other):
        if not isinstance(other, Ray):
            return NotImplemented
        if self.dim != other.dim:
            return False
        return self.fidelity(other) >= 1.0 - RAY_FIDELITY_TOL

    __hash__ = None  # fidelity equality is not hashable


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    values ascend; vectors[:, k] belongs to values[k]; gap is the minimum
    adjacent eigenvalue spacing (inf for dim 1). Callers that need a
    non-degenerate spectrum must check gap themselves.
    """

    values: np.ndarray
    vectors: np.ndarray
    gap: float

    def state(self, level: int) -> np.ndarray:
        return self.vectors[:, level].copy()

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def eigh(matrix: np.ndarray) -> EigenSystem:
    """Hermitian eigendecomposition, ascending eigenvalues.

    LAPACK's Hermitian solver is the stable workhorse here; dims are tiny,
    so there is nothing to gain from a custom kernel.
    """
    h = require_hermitian(matrix)
    values, vectors = np.linalg.eigh(h)
    values = values.real
    gap = float(np.min(np.diff(values))) if values.size > 1 else float("inf")
    return EigenSystem(values=values, vectors=vectors, gap=gap)


def expm_unitary(matrix: np.ndarray, dt: float, hbar: float = 1.0) -> np.ndarray:
    """U = exp(-i H dt / hbar) for Hermitian H, exactly unitary.

    Built from the eigendecomposition, so unitarity holds to roundoff
    regardless of dt (no series truncation).
    """
    es = eigh(matrix)
    phases = np.exp(-1j * es.values * (dt / hbar))
    return (es.vectors * phases) @ es.vectors.conj().T


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for normalized states."""
    return abs(overlap(a, b)) ** 2
