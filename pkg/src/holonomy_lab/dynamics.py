"""Closed-loop Schroedinger propagation and instantaneous eigenstate tracking.

A HamiltonianFamily maps a parameter point R to a Hermitian matrix H(R);
a ParameterLoop is a discretized closed path R(t). The propagator steps the
state with the exact exponential of the midpoint-frozen Hamiltonian, which
keeps the evolution exactly unitary and second-order accurate in the step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    GaugeObstructionError,
    NonFiniteStateError,
)
from .linalg import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    as_state,
    canonical_gauge,
    eigh,
    expm_unitary,
    overlap,
    require_hermitian,
)

GAP_TOL = 1e-8
OVERLAP_FLOOR = 0.1
DEFAULT_STEPS_PER_SEGMENT = 16
_CONSTRUCTION_PROBES = 32


class HamiltonianFamily:
    """Parameter-dependent Hermitian matrix H(R).

    Hermiticity of ``eval_fn`` is checked stochastically at construction
    (32 probe points from ``probe_sampler``, seeded and deterministic).
    """

    def __init__(self, dim: int, param_dim: int,
                 eval_fn: Callable[[np.ndarray], np.ndarray],
                 probe_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None,
                 label: str = "custom"):
        self.dim = int(dim)
        self.param_dim = int(param_dim)
        self._eval = eval_fn
        self.label = label
        rng = np.random.default_rng(0)
        sample = probe_sampler or (lambda r: r.standard_normal(self.param_dim))
        for _ in range(_CONSTRUCTION_PROBES):
            h = np.asarray(self._eval(np.atleast_1d(sample(rng))), dtype=complex)
            if h.shape != (self.dim, self.dim):
                raise DimensionMismatchError(
                    f"family {label!r} returned shape {h.shape}, expected {(self.dim, self.dim)}")
            require_hermitian(h)

    def __call__(self, point) -> np.ndarray:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return np.asarray(self._eval(point), dtype=complex)

    def eigensystem(self, point):
        return eigh(self(point))


def spin_half_in_field(hbar: float = 1.0) -> HamiltonianFamily:
    """H(b) = -(hbar/2) b . sigma; the parameter point is the field vector b."""

    def ev(b):
        return -0.5 * hbar * (b[0] * PAULI_X + b[1] * PAULI_Y + b[2] * PAULI_Z)

    return HamiltonianFamily(2, 3, ev, label="spin_half_in_field")


def diagonal_drift(base: Sequence[float], coupling) -> HamiltonianFamily:
    """Diagonal family diag(base + coupling @ R); eigenvectors never move."""
    base = np.asarray(base, dtype=float)
    coupling = np.atleast_2d(np.asarray(coupling, dtype=float))
    if coupling.shape[0] != base.shape[0]:
        raise DimensionMismatchError(
            f"coupling rows {coupling.shape[0]} != base length {base.shape[0]}")

    def ev(r):
        return np.diag(base + coupling @ r).astype(complex)

    return HamiltonianFamily(base.shape[0], coupling.shape[1], ev, label="diagonal_drift")


def user_matrix_table(knots: Sequence[float], matrices: Sequence) -> HamiltonianFamily:
    """Piecewise-linear interpolation of Hermitian matrices on a 1-D parameter."""
    knots = np.asarray(knots, dtype=float)
    mats = np.array([require_hermitian(m) for m in matrices])
    if knots.ndim != 1 or knots.size != len(mats) or knots.size < 2:
        raise DimensionMismatchError("need >= 2 knots, one matrix per knot")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")
    dim = mats.shape[1]
    lo, hi = knots[0], knots[-1]

    def ev(r):
        x = float(np.clip(r[0], lo, hi))
        j = int(np.clip(np.searchsorted(knots, x) - 1, 0, knots.size - 2))
        t = (x - knots[j]) / (knots[j + 1] - knots[j])
        return (1.0 - t) * mats[j] + t * mats[j + 1]

    def probe(rng):
        return np.array([rng.uniform(lo, hi)])

    return HamiltonianFamily(dim, 1, ev, probe_sampler=probe, label="user_matrix_table")


@dataclass(frozen=True)
class ParameterLoop:
    """Closed discretized path in parameter space.

    ``points`` holds N >= 3 stored points with the closing segment back to
    points[0] implicit (no duplicated endpoint). ``times`` has N+1 strictly
    increasing stamps, t_0 = 0 through t_N = T, covering the return segment.
    Consecutive stored points must differ; revisiting an earlier point later
    in the loop is allowed (back-and-forth excursions are legitimate loops).
    """

    points: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        ts = np.asarray(self.times, dtype=float)
        if pts.shape[0] < 3:
            raise ValueError(f"need >= 3 loop points, got {pts.shape[0]}")
        if ts.shape != (pts.shape[0] + 1,):
            raise ValueError(
                f"need {pts.shape[0] + 1} time stamps for {pts.shape[0]} points, got {ts.shape}")
        if ts[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("times must be strictly increasing")
        closed = np.vstack([pts, pts[:1]])
        if np.any(np.all(closed[1:] == closed[:-1], axis=1)):
            raise ValueError("consecutive loop points must be distinct (closure is implicit)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "times", ts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def period(self) -> float:
        return float(self.times[-1])

    def point(self, k: int) -> np.ndarray:
        return self.points[k % self.n_points]


def uniform_loop(points, period: float) -> ParameterLoop:
    """Loop with equally spaced time stamps over one period."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return ParameterLoop(pts, np.linspace(0.0, period, pts.shape[0] + 1))


@dataclass(frozen=True)
class EvolutionRecord:
    """States and instantaneous energies on the loop's time grid."""

    states: np.ndarray  # (N+1, dim), psi(t_k)
    energies: np.ndarray  # (N+1,), <psi|H|psi> at t_k
    loop: ParameterLoop
    initial_eigenindex: Optional[int] = None

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def propagate(family: HamiltonianFamily, loop: ParameterLoop, psi0,
              steps_per_segment: int = DEFAULT_STEPS_PER_SEGMENT,
              hbar: float = 1.0,
              initial_eigenindex: Optional[int] = None) -> EvolutionRecord:
    """Integrate i hbar dpsi/dt = H(R(t)) psi around the loop.

    Within each sub-step the parameter is frozen at the segment-midpoint
    value and the exact unitary exp(-i H dt / hbar) is applied, so the norm
    is conserved to roundoff and the phase error is O(dt^2).
    """
    psi = as_state(psi0)
    if psi.shape[0] != family.dim:
        raise DimensionMismatchError(
            f"state dim {psi.shape[0]} != family dim {family.dim}")
    if steps_per_segment < 1:
        raise ValueError("steps_per_segment must be >= 1")

    n = loop.n_points
    states = np.empty((n + 1, family.dim), dtype=complex)
    energies = np.empty(n + 1)
    states[0] = psi
    energies[0] = np.real(overlap(psi, family(loop.point(0)) @ psi))

    for j in range(n):
        a = loop.point(j)
        b = loop.point(j + 1)
        dt = (loop.times[j + 1] - loop.times[j]) / steps_per_segment
        for s in range(steps_per_segment):
            mid = a + ((s + 0.5) / steps_per_segment) * (b - a)
            psi = expm_unitary(family(mid), dt, hbar=hbar) @ psi
        if not np.all(np.isfinite(psi)):
            raise NonFiniteStateError(f"non-finite amplitudes after segment {j}")
        states[j + 1] = psi
        energies[j + 1] = np.real(overlap(psi, family(b) @ psi))

    return EvolutionRecord(states=states, energies=energies, loop=loop,
                           initial_eigenindex=initial_eigenindex)


def adiabatic_track(family: HamiltonianFamily, loop: ParameterLoop, level: int,
                    gap_tol: float = GAP_TOL) -> np.ndarray:
    """Instantaneous eigenvectors of the given level along the loop.

    Returns one state per stored loop point (no duplicated closure point),
    phase-chained into the parallel-transport gauge: <psi_k|psi_k+1> is real
    positive for consecutive points. The seam overlap <psi_N|psi_1> carries
    the holonomy and is deliberately left alone.
    """
    states = np.empty((loop.n_points, family.dim), dtype=complex)
    for k in range(loop.n_points):
        es = family.eigensystem(loop.point(k))
        if es.values.size > 1:
            gaps = np.diff(es.values)
            lo = gaps[level - 1] if level > 0 else np.inf
            hi = gaps[level] if level < es.values.size - 1 else np.inf
            if min(lo, hi) < gap_tol:
                raise DegenerateSpectrumError(
                    f"gap {min(lo, hi):.3e} < {gap_tol:.0e} at loop point {k}")
        v = es.state(level)
        if k == 0:
            states[0] = canonical_gauge(v)
            continue
        ov = overlap(states[k - 1], v)
        if abs(ov) < OVERLAP_FLOOR:
            raise GaugeObstructionError(
                f"consecutive eigenvector overlap |{abs(ov):.3f}| < {OVERLAP_FLOOR} "
                f"between points {k - 1} and {k}; refine the loop")
        states[k] = v * np.conj(ov / abs(ov))
    return states
