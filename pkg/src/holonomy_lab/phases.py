"""Cyclic-evolution phase extraction and quantum-bundle holonomy.

Four routes to the geometric phase, kept deliberately independent so they
can cross-check each other:

- decompose_phase: total minus dynamical phase of a recorded evolution
  (the non-adiabatic total-minus-dynamical split).
- bargmann_holonomy: -arg of the chained overlap product of a closed list
  of states; manifestly gauge invariant.
- horizontal_lift: explicit lift with <phi_k|phi_k+1> real positive; the
  return-to-fiber phase. Algebraically identical to the Bargmann product,
  implemented via actual state vectors as a mutual check.
- connection_integral: trapezoid line integral of the finite-difference
  connection along the loop, in a fixed-reference-component gauge.

Sign convention: a spin-1/2 aligned state carried counterclockwise (seen
from +z) around an equatorial field loop reports -pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import GAP_TOL, OVERLAP_FLOOR, EvolutionRecord, HamiltonianFamily, ParameterLoop
from .errors import (
    DegenerateOverlapError,
    DegenerateSpectrumError,
    GaugeObstructionError,
    OpenLoopError,
)
from .linalg import as_state, overlap

CLOSURE_TOL = 1.0 - 1e-6
_GAUGE_COMPONENT_FLOOR = 0.05


def principal(angle: float) -> float:
    """Reduce an angle to the branch (-pi, pi]."""
    return float(-((np.pi - angle) % (2.0 * np.pi) - np.pi))


def circular_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle (mod 2 pi)."""
    return abs(principal(a - b))


@dataclass(frozen=True)
class PhaseDecomposition:
    """total = dynamical + geometric (mod 2 pi) for one cyclic evolution."""

    total: float  # (-pi, pi]
    dynamical: float  # unwrapped
    geometric: float  # (-pi, pi]
    closure_fidelity: float


@dataclass(frozen=True)
class ConnectionSample:
    """Connection covector and curvature at one parameter point.

    berry_potential is i<psi|grad psi> in the fixed-reference-component
    gauge (real by construction; realness_residual records the part that
    should vanish). curvature is antisymmetric over parameter-plane pairs.
    """

    point: np.ndarray
    berry_potential: np.ndarray
    curvature: np.ndarray
    realness_residual: float
    step: float
    gauge_index: int
    curvature_method: str


@dataclass(frozen=True)
class HolonomyReport:
    geometric_phase: float  # (-pi, pi]
    method: str  # adiabatic_split | horizontal_lift | bargmann_product | connection_integral
    discretization: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def decompose_phase(record: EvolutionRecord, hbar: float = 1.0,
                    closure_tol: float = CLOSURE_TOL) -> PhaseDecomposition:
    """Split the phase of a cyclic evolution into dynamical and geometric parts.

    total = arg<psi(0)|psi(T)>; dynamical = -(1/hbar) integral of <H> by the
    trapezoidal rule on the recorded grid; geometric is their principal-value
    difference. Raises OpenLoop when the evolution is not cyclic in ray space.
    """
    ov = overlap(record.initial, record.final)
    fid = abs(ov) ** 2
    if fid < closure_tol:
        raise OpenLoopError(
            f"closure fidelity {fid:.9f} < {closure_tol:.9f}: evolution is not "
            "cyclic in ray space (increase T or refine the loop)")
    total = float(np.angle(ov))
    dynamical = float(-np.trapezoid(record.energies, record.loop.times) / hbar)
    return PhaseDecomposition(
        total=principal(total),
        dynamical=dynamical,
        geometric=principal(total - dynamical),
        closure_fidelity=float(fid),
    )


def _chain_overlaps(states, closed):
    n = len(states)
    pairs = range(n) if closed else range(n - 1)
    for k in pairs:
        yield k, overlap(states[k], states[(k + 1) % n])


def bargmann_holonomy(states: Sequence[np.ndarray], closed: bool = True) -> HolonomyReport:
    """Discrete holonomy -arg prod_k <s_k|s_k+1> of a chain of states.

    Invariant under any per-state phase change; each factor is normalized
    to unit modulus before multiplying so long chains cannot underflow.
    """
    states = [as_state(s) for s in states]
    if len(states) < 3:
        raise DegenerateOverlapError(f"need >= 3 states, got {len(states)}")
    acc = 1.0 + 0.0j
    min_ov = 1.0
    fs_err = 0.0
    for k, z in _chain_overlaps(states, closed):
        m = abs(z)
        if m < OVERLAP_FLOOR:
            raise DegenerateOverlapError(
                f"overlap modulus {m:.3f} < {OVERLAP_FLOOR} between states {k} "
                f"and {(k + 1) % len(states)}; refine the path")
        min_ov = min(min_ov, m)
        fs_err += np.arccos(min(1.0, m)) ** 3
        acc *= z / m
    gamma = principal(-np.angle(acc))
    return HolonomyReport(
        geometric_phase=gamma,
        method="bargmann_product",
        discretization={"n_states": len(states), "closed": closed},
        diagnostics={"min_overlap": min_ov,
                     "estimated_error": fs_err / 6.0 + 1e-13 * len(states)},
    )


def horizontal_lift(states: Sequence[np.ndarray], closed: bool = True) -> HolonomyReport:
    """Holonomy via an explicit horizontal lift of the state chain.

    Each state is re-phased so consecutive lifted overlaps are real positive
    (the discrete <phi|dphi> = 0 rule); the phase of the lift's return to the
    initial fiber is the holonomy. Must match bargmann_holonomy to 1e-12.
    """
    states = [as_state(s) for s in states]
    if len(states) < 3:
        raise DegenerateOverlapError(f"need >= 3 states, got {len(states)}")
    lift = [states[0]]
    chain = states + [states[0]] if closed else states
    min_ov = 1.0
    for k in range(1, len(chain)):
        ov = overlap(lift[-1], chain[k])
        m = abs(ov)
        if m < OVERLAP_FLOOR:
            raise DegenerateOverlapError(
                f"overlap modulus {m:.3f} < {OVERLAP_FLOOR} at lift step {k}")
        min_ov = min(min_ov, m)
        lift.append(chain[k] * np.conj(ov / m))
    gamma = principal(float(np.angle(overlap(states[0], lift[-1]))))
    return HolonomyReport(
        geometric_phase=gamma,
        method="horizontal_lift",
        discretization={"n_states": len(states), "closed": closed},
        diagnostics={"min_overlap": min_ov, "estimated_error": 1e-12},
    )


def _gauged_eigvec(family, point, level, gauge_index, gap_tol):
    es = family.eigensystem(point)
    if es.values.size > 1:
        gaps = np.diff(es.values)
        lo = gaps[level - 1] if level > 0 else np.inf
        hi = gaps[level] if level < es.values.size - 1 else np.inf
        if min(lo, hi) < gap_tol:
            raise DegenerateSpectrumError(
                f"gap {min(lo, hi):.3e} < {gap_tol:.0e} at point {point}")
    v = es.state(level)
    comp = v[gauge_index]
    if abs(comp) < _GAUGE_COMPONENT_FLOOR:
        raise GaugeObstructionError(
            f"reference component {gauge_index} has modulus {abs(comp):.3f} "
            f"< {_GAUGE_COMPONENT_FLOOR} at point {point}; gauge ill-conditioned")
    return v * np.conj(comp / abs(comp))


def berry_connection(family: HamiltonianFamily, point, level: int,
                     h: Optional[float] = None,
                     gauge_index: Optional[int] = None,
                     curvature_method: str = "plaquette",
                     gap_tol: float = GAP_TOL) -> ConnectionSample:
    """Connection covector and curvature at a parameter point.

    The potential comes from central finite differences of the eigenvector
    with every probe fixed to the same reference-component gauge. Curvature
    defaults to the gauge-free plaquette link-phase method; the
    antisymmetrized derivative of the potential is available for
    cross-checks via curvature_method="finite_difference".
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    p = point.size
    if h is None:
        h = 1e-3 * max(float(np.linalg.norm(point)), 1.0)
    es = family.eigensystem(point)
    if gauge_index is None:
        gauge_index = int(np.argmax(np.abs(es.state(level))))

    def gv(pt):
        return _gauged_eigvec(family, pt, level, gauge_index, gap_tol)

    v0 = gv(point)
    eye = np.eye(p)
    potential = np.zeros(p)
    residual = 0.0
    for i in range(p):
        dv = (gv(point + h * eye[i]) - gv(point - h * eye[i])) / (2.0 * h)
        a_i = 1j * overlap(v0, dv)
        potential[i] = a_i.real
        residual = max(residual, abs(a_i.imag))

    curvature = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            if curvature_method == "plaquette":
                f = _plaquette_curvature(family, point, level, h, eye[i], eye[j], gap_tol)
            elif curvature_method == "finite_difference":
                f = _fd_curvature(gv, point, h, eye[i], eye[j], i, j)
            else:
                raise ValueError(f"unknown curvature method {curvature_method!r}")
            curvature[i, j] = f
            curvature[j, i] = -f
    return ConnectionSample(point=point, berry_potential=potential,
                            curvature=curvature, realness_residual=residual,
                            step=h, gauge_index=gauge_index,
                            curvature_method=curvature_method)


def _plaquette_curvature(family, point, level, h, ei, ej, gap_tol):
    """Link-phase product around a centered plaquette, divided by its area.

    Gauge-free: per-corner phases cancel in the closed product.
    """
    def raw(pt):
        es = family.eigensystem(pt)
        if es.gap < gap_tol:
            raise DegenerateSpectrumError(
                f"gap {es.gap:.3e} < {gap_tol:.0e} at plaquette corner {pt}")
        return es.state(level)

    c1 = raw(point - 0.5 * h * ei - 0.5 * h * ej)
    c2 = raw(point + 0.5 * h * ei - 0.5 * h * ej)
    c3 = raw(point + 0.5 * h * ei + 0.5 * h * ej)
    c4 = raw(point - 0.5 * h * ei + 0.5 * h * ej)
    prod = (overlap(c1, c2) * overlap(c2, c3) * overlap(c3, c4) * overlap(c4, c1))
    return float(-np.angle(prod) / h ** 2)


def _fd_curvature(gv, point, h, ei, ej, i, j):
    """F_ij = d_i A_j - d_j A_i from the gauged potential at offset points."""
    def a_component(pt, comp_dir):
        vp = gv(pt + h * comp_dir)
        vm = gv(pt - h * comp_dir)
        v0 = gv(pt)
        return float(np.real(1j * overlap(v0, (vp - vm) / (2.0 * h))))

    daj_di = (a_component(point + h * ei, ej) - a_component(point - h * ei, ej)) / (2.0 * h)
    dai_dj = (a_component(point + h * ej, ei) - a_component(point - h * ej, ei)) / (2.0 * h)
    return daj_di - dai_dj


def connection_integral(family: HamiltonianFamily, loop: ParameterLoop, level: int,
                        h: Optional[float] = None,
                        gap_tol: float = GAP_TOL) -> HolonomyReport:
    """Trapezoid line integral of the connection covector around the loop.

    A single reference component (the one whose eigenvector modulus stays
    largest along the whole loop) fixes the gauge globally, so the sampled
    potential is smooth along the loop and the closed integral is the
    holonomy up to an integer number of 2 pi (reported unwrapped in the
    diagnostics, reduced in geometric_phase).
    """
    n = loop.n_points
    vecs = [family.eigensystem(loop.point(k)).state(level) for k in range(n)]
    mods = np.abs(np.array(vecs))
    ref = int(np.argmax(mods.min(axis=0)))
    worst = float(mods.min(axis=0)[ref])
    if worst < _GAUGE_COMPONENT_FLOOR:
        raise GaugeObstructionError(
            f"no eigenvector component stays >= {_GAUGE_COMPONENT_FLOOR} in modulus "
            f"along the loop (best: component {ref} at {worst:.3f})")
    samples = [berry_connection(family, loop.point(k), level, h=h, gauge_index=ref,
                                gap_tol=gap_tol)
               for k in range(n)]
    pot = np.array([s.berry_potential for s in samples])
    total = 0.0
    second_diff = 0.0
    for k in range(n):
        k2 = (k + 1) % n
        dr = loop.point(k2) - loop.point(k)
        total += 0.5 * float((pot[k] + pot[k2]) @ dr)
        second_diff += abs(float((pot[k2] - pot[k]) @ dr))
    return HolonomyReport(
        geometric_phase=principal(total),
        method="connection_integral",
        discretization={"n_points": n, "step": samples[0].step},
        diagnostics={"unwrapped_phase": total,
                     "gauge_index": ref,
                     "min_reference_modulus": worst,
                     "realness_residual": max(s.realness_residual for s in samples),
                     "estimated_error": second_diff / 12.0 + 1e-10},
    )


def curvature_flux_sphere(family: HamiltonianFamily, level: int, radius: float = 1.0,
                          center=None, n_theta: int = 48, n_phi: int = 48) -> float:
    """Total plaquette curvature flux through a sphere in parameter space.

    Link-phase plaquettes tile the closed surface exactly (pole rows reuse a
    single eigenvector), so interior links cancel and the sum is 2 pi times
    the enclosed Chern number up to roundoff.
    """
    if center is None:
        center = np.zeros(3)
    center = np.asarray(center, dtype=float)

    def at(theta, phi):
        p = center + radius * np.array([np.sin(theta) * np.cos(phi),
                                        np.sin(theta) * np.sin(phi),
                                        np.cos(theta)])
        return family.eigensystem(p).state(level)

    thetas = np.linspace(0.0, np.pi, n_theta + 1)
    phis = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    grid = np.empty((n_theta + 1, n_phi, family.dim), dtype=complex)
    grid[0, :] = at(0.0, 0.0)
    grid[n_theta, :] = at(np.pi, 0.0)
    for i in range(1, n_theta):
        for j, ph in enumerate(phis):
            grid[i, j] = at(thetas[i], ph)

    total = 0.0
    for i in range(n_theta):
        for j in range(n_phi):
            j2 = (j + 1) % n_phi
            a, b = grid[i, j], grid[i + 1, j]
            c, d = grid[i + 1, j2], grid[i, j2]
            prod = overlap(a, b) * overlap(b, c) * overlap(c, d) * overlap(d, a)
            total += -np.angle(prod)
    return float(total)
