"""Phase decomposition, discrete holonomies, connection and curvature."""

import numpy as np
import pytest

from holonomy_lab.classical import slerp, spherical_polygon_area
from holonomy_lab.dynamics import (
    adiabatic_track,
    diagonal_drift,
    propagate,
    spin_half_in_field,
    uniform_loop,
)
from holonomy_lab.errors import (
    DegenerateOverlapError,
    DegenerateSpectrumError,
    OpenLoopError,
)
from holonomy_lab.phases import (
    bargmann_holonomy,
    berry_connection,
    circular_distance,
    connection_integral,
    curvature_flux_sphere,
    decompose_phase,
    horizontal_lift,
    principal,
)
from holonomy_lab.runner import (
    _aa_family,
    _aa_rate_loop,
    _random_closed_ray_path,
    cone_loop,
    spin_coherent,
)


def _coherent_ring(theta, n):
    phis = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return [spin_coherent([np.sin(theta) * np.cos(p), np.sin(theta) * np.sin(p),
                           np.cos(theta)]) for p in phis]


def _coherent_polygon(vertices, per_leg):
    pts = np.vstack([slerp(vertices[k], vertices[(k + 1) % len(vertices)], per_leg)
                     for k in range(len(vertices))])
    return [spin_coherent(p) for p in pts]


class TestPrincipal:
    def test_branch(self):
        assert principal(np.pi) == pytest.approx(np.pi)
        assert principal(-np.pi) == pytest.approx(np.pi)
        assert principal(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        assert circular_distance(np.pi - 1e-9, -np.pi + 1e-9) <= 3e-9


class TestDecomposePhase:
    def test_stationary_zero_energy(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0], [0.0]])
        loop = uniform_loop([[0.0], [1.0], [0.5]], 1.0)
        dec = decompose_phase(propagate(fam, loop, [1.0, 0.0]))
        assert dec.total == pytest.approx(0.0, abs=1e-10)
        assert dec.dynamical == pytest.approx(0.0, abs=1e-10)
        assert dec.geometric == pytest.approx(0.0, abs=1e-10)

    def test_stationary_unit_energy(self):
        fam = diagonal_drift([1.0, 2.0], [[0.0], [0.0]])
        loop = uniform_loop([[0.0], [1.0], [0.5]], np.pi / 2)
        dec = decompose_phase(propagate(fam, loop, [1.0, 0.0]))
        assert dec.total == pytest.approx(-np.pi / 2, abs=1e-9)
        assert dec.dynamical == pytest.approx(-np.pi / 2, abs=1e-9)
        assert dec.geometric == pytest.approx(0.0, abs=1e-9)

    def test_cone_solid_angle_law(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 3, 1.0, 1000, 8000.0)
        track = adiabatic_track(fam, loop, 0)
        dec = decompose_phase(propagate(fam, loop, track[0], steps_per_segment=48))
        assert circular_distance(dec.geometric, -np.pi / 2) <= 2e-2
        barg = bargmann_holonomy(_coherent_ring(np.pi / 3, 10000))
        assert circular_distance(barg.geometric_phase, -np.pi / 2) <= 1e-3
        assert circular_distance(dec.geometric, barg.geometric_phase) <= 2e-2

    def test_open_loop_rejected(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 2, 1.0, 16, 1.0)  # far from adiabatic
        rec = propagate(fam, loop, adiabatic_track(fam, loop, 0)[0])
        with pytest.raises(OpenLoopError):
            decompose_phase(rec)

    def test_geometric_consistency_mod_2pi(self):
        fam = diagonal_drift([0.7, 1.9], [[0.0], [0.0]])
        loop = uniform_loop([[0.0], [1.0], [0.5]], 11.0)
        dec = decompose_phase(propagate(fam, loop, [1.0, 0.0]))
        assert circular_distance(dec.geometric, dec.total - dec.dynamical) <= 1e-9


class TestBargmann:
    def test_single_ray_with_phases(self):
        s = np.array([0.6, 0.8j])
        states = [s * np.exp(1j * a) for a in (0.1, 2.0, -1.3)]
        rep = bargmann_holonomy(states)
        assert rep.geometric_phase == pytest.approx(0.0, abs=1e-12)

    def test_octant_quarter_solid_angle(self):
        states = _coherent_polygon(np.eye(3)[[2, 0, 1]], 1000)
        rep = bargmann_holonomy(states)
        assert circular_distance(rep.geometric_phase, -np.pi / 4) <= 1e-3

    def test_equator_half_solid_angle(self):
        rep = bargmann_holonomy(_coherent_ring(np.pi / 2, 5000))
        assert circular_distance(rep.geometric_phase, np.pi) <= 1e-3

    def test_needs_three_states(self):
        with pytest.raises(DegenerateOverlapError):
            bargmann_holonomy([np.array([1.0, 0.0])] * 2)

    def test_degenerate_overlap_raises(self):
        states = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]) / np.sqrt(2)]
        with pytest.raises(DegenerateOverlapError):
            bargmann_holonomy(states)

    def test_gauge_invariance(self):
        rng = np.random.default_rng(0)
        states = _random_closed_ray_path(rng, 4, 300)
        base = bargmann_holonomy(states).geometric_phase
        rephased = [s * np.exp(1j * rng.uniform(0, 2 * np.pi)) for s in states]
        assert circular_distance(bargmann_holonomy(rephased).geometric_phase, base) < 1e-12

    def test_unitary_invariance(self):
        rng = np.random.default_rng(1)
        states = _random_closed_ray_path(rng, 3, 250)
        base = bargmann_holonomy(states).geometric_phase
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        rotated = [q @ s for s in states]
        assert circular_distance(bargmann_holonomy(rotated).geometric_phase, base) <= 1e-12

    def test_orientation_reversal(self):
        rng = np.random.default_rng(2)
        states = _random_closed_ray_path(rng, 3, 200)
        fwd = bargmann_holonomy(states).geometric_phase
        rev = bargmann_holonomy(states[::-1]).geometric_phase
        assert abs(principal(fwd + rev)) <= 1e-9

    def test_path_dependence_matches_solid_angle(self):
        z, x, y = np.eye(3)[[2, 0, 1]]
        m = x + y - 0.8 * z
        m = m / np.linalg.norm(m)
        loop1 = [z, x, y]
        loop2 = [z, x, m, y]
        g1 = bargmann_holonomy(_coherent_polygon(np.array(loop1), 800)).geometric_phase
        g2 = bargmann_holonomy(_coherent_polygon(np.array(loop2), 800)).geometric_phase
        o1 = spherical_polygon_area(np.array(loop1))
        o2 = spherical_polygon_area(np.array(loop2))
        assert abs(o1 - o2) > 0.1  # genuinely different enclosed areas
        assert circular_distance(g1 - g2, -(o1 - o2) / 2.0) <= 1e-3


class TestHorizontalLift:
    def test_single_ray_path(self):
        s = np.array([1.0, 1.0j]) / np.sqrt(2)
        states = [s * np.exp(1j * a) for a in (0.0, 0.4, 1.1, -0.7)]
        assert horizontal_lift(states).geometric_phase == pytest.approx(0.0, abs=1e-12)

    def test_octant(self):
        states = _coherent_polygon(np.eye(3)[[2, 0, 1]], 1000)
        rep = horizontal_lift(states)
        assert circular_distance(rep.geometric_phase, -np.pi / 4) <= 1e-3

    def test_identity_with_bargmann_on_random_paths(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(25):
            states = _random_closed_ray_path(rng, 3, 200)
            g1 = bargmann_holonomy(states).geometric_phase
            g2 = horizontal_lift(states).geometric_phase
            worst = max(worst, circular_distance(g1, g2))
        assert worst <= 1e-12


class TestReparametrizationAndDrivers:
    def test_aa_geometric_rate_invariant_dynamical_varies(self):
        fam = _aa_family(0.4)
        psi0 = np.array([1.0, 0.0])
        geos, dyns, periods = [], [], []
        rng = np.random.default_rng(0)
        for j in range(5):
            period = 6.0 if j == 0 else 6.0 * rng.uniform(0.6, 1.5)
            amp = 0.3 if j == 0 else rng.uniform(0.05, 0.45)
            phase = 0.0 if j == 0 else rng.uniform(0, 2 * np.pi)
            loop = _aa_rate_loop(period, amp, phase, 400)
            dec = decompose_phase(propagate(fam, loop, psi0, steps_per_segment=32))
            geos.append(dec.geometric)
            dyns.append(dec.dynamical)
            periods.append(period)
        for g in geos:
            assert circular_distance(g, geos[0]) <= 1e-3
            assert circular_distance(g, np.pi) <= 1e-3
        for d, t in zip(dyns, periods):
            assert d == pytest.approx(-0.4 * t, abs=1e-9)
        assert max(dyns) - min(dyns) > 0.1  # the dynamical phase really changes

    def test_projectively_equivalent_drivers(self):
        fam = spin_half_in_field()
        results = {}
        # step count scales with field*period so the integrator error stays put
        for tag, fs, ps in (("base", 1.0, 1.0), ("rate", 3.0, 1 / 3), ("field", 2.0, 1.0)):
            loop = cone_loop(np.pi / 3, fs, 1200, 8000.0 * ps)
            steps = int(np.ceil(64 * max(1.0, fs * ps)))
            track = adiabatic_track(fam, loop, 0)
            dec = decompose_phase(propagate(fam, loop, track[0], steps_per_segment=steps))
            results[tag] = dec
        assert circular_distance(results["rate"].geometric,
                                 results["base"].geometric) <= 1e-3
        assert circular_distance(results["field"].geometric,
                                 results["base"].geometric) <= 1e-3
        assert results["rate"].dynamical / results["base"].dynamical == pytest.approx(1.0, abs=1e-4)
        assert results["field"].dynamical / results["base"].dynamical == pytest.approx(2.0, abs=1e-4)

    def test_resampled_ray_path_same_holonomy(self):
        rng = np.random.default_rng(4)
        base = bargmann_holonomy(_coherent_ring(np.pi / 2, 4000)).geometric_phase
        for _ in range(5):
            # monotone warp of the sampling of the same projective curve
            knots = np.sort(rng.uniform(0.1, 0.9, 3))
            def warp(s):
                return s + 0.2 * np.sin(np.pi * s) * np.interp(s, [0, *knots, 1],
                                                               rng.uniform(-1, 1, 5))
            ss = np.linspace(0, 1, 4000, endpoint=False)
            phis = 2 * np.pi * np.clip(warp(ss), 0, None)
            states = [spin_coherent([np.cos(p), np.sin(p), 0.0]) for p in phis]
            g = bargmann_holonomy(states).geometric_phase
            assert circular_distance(g, base) <= 1e-3


class TestConnection:
    def test_diagonal_drift_flat(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0, 0.0], [1.0, 0.5]])
        sample = berry_connection(fam, [0.2, -0.1], 0)
        assert np.max(np.abs(sample.berry_potential)) <= 1e-9
        assert np.max(np.abs(sample.curvature)) <= 1e-9

    def test_monopole_curvature_at_pole(self):
        fam = spin_half_in_field()
        sample = berry_connection(fam, [0.0, 0.0, 1.0], 0, h=1e-3)
        assert abs(sample.curvature[0, 1] - (-0.5)) <= 1e-6
        assert sample.realness_residual <= 1e-9

    def test_plaquette_matches_finite_difference(self):
        fam = spin_half_in_field()
        point = [0.3, -0.2, 0.9]
        p = berry_connection(fam, point, 0, h=1e-3, curvature_method="plaquette")
        f = berry_connection(fam, point, 0, h=1e-3, curvature_method="finite_difference")
        assert np.max(np.abs(p.curvature - f.curvature)) <= 1e-4

    def test_chern_flux_through_sphere(self):
        fam = spin_half_in_field()
        flux = curvature_flux_sphere(fam, 0, radius=1.0, n_theta=32, n_phi=32)
        assert abs(flux - (-2 * np.pi)) <= 1e-6
        flux_up = curvature_flux_sphere(fam, 1, radius=1.0, n_theta=32, n_phi=32)
        assert abs(flux_up - 2 * np.pi) <= 1e-6

    def test_degenerate_spectrum_raises(self):
        fam = spin_half_in_field()
        with pytest.raises(DegenerateSpectrumError):
            berry_connection(fam, [0.0, 0.0, 1e-12], 0)


class TestConnectionIntegral:
    def test_diagonal_drift_zero(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0, 0.0], [0.3, 0.1]])
        loop = uniform_loop(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]]), 1.0)
        rep = connection_integral(fam, loop, 0)
        assert abs(rep.geometric_phase) <= 1e-9

    def test_equator_loop(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 2, 1.0, 1200, 1.0)
        rep = connection_integral(fam, loop, 0)
        assert circular_distance(rep.geometric_phase, -np.pi) <= 1e-3

    def test_double_traversal_unwrapped(self):
        fam = spin_half_in_field()
        phis = np.linspace(0, 4 * np.pi, 2400, endpoint=False)
        pts = np.column_stack([np.cos(phis), np.sin(phis), np.zeros_like(phis)])
        loop = uniform_loop(pts, 2.0)
        rep = connection_integral(fam, loop, 0)
        assert circular_distance(rep.geometric_phase, 0.0) <= 1e-3
        assert rep.diagnostics["unwrapped_phase"] == pytest.approx(-2 * np.pi, abs=1e-3)

    def test_matches_bargmann_over_track(self):
        fam = spin_half_in_field()
        for theta in (np.pi / 6, 2 * np.pi / 3):
            loop = cone_loop(theta, 1.0, 800, 1.0)
            conn = connection_integral(fam, loop, 0)
            barg = bargmann_holonomy(adiabatic_track(fam, loop, 0))
            assert circular_distance(conn.geometric_phase, barg.geometric_phase) <= 1e-3

    def test_unitary_conjugated_family(self):
        rng = np.random.default_rng(9)
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        base = spin_half_in_field()

        from holonomy_lab.dynamics import HamiltonianFamily

        fam2 = HamiltonianFamily(2, 3, lambda r: q @ base(r) @ q.conj().T,
                                 label="conjugated")
        loop = cone_loop(np.pi / 3, 1.0, 600, 1.0)
        g1 = connection_integral(base, loop, 0).geometric_phase
        g2 = connection_integral(fam2, loop, 0).geometric_phase
        assert circular_distance(g1, g2) <= 1e-6
        b1 = bargmann_holonomy(adiabatic_track(base, loop, 0)).geometric_phase
        b2 = bargmann_holonomy(adiabatic_track(fam2, loop, 0)).geometric_phase
        assert circular_distance(b1, b2) <= 1e-12
