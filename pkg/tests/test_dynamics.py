"""Loop-driven Schroedinger propagation and eigenstate tracking."""

import numpy as np
import pytest

from holonomy_lab.dynamics import (
    HamiltonianFamily,
    ParameterLoop,
    adiabatic_track,
    diagonal_drift,
    propagate,
    spin_half_in_field,
    uniform_loop,
    user_matrix_table,
)
from holonomy_lab.errors import (
    DegenerateSpectrumError,
    GaugeObstructionError,
    NotHermitianError,
)
from holonomy_lab.linalg import PAULI_X, PAULI_Z, fidelity, overlap
from holonomy_lab.runner import cone_loop


class TestFamilies:
    def test_spin_half_matrix(self):
        fam = spin_half_in_field()
        h = fam([0.0, 0.0, 2.0])
        assert np.allclose(h, -PAULI_Z)

    def test_construction_rejects_non_hermitian(self):
        def bad(_):
            return np.array([[0.0, 1.0], [0.0, 0.0]])

        with pytest.raises(NotHermitianError):
            HamiltonianFamily(2, 1, bad)

    def test_diagonal_drift_linear(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0], [2.0]])
        assert np.allclose(fam([0.5]), np.diag([0.0, 2.0]))

    def test_user_matrix_table_interpolates(self):
        fam = user_matrix_table([0.0, 1.0], [np.zeros((2, 2)), np.eye(2)])
        assert np.allclose(fam([0.25]), 0.25 * np.eye(2))
        assert np.allclose(fam([2.0]), np.eye(2))  # clamped

    def test_user_matrix_table_bad_knots(self):
        with pytest.raises(ValueError):
            user_matrix_table([0.0, 0.0], [np.eye(2), np.eye(2)])


class TestParameterLoop:
    def test_requires_three_points(self):
        with pytest.raises(ValueError):
            ParameterLoop(np.array([[0.0], [1.0]]), np.array([0.0, 0.5, 1.0]))

    def test_requires_increasing_times_from_zero(self):
        pts = np.array([[0.0], [1.0], [2.0]])
        with pytest.raises(ValueError):
            ParameterLoop(pts, np.array([0.1, 0.2, 0.3, 0.4]))
        with pytest.raises(ValueError):
            ParameterLoop(pts, np.array([0.0, 0.2, 0.2, 0.4]))

    def test_rejects_consecutive_duplicates(self):
        pts = np.array([[0.0], [0.0], [1.0]])
        with pytest.raises(ValueError):
            ParameterLoop(pts, np.array([0.0, 1.0, 2.0, 3.0]))

    def test_allows_nonconsecutive_revisit(self):
        pts = np.array([[1.0], [1.3], [1.0], [0.7]])
        loop = ParameterLoop(pts, np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
        assert loop.n_points == 4


class TestPropagate:
    def test_stationary_zero_energy(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0], [0.0]])
        rec = propagate(fam, _loop_1d(), np.array([1.0, 0.0]))
        assert fidelity(rec.initial, rec.final) >= 1 - 1e-12
        assert np.angle(overlap(rec.initial, rec.final)) == pytest.approx(0.0, abs=1e-10)

    def test_phase_winds_full_cycle(self):
        fam = diagonal_drift([1.0, 2.0], [[0.0], [0.0]])
        rec = propagate(fam, _loop_1d(period=2 * np.pi), np.array([1.0, 0.0]))
        assert np.max(np.abs(rec.final - rec.initial)) <= 1e-8

    def test_adiabatic_equator_returns_to_ray(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 2, 1.0, 300, 1000.0)
        track = adiabatic_track(fam, loop, 0)
        rec = propagate(fam, loop, track[0], steps_per_segment=16)
        assert fidelity(rec.initial, rec.final) >= 1 - 1e-4

    def test_norm_preserved(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 3, 1.0, 50, 30.0)
        rec = propagate(fam, loop, np.array([0.6, 0.8]), steps_per_segment=8)
        norms = np.linalg.norm(rec.states, axis=1)
        assert np.max(np.abs(norms - 1.0)) <= 1e-10

    def test_adiabatic_limit_improves_with_period(self):
        fam = spin_half_in_field()
        infidelities = []
        for period in (10.0, 100.0, 1000.0):
            loop = cone_loop(np.pi / 3, 1.0, 200, period)
            track = adiabatic_track(fam, loop, 0)
            rec = propagate(fam, loop, track[0], steps_per_segment=16)
            infidelities.append(1.0 - fidelity(rec.final, track[0]))
        assert infidelities[1] <= 2.0 * infidelities[0]
        assert infidelities[2] <= 2.0 * infidelities[1]
        assert infidelities[2] <= infidelities[0] / 10.0

    def test_step_halving_second_order(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 3, 1.0, 40, 8.0)
        psi0 = adiabatic_track(fam, loop, 0)[0]
        finals = {s: propagate(fam, loop, psi0, steps_per_segment=s).final
                  for s in (4, 8, 16)}
        d1 = np.linalg.norm(finals[8] - finals[4])
        d2 = np.linalg.norm(finals[16] - finals[8])
        assert d2 <= d1 / 2.5  # ~4x for a second-order stepper


def _loop_1d(period=1.0):
    pts = np.array([[0.0], [1.0], [0.5]])
    return uniform_loop(pts, period)


class TestAdiabaticTrack:
    def test_diagonal_family_constant_vector(self):
        fam = diagonal_drift([0.0, 1.0], [[0.0], [1.0]])
        loop = uniform_loop(np.array([[0.5], [1.0], [0.75]]), 1.0)
        track = adiabatic_track(fam, loop, 0)
        for v in track:
            assert abs(abs(v[0]) - 1.0) <= 1e-12

    def test_spin_alignment_on_latitude_circle(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 4, 1.5, 64, 1.0)
        track = adiabatic_track(fam, loop, 0)
        for k, v in enumerate(track):
            b = loop.point(k)
            bhat = b / np.linalg.norm(b)
            sig = (bhat[0] * PAULI_X + bhat[1] * np.array([[0, -1j], [1j, 0]])
                   + bhat[2] * PAULI_Z)
            assert abs(np.real(overlap(v, sig @ v)) - 1.0) <= 1e-8

    def test_parallel_transport_gauge(self):
        fam = spin_half_in_field()
        loop = cone_loop(np.pi / 3, 1.0, 32, 1.0)
        track = adiabatic_track(fam, loop, 0)
        for k in range(len(track) - 1):
            ov = overlap(track[k], track[k + 1])
            assert abs(ov.imag) <= 1e-12
            assert ov.real > 0

    def test_degenerate_spectrum_raises(self):
        fam = diagonal_drift([0.0, 0.0], [[0.0], [0.0]])
        with pytest.raises(DegenerateSpectrumError):
            adiabatic_track(fam, _loop_1d(), 0)

    def test_gauge_obstruction_on_coarse_loop(self):
        fam = spin_half_in_field()
        th = np.deg2rad(175.0)
        pts = np.array([[0.0, 0.0, 1.0],
                        [np.sin(th), 0.0, np.cos(th)],
                        [0.0, 1.0, 0.0]])
        loop = uniform_loop(pts, 1.0)
        with pytest.raises(GaugeObstructionError):
            adiabatic_track(fam, loop, 0)
