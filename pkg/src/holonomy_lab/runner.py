"""Scenario dispatch: build inputs from validated params, call the engines,
assemble a RunReport. Every run is deterministic given (scenario, seed)."""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np

from . import classical, gauge
from .dynamics import (
    HamiltonianFamily,
    ParameterLoop,
    adiabatic_track,
    propagate,
    spin_half_in_field,
    uniform_loop,
)
from .errors import ParseError, PhysicsError
from .linalg import PAULI_Y, as_state
from .phases import (
    bargmann_holonomy,
    berry_connection,
    circular_distance,
    connection_integral,
    curvature_flux_sphere,
    decompose_phase,
    horizontal_lift,
    principal,
)
from .reports import RunReport, build_report
from .scenarios import Scenario, parse_scenario


def cone_loop(theta: float, magnitude: float, n_points: int, period: float) -> ParameterLoop:
    """Field loop on a cone of half-angle theta, counterclockwise from +z."""
    phis = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    pts = magnitude * np.column_stack([
        np.sin(theta) * np.cos(phis),
        np.sin(theta) * np.sin(phis),
        np.full_like(phis, np.cos(theta)),
    ])
    return uniform_loop(pts, period)


def spin_coherent(direction) -> np.ndarray:
    """Spin-1/2 coherent state with <sigma> along the given unit vector."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    t = np.arccos(np.clip(d[2], -1.0, 1.0))
    p = np.arctan2(d[1], d[0])
    return np.array([np.cos(t / 2.0), np.exp(1j * p) * np.sin(t / 2.0)])


def run_scenario(scenario: Scenario) -> RunReport:
    """Execute one scenario; engine errors are re-raised tagged with its id."""
    builder = _BUILDERS[scenario.kind]
    try:
        outputs, diagnostics = builder(scenario)
    except PhysicsError as exc:
        raise type(exc)(f"scenario {scenario.id!r}: {exc}") from exc
    return build_report(scenario, outputs, diagnostics)


def run_document(text: str, seed_override: int | None = None) -> RunReport:
    scenario = parse_scenario(text)
    if seed_override is not None:
        scenario = Scenario(kind=scenario.kind, id=scenario.id, seed=seed_override,
                            params=scenario.params, expectations=scenario.expectations)
    return run_scenario(scenario)


# --- kind builders ---------------------------------------------------------

def _run_berry_adiabatic(sc: Scenario):
    p = sc.params
    family = spin_half_in_field()
    loop = cone_loop(p["theta"], p["field_magnitude"], p["n_points"], p["period"])
    level = p["level"]

    track = adiabatic_track(family, loop, level)
    record = propagate(family, loop, track[0], p["steps_per_segment"],
                       initial_eigenindex=level)
    dec = decompose_phase(record)
    barg = bargmann_holonomy(track)
    conn = connection_integral(family, loop, level)

    outputs = {
        "geometric": dec.geometric,
        "dynamical": dec.dynamical,
        "total": dec.total,
        "closure_fidelity": dec.closure_fidelity,
        "bargmann_geometric": barg.geometric_phase,
        "connection_geometric": conn.geometric_phase,
        "adiabatic_vs_bargmann": circular_distance(dec.geometric, barg.geometric_phase),
        "adiabatic_vs_connection": circular_distance(dec.geometric, conn.geometric_phase),
        "bargmann_vs_connection": circular_distance(barg.geometric_phase,
                                                    conn.geometric_phase),
    }
    diagnostics = {
        "connection_unwrapped": conn.diagnostics["unwrapped_phase"],
        "bargmann_min_overlap": barg.diagnostics["min_overlap"],
        "connection_gauge_index": conn.diagnostics["gauge_index"],
        "estimated_errors": {
            "bargmann": barg.diagnostics["estimated_error"],
            "connection": conn.diagnostics["estimated_error"],
        },
    }

    if p["compare_alt_driver"]:
        # same projective curve under rescaled drivers: gamma must agree,
        # dynamical phases follow the energy * time rescaling; the step
        # count grows with the field scale to hold the integrator error
        for tag, fs, ps in (("alt_rate", p["alt_field_scale"], p["alt_period_scale"]),
                            ("alt_field", p["alt_field_only_scale"], 1.0)):
            loop2 = cone_loop(p["theta"], p["field_magnitude"] * fs,
                              p["n_points"], p["period"] * ps)
            steps2 = int(np.ceil(p["steps_per_segment"] * max(1.0, fs * ps)))
            track2 = adiabatic_track(family, loop2, level)
            rec2 = propagate(family, loop2, track2[0], steps2,
                             initial_eigenindex=level)
            dec2 = decompose_phase(rec2)
            outputs[f"{tag}_geometric_agreement"] = circular_distance(
                dec.geometric, dec2.geometric)
            outputs[f"{tag}_dynamical_ratio"] = dec2.dynamical / dec.dynamical
            outputs[f"{tag}_predicted_dynamical_ratio"] = fs * ps
    return outputs, diagnostics


def _aa_family(energy_offset: float) -> HamiltonianFamily:
    """H(beta) = -(beta/2) sigma_y + e0 * I: precession about y at rate beta."""

    def ev(r):
        return -0.5 * r[0] * PAULI_Y + energy_offset * np.eye(2)

    return HamiltonianFamily(2, 1, ev, label="precession_rate")


def _aa_rate_loop(period, amp, phase, n_points):
    """Rate profile beta(t) with integral exactly 2 pi over one period."""
    ts = np.linspace(0.0, period, n_points + 1)
    base = 2.0 * np.pi / period
    beta = base * (1.0 + amp * np.cos(2.0 * np.pi * ts[:-1] / period + phase)
                   + 0.1 * amp * np.cos(4.0 * np.pi * ts[:-1] / period + 1.3))
    return ParameterLoop(beta[:, None], ts)


def _run_aharonov_anandan(sc: Scenario):
    p = sc.params
    rng = np.random.default_rng(sc.seed)
    family = _aa_family(p["energy_offset"])
    psi0 = as_state([1.0, 0.0])

    runs = []
    periods = []
    for j in range(p["n_reparametrizations"]):
        if j == 0:
            amp, phase, period = p["wobble_amplitude"], 0.0, p["period"]
        else:
            amp = rng.uniform(0.05, 0.45)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            period = p["period"] * rng.uniform(0.6, 1.5)
        loop = _aa_rate_loop(period, amp, phase, p["n_points"])
        record = propagate(family, loop, psi0, p["steps_per_segment"])
        runs.append(decompose_phase(record))
        periods.append(period)

    base = runs[0]
    geos = [r.geometric for r in runs]
    dyns = [r.dynamical for r in runs]
    predicted = [-p["energy_offset"] * t for t in periods]
    outputs = {
        "geometric": base.geometric,
        "dynamical": base.dynamical,
        "total": base.total,
        "closure_fidelity": base.closure_fidelity,
        "reparam_geometric_spread": max(circular_distance(g, geos[0]) for g in geos),
        "dynamical_span": max(dyns) - min(dyns),
        "dynamical_prediction_residual": max(abs(d - q) for d, q in zip(dyns, predicted)),
    }
    diagnostics = {"geometric_values": geos, "dynamical_values": dyns,
                   "periods": periods}
    return outputs, diagnostics


def _coherent_circle(theta, n_points):
    phis = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    return [spin_coherent([np.sin(theta) * np.cos(f), np.sin(theta) * np.sin(f),
                           np.cos(theta)]) for f in phis]


def _coherent_octant(n_points):
    per_leg = max(2, n_points // 3)
    z, x, y = np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]
    pts = np.vstack([classical.slerp(z, x, per_leg),
                     classical.slerp(x, y, per_leg),
                     classical.slerp(y, z, per_leg)])
    return [spin_coherent(v) for v in pts]


def _random_closed_ray_path(rng, dim, n_points, max_tries=20):
    """Smooth generic closed path of rays (trigonometric loop in C^dim)."""
    ts = np.linspace(0.0, 1.0, n_points, endpoint=False)
    for _ in range(max_tries):
        coef = (rng.standard_normal((5, dim)) + 1j * rng.standard_normal((5, dim)))
        states = []
        ok = True
        for t in ts:
            v = (coef[0] + coef[1] * np.cos(2 * np.pi * t) + coef[2] * np.sin(2 * np.pi * t)
                 + 0.5 * (coef[3] * np.cos(4 * np.pi * t) + coef[4] * np.sin(4 * np.pi * t)))
            n = np.linalg.norm(v)
            if n < 0.3:
                ok = False
                break
            states.append(v / n)
        if not ok:
            continue
        overlaps = [abs(np.vdot(states[k], states[(k + 1) % len(states)]))
                    for k in range(len(states))]
        if min(overlaps) > 0.15:
            return states
    raise RuntimeError("could not draw a well-conditioned random ray path")


def _run_bargmann(sc: Scenario):
    p = sc.params
    rng = np.random.default_rng(sc.seed)

    if p["path"] == "random_closed":
        max_id = 0.0
        max_gauge = 0.0
        max_unitary = 0.0
        max_orient = 0.0
        for _ in range(p["n_paths"]):
            states = _random_closed_ray_path(rng, p["dim"], p["n_points"])
            g1 = bargmann_holonomy(states).geometric_phase
            g2 = horizontal_lift(states).geometric_phase
            max_id = max(max_id, circular_distance(g1, g2))
            rephased = [s * np.exp(1j * rng.uniform(0, 2 * np.pi)) for s in states]
            max_gauge = max(max_gauge, circular_distance(
                bargmann_holonomy(rephased).geometric_phase, g1))
            q, _ = np.linalg.qr(rng.standard_normal((p["dim"], p["dim"]))
                                + 1j * rng.standard_normal((p["dim"], p["dim"])))
            rotated = [q @ s for s in states]
            max_unitary = max(max_unitary, circular_distance(
                bargmann_holonomy(rotated).geometric_phase, g1))
            grev = bargmann_holonomy(states[::-1]).geometric_phase
            max_orient = max(max_orient, abs(principal(g1 + grev)))
        outputs = {
            "n_paths": p["n_paths"],
            "max_lift_vs_bargmann": max_id,
            "max_gauge_invariance_delta": max_gauge,
            "max_unitary_invariance_delta": max_unitary,
            "max_orientation_residual": max_orient,
        }
        return outputs, {"n_points": p["n_points"], "dim": p["dim"]}

    if p["path"] == "octant":
        states = _coherent_octant(p["n_points"])
        oracle = -classical.spherical_excess(np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]) / 2.0
    else:  # equator / cone
        theta = np.pi / 2 if p["path"] == "equator" else p["theta"]
        states = _coherent_circle(theta, p["n_points"])
        oracle = -np.pi * (1.0 - np.cos(theta))
    rep = bargmann_holonomy(states)
    lift = horizontal_lift(states)
    rephased = [s * np.exp(1j * rng.uniform(0, 2 * np.pi)) for s in states]
    outputs = {
        "geometric": rep.geometric_phase,
        "lift_geometric": lift.geometric_phase,
        "lift_vs_bargmann": circular_distance(rep.geometric_phase, lift.geometric_phase),
        "solid_angle_prediction": principal(oracle),
        "prediction_residual": circular_distance(rep.geometric_phase, oracle),
        "gauge_invariance_delta": circular_distance(
            bargmann_holonomy(rephased).geometric_phase, rep.geometric_phase),
    }
    return outputs, dict(rep.diagnostics)


def _run_connection_integral(sc: Scenario):
    p = sc.params
    family = spin_half_in_field()
    n, trav = p["n_points"], p["traversals"]
    phis = np.linspace(0.0, 2.0 * np.pi * trav, n, endpoint=False)
    theta, b = p["theta"], p["field_magnitude"]
    pts = b * np.column_stack([np.sin(theta) * np.cos(phis),
                               np.sin(theta) * np.sin(phis),
                               np.full_like(phis, np.cos(theta))])
    loop = uniform_loop(pts, float(trav))
    conn = connection_integral(family, loop, p["level"])
    track = adiabatic_track(family, loop, p["level"])
    barg = bargmann_holonomy(track)
    outputs = {
        "geometric": conn.geometric_phase,
        "unwrapped_geometric": conn.diagnostics["unwrapped_phase"],
        "bargmann_geometric": barg.geometric_phase,
        "connection_vs_bargmann": circular_distance(conn.geometric_phase,
                                                    barg.geometric_phase),
        "traversals": trav,
    }
    return outputs, dict(conn.diagnostics)


def _run_curvature(sc: Scenario):
    p = sc.params
    family = spin_half_in_field()
    b = p["field_magnitude"]
    point = np.array([0.0, 0.0, b])
    h = p["step"] * b
    sample = berry_connection(family, point, p["level"], h=h)
    fd = berry_connection(family, point, p["level"], h=h,
                          curvature_method="finite_difference")
    sign = -1.0 if p["level"] == 0 else 1.0
    monopole = sign / (2.0 * b * b)
    flux = curvature_flux_sphere(family, p["level"], radius=b,
                                 n_theta=p["n_theta"], n_phi=p["n_phi"])
    outputs = {
        "curvature_xy": sample.curvature[0, 1],
        "monopole_prediction": monopole,
        "monopole_residual": abs(sample.curvature[0, 1] - monopole),
        "chern_flux": flux,
        "chern_residual": abs(flux - sign * 2.0 * np.pi),
        "plaquette_vs_finite_difference": float(
            np.max(np.abs(sample.curvature - fd.curvature))),
        "potential_realness_residual": sample.realness_residual,
    }
    return outputs, {"step": h, "grid": [p["n_theta"], p["n_phi"]]}


def _run_sphere_transport(sc: Scenario):
    p = sc.params
    z, x, y = np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]
    if p["variant"] == "octant":
        pts = np.array([z, x, y])
        expected = classical.spherical_polygon_area(pts)
    else:  # half_equator: down to x, along the equator through y to -x, back up
        pts = np.array([z, x, y, -x])
        expected = classical.spherical_polygon_area(pts)
    path = classical.SpherePath(pts, mode="geodesic")
    v0 = classical.TangentVector(base=z, dir=x)
    final, hol = classical.sphere_parallel_transport(
        path, v0, refine_per_segment=p["refine_per_segment"])
    outputs = {
        "holonomy": hol,
        "enclosed_area_oracle": expected,
        "area_residual": circular_distance(hol, expected),
        "final_tangency": abs(float(final.dir @ final.base)),
        "final_norm_drift": abs(float(np.linalg.norm(final.dir)) - 1.0),
    }
    return outputs, {"refine_per_segment": p["refine_per_segment"]}


def _run_mobius(sc: Scenario):
    p = sc.params
    outputs = {}
    for k in range(0, p["max_circuits"] + 1):
        outputs[f"orientation_{k}"] = classical.mobius_transport(
            k, steps_per_circuit=p["steps_per_circuit"])
    outputs["flatness_max"] = classical.mobius_flatness_check(p["patch_size"])
    return outputs, {"patch_size": p["patch_size"]}


def _run_foucault(sc: Scenario):
    p = sc.params
    if p["latitude"] is not None:
        prec = classical.foucault_precession(p["latitude"], p["duration"],
                                             p["steps_per_day"])
        closed = -2.0 * np.pi * np.sin(p["latitude"]) * p["duration"]
        outputs = {
            "precession": prec,
            "closed_form": closed,
            "deviation": abs(prec - closed),
            "latitude": p["latitude"],
        }
        return outputs, {"steps_per_day": p["steps_per_day"]}
    rng = np.random.default_rng(sc.seed)
    lats = rng.uniform(-0.99 * np.pi / 2, 0.99 * np.pi / 2, p["n_random"])
    devs = []
    for lat in lats:
        prec = classical.foucault_precession(float(lat), p["duration"],
                                             p["steps_per_day"])
        devs.append(abs(prec + 2.0 * np.pi * np.sin(lat) * p["duration"]))
    outputs = {"max_deviation": max(devs), "n_latitudes": p["n_random"]}
    return outputs, {"latitudes": [float(v) for v in lats],
                     "deviations": devs}


def _run_thomas(sc: Scenario):
    p = sc.params
    c, speed = p["c"], p["speed"] * p["c"]

    def circle(n):
        angs = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return classical.VelocityLoop(
            np.column_stack([speed * np.cos(angs), speed * np.sin(angs),
                             np.zeros(n)]), c=c)

    rot, angle = classical.thomas_rotation(circle(p["n_points"]))
    _, oracle = classical.thomas_rotation(circle(p["oracle_n_points"]))
    gamma_l = 1.0 / np.sqrt(1.0 - p["speed"] ** 2)
    outputs = {
        "angle": angle,
        "angle_magnitude": abs(angle),
        "oracle_angle": oracle,
        "deviation_from_oracle": abs(angle - oracle),
        "closed_form_magnitude": 2.0 * np.pi * (gamma_l - 1.0),
        "closed_form_residual": abs(abs(angle) - 2.0 * np.pi * (gamma_l - 1.0)),
        "orthogonality_residual": float(np.max(np.abs(rot @ rot.T - np.eye(3)))),
        "determinant_residual": abs(float(np.linalg.det(rot)) - 1.0),
        "sense": "retrograde" if angle < 0 else "prograde",
    }
    return outputs, {"n_points": p["n_points"]}


def _deformed_winding_one_loop(rng, r0, n_points, center):
    phis = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    rr = r0 * (1.0 + 0.25 * np.sin(3 * phis + rng.uniform(0, 2 * np.pi))
               + 0.15 * np.sin(5 * phis + rng.uniform(0, 2 * np.pi)))
    return gauge.PlanarLoop(center + np.column_stack([rr * np.cos(phis),
                                                      rr * np.sin(phis)]))


def _run_ab_phase(sc: Scenario):
    p = sc.params
    rng = np.random.default_rng(sc.seed)
    field = gauge.confined_flux_solenoid(p["flux"], p["solenoid_radius"])
    r0 = p["loop_radius_factor"] * p["solenoid_radius"]
    n = p["n_loop_points"]
    phis = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    circle = gauge.PlanarLoop(np.column_stack([r0 * np.cos(phis), r0 * np.sin(phis)]))
    report = gauge.ab_phase(field, circle, q=p["q"])

    target_phase = principal(p["q"] * p["flux"])
    lis = []
    max_phase_dev = 0.0
    for _ in range(p["n_random_loops"]):
        lp = _deformed_winding_one_loop(rng, r0, n, field.center)
        li = gauge.line_integral(field, lp)
        lis.append(li)
        max_phase_dev = max(max_phase_dev,
                            circular_distance(principal(p["q"] * li), target_phase))

    flat = 0.0
    for k in range(p["n_flatness_patches"]):
        ang = 2.0 * np.pi * (k + 0.5) / p["n_flatness_patches"]
        center = field.center + (r0 + 1.0) * np.array([np.cos(ang), np.sin(ang)])
        flat = max(flat, gauge.patch_flatness(field, center, size=0.05))

    double_phis = np.linspace(0.0, 4.0 * np.pi, 2 * n, endpoint=False)
    double_loop = gauge.PlanarLoop(
        np.column_stack([r0 * np.cos(double_phis), r0 * np.sin(double_phis)]))
    li2 = gauge.line_integral(field, double_loop)

    outputs = {
        "phase": report.phase,
        "line_integral": report.line_integral,
        "flux_through_surface": report.flux_through_surface,
        "stokes_residual": report.diagnostics["stokes_residual"],
        "winding_number": report.winding_number,
        "classification": report.classification,
        "max_phase_deviation": max_phase_dev,
        "deformation_spread": max(lis) - min(lis) if lis else 0.0,
        "exterior_flatness_max": flat,
        "double_traversal_line_integral": li2,
        "winding_additivity_residual": abs(li2 - 2.0 * report.line_integral),
        "double_traversal_winding": gauge.winding_number(double_loop, field.center),
    }
    return outputs, {"deformed_line_integrals": lis}


def _run_classify(sc: Scenario):
    p = sc.params
    if p["subject"] == "mobius":
        probes = gauge.mobius_probe_set()
    elif p["subject"] == "sphere":
        probes = gauge.sphere_probe_set()
    else:
        field = gauge.confined_flux_solenoid(p["flux"], p["solenoid_radius"])
        probes = gauge.solenoid_probe_set(field, seed=sc.seed)
    label = gauge.classify_holonomy(probes)
    max_patch = max(abs(h) / a for h, a in probes.patch_results)
    outputs = {
        "classification": label,
        "max_patch_holonomy_per_area": max_patch,
        "n_patches": len(probes.patch_results),
        "n_family_loops": sum(len(f.holonomies) for f in probes.families),
    }
    diagnostics = {
        "families": {f.class_label: list(f.holonomies) for f in probes.families},
        "base_simply_connected": probes.base_simply_connected,
        "confined_region": probes.confined_region,
    }
    return outputs, diagnostics


_BUILDERS = {
    "berry_adiabatic": _run_berry_adiabatic,
    "aharonov_anandan": _run_aharonov_anandan,
    "bargmann": _run_bargmann,
    "connection_integral": _run_connection_integral,
    "curvature": _run_curvature,
    "sphere_transport": _run_sphere_transport,
    "mobius": _run_mobius,
    "foucault": _run_foucault,
    "thomas": _run_thomas,
    "ab_phase": _run_ab_phase,
    "classify": _run_classify,
}


# --- corpus and sweeps -----------------------------------------------------

def corpus_documents() -> dict[str, str]:
    """Shipped scenario documents, keyed by file stem, sorted by name."""
    root = resources.files("holonomy_lab") / "corpus"
    docs = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".toml"):
            docs[entry.name[:-len(".toml")]] = entry.read_text(encoding="utf-8")
    return docs


def run_corpus(jobs: int = 1, seed_override: int | None = None) -> list[RunReport]:
    docs = corpus_documents()
    texts = list(docs.values())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda t: run_document(t, seed_override), texts))
    return [run_document(t, seed_override) for t in texts]


def sweep_document(text: str, param: str, values, seed_override: int | None = None):
    """Run the scenario once per value of one dotted parameter path.

    Returns a list of row dicts (sweep value + outputs) ready for tabulation.
    Bare parameter names are looked up under [params].
    """
    try:
        import tomllib as toml
    except ModuleNotFoundError:
        import tomli as toml

    from .scenarios import parse_angle, validate_scenario_dict

    base = parse_scenario(text)  # early validation of the template document
    try:
        base_doc = toml.loads(text)
    except toml.TOMLDecodeError as exc:  # pragma: no cover (parse_scenario caught it)
        raise ParseError(str(exc)) from exc

    parts = param.split(".")
    if len(parts) == 1:
        parts = ["params", parts[0]]

    rows = []
    for value in values:
        doc_value = parse_angle(value) if isinstance(value, str) else value
        doc = copy.deepcopy(base_doc)
        doc.pop("expect", None)  # expectations describe the base document only
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = doc_value
        if seed_override is not None:
            doc["seed"] = seed_override
        report = run_scenario(validate_scenario_dict(doc))
        rows.append({
            "sweep_param": param,
            "sweep_value": doc_value,
            "scenario_id": f"{base.id}@{doc_value:.12g}",
            "outputs": report.outputs,
        })
    return rows
