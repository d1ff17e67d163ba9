"""Aharonov-Bohm phases and the geometric/topological/AB classifier.

Line integrals of a planar vector potential around closed loops, flux
through a triangulated spanning surface, winding numbers, and a decision
rule that sorts holonomy sources into curved-geometric, flat-topological,
and AB-type (flat connection around a confined field region in a
topologically trivial ambient space).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CenterOnLoopError,
    InsufficientProbesError,
    LoopThroughSolenoidError,
)
from .phases import principal

SEGMENT_SUBDIV = 32
FLATNESS_THRESHOLD = 1e-6
BOUNDARY_CLEARANCE = 1e-9


class VectorPotentialField:
    """Planar vector potential A(x, y) -> (A_x, A_y).

    eval_many_fn, when given, evaluates a whole (n, 2) batch at once; the
    built-ins provide it so quadrature and flux sums stay vectorized.
    """

    def __init__(self, eval_fn: Callable[[np.ndarray], np.ndarray], label: str = "custom",
                 center=None, boundary_radii: Sequence[float] = (),
                 confined_region: bool = False,
                 eval_many_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self._eval = eval_fn
        self._eval_many = eval_many_fn
        self.label = label
        self.center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        self.boundary_radii = tuple(float(r) for r in boundary_radii)
        self.confined_region = bool(confined_region)

    def __call__(self, pos) -> np.ndarray:
        a = np.asarray(self._eval(np.asarray(pos, dtype=float)), dtype=float)
        if not np.all(np.isfinite(a)):
            raise ValueError(f"field {self.label!r} returned non-finite potential at {pos}")
        return a

    def many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self._eval_many is not None:
            out = np.asarray(self._eval_many(pts), dtype=float)
        else:
            out = np.array([self._eval(p) for p in pts], dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"field {self.label!r} returned non-finite potential")
        return out

    def curl(self, pos, h: float = 1e-6) -> float:
        """dA_y/dx - dA_x/dy by central differences."""
        return float(self.curl_many(np.asarray(pos, dtype=float)[None, :], h)[0])

    def curl_many(self, pts: np.ndarray, h: float = 1e-6) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        day_dx = (self.many(pts + ex)[:, 1] - self.many(pts - ex)[:, 1]) / (2.0 * h)
        dax_dy = (self.many(pts + ey)[:, 0] - self.many(pts - ey)[:, 0]) / (2.0 * h)
        return day_dx - dax_dy


def confined_flux_solenoid(flux: float, radius: float) -> VectorPotentialField:
    """Flux confined to r < radius with a uniform interior field.

    Outside: A = flux/(2 pi r^2) (-y, x); inside the same expression with
    r -> radius, i.e. solid rotation. Continuous at the boundary.
    """
    a2 = radius * radius

    def ev(pos):
        x, y = pos
        r2 = x * x + y * y
        denom = r2 if r2 >= a2 else a2
        coef = flux / (2.0 * np.pi * denom)
        return np.array([-coef * y, coef * x])

    def ev_many(pts):
        r2 = np.einsum("ni,ni->n", pts, pts)
        coef = flux / (2.0 * np.pi * np.maximum(r2, a2))
        return np.column_stack([-coef * pts[:, 1], coef * pts[:, 0]])

    return VectorPotentialField(ev, label="confined_flux_solenoid",
                                boundary_radii=(radius,), confined_region=True,
                                eval_many_fn=ev_many)


def uniform_field(strength: float) -> VectorPotentialField:
    """Uniform out-of-plane field B0 in symmetric gauge: A = B0/2 (-y, x)."""

    def ev(pos):
        return 0.5 * strength * np.array([-pos[1], pos[0]])

    def ev_many(pts):
        return 0.5 * strength * np.column_stack([-pts[:, 1], pts[:, 0]])

    return VectorPotentialField(ev, label="uniform_field", eval_many_fn=ev_many)


def user_grid_field(xs, ys, ax, ay) -> VectorPotentialField:
    """Bilinear interpolation of tabulated (A_x, A_y) samples."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ax = np.asarray(ax, dtype=float)
    ay = np.asarray(ay, dtype=float)
    if ax.shape != (xs.size, ys.size) or ay.shape != ax.shape:
        raise ValueError("grid component shapes must be (len(xs), len(ys))")

    def interp(table, x, y):
        i = int(np.clip(np.searchsorted(xs, x) - 1, 0, xs.size - 2))
        j = int(np.clip(np.searchsorted(ys, y) - 1, 0, ys.size - 2))
        tx = np.clip((x - xs[i]) / (xs[i + 1] - xs[i]), 0.0, 1.0)
        ty = np.clip((y - ys[j]) / (ys[j + 1] - ys[j]), 0.0, 1.0)
        return ((1 - tx) * (1 - ty) * table[i, j] + tx * (1 - ty) * table[i + 1, j]
                + (1 - tx) * ty * table[i, j + 1] + tx * ty * table[i + 1, j + 1])

    def ev(pos):
        return np.array([interp(ax, pos[0], pos[1]), interp(ay, pos[0], pos[1])])

    return VectorPotentialField(ev, label="user_grid")


@dataclass(frozen=True)
class PlanarLoop:
    """Ordered 2-D positions; the closing segment back to points[0] is implicit."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 3 or pts.shape[1] != 2:
            raise ValueError(f"need >= 3 planar points, got shape {pts.shape}")
        closed = np.vstack([pts, pts[:1]])
        if np.any(np.all(closed[1:] == closed[:-1], axis=1)):
            raise ValueError("consecutive loop points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def segments(self):
        n = self.n_points
        for k in range(n):
            yield self.points[k], self.points[(k + 1) % n]


@dataclass(frozen=True)
class ABReport:
    line_integral: float
    flux_through_surface: float
    phase: float  # (-pi, pi]
    winding_number: int
    classification: str
    diagnostics: dict = field(default_factory=dict)


def _segment_quadrature(field, a, b, subdiv: int, rule: str = "trapezoid") -> float:
    """Integral of A . dr along the straight segment a -> b."""
    if rule == "simpson" and subdiv % 2 == 1:
        subdiv += 1
    ts = np.linspace(0.0, 1.0, subdiv + 1)
    d = b - a
    vals = field.many(a[None, :] + ts[:, None] * d[None, :]) @ d
    if rule == "trapezoid":
        return float(np.trapezoid(vals, ts))
    if rule == "simpson":
        h = 1.0 / subdiv
        return float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                                + 2.0 * vals[2:-1:2].sum()))
    raise ValueError(f"unknown quadrature rule {rule!r}")


def line_integral(field: VectorPotentialField, loop: PlanarLoop,
                  subdiv: int = SEGMENT_SUBDIV, rule: str = "trapezoid") -> float:
    """Composite quadrature of A . dr around the closed loop."""
    return sum(_segment_quadrature(field, a, b, subdiv, rule) for a, b in loop.segments())


def _check_solenoid_clearance(field, loop, subdiv):
    for radius in field.boundary_radii:
        for a, b in loop.segments():
            ts = np.linspace(0.0, 1.0, subdiv + 1)
            rs = np.linalg.norm(a[None, :] + ts[:, None] * (b - a)[None, :]
                                - field.center[None, :], axis=1)
            if np.any(np.abs(rs - radius) < BOUNDARY_CLEARANCE):
                raise LoopThroughSolenoidError(
                    f"loop touches the solenoid boundary r = {radius}")
            if rs.min() < radius < rs.max():
                raise LoopThroughSolenoidError(
                    f"loop crosses the solenoid boundary r = {radius}")


def _shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _circle_edge_crossings(a: np.ndarray, b: np.ndarray, center: np.ndarray,
                           radius: float):
    """Exact parameters t in (0, 1) where segment a->b crosses the circle."""
    e = b - a
    f = a - center
    qa = float(e @ e)
    qb = 2.0 * float(f @ e)
    qc = float(f @ f) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    if disc <= 0.0 or qa == 0.0:
        return []
    s = np.sqrt(disc)
    return [t for t in ((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa))
            if 1e-12 < t < 1.0 - 1e-12]


def _tri_straddles_circle(tri: np.ndarray, center: np.ndarray, radius: float) -> bool:
    """Exact: does the circle r = radius cross the triangle's interior?"""
    rel = tri - center
    rads = np.linalg.norm(rel, axis=1)
    if rads.max() <= radius:
        return False
    # min distance from center to the (closed) triangle
    sign = 0
    inside = True
    for i in range(3):
        e = tri[(i + 1) % 3] - tri[i]
        w = center - tri[i]
        s = e[0] * w[1] - e[1] * w[0]
        if s == 0:
            continue
        if sign == 0:
            sign = 1 if s > 0 else -1
        elif (s > 0) != (sign > 0):
            inside = False
            break
    if inside:
        return True  # center inside and max corner outside
    min_d = np.inf
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        e = b - a
        t = np.clip(float((center - a) @ e) / float(e @ e), 0.0, 1.0)
        min_d = min(min_d, float(np.linalg.norm(a + t * e - center)))
    return min_d < radius


def _split_flux(field, tri: np.ndarray, radius: float):
    """Exact flux of a cell crossed once by the circle r = radius.

    Builds the inside polygon with exact chord endpoints, then adds the
    circular-segment area between chord and arc, so the result is exact for
    curl constant on each side (the confined-core case). Returns None when
    the crossing pattern is not the generic two-point one.
    """
    center = field.center
    dvals = radius - np.linalg.norm(tri - center, axis=1)
    poly_in = []  # corners with r <= radius plus exact crossings, in order
    crossings = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        if dvals[i] >= 0.0:
            poly_in.append(a)
        for t in sorted(_circle_edge_crossings(a, b, center, radius)):
            p = a + t * (b - a)
            poly_in.append(p)
            crossings.append(p)
    if len(crossings) != 2:
        return None
    area = _shoelace(tri)
    area_in = _shoelace(np.array(poly_in)) if len(poly_in) >= 3 else 0.0
    chord = float(np.linalg.norm(crossings[0] - crossings[1]))
    theta = 2.0 * np.arcsin(min(1.0, chord / (2.0 * radius)))
    segment = 0.5 * radius * radius * (theta - np.sin(theta))
    area_in += np.sign(area) * segment
    area_out = area - area_in
    flux = 0.0
    if area_in != 0.0:
        inner = center + 0.5 * radius * _unit_or_zero(np.mean(crossings, axis=0) - center)
        flux += field.curl(inner) * area_in
    if area_out != 0.0:
        mid = np.mean(crossings, axis=0)
        outer_dir = _unit_or_zero(mid - center)
        outer = center + (radius + 0.45 * chord) * outer_dir
        flux += field.curl(outer) * area_out
    return flux


def _unit_or_zero(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.array([1.0, 0.0])


def _refine_flux(field, tri: np.ndarray, depth: int) -> float:
    hit = None
    for radius in field.boundary_radii:
        if _tri_straddles_circle(tri, field.center, radius):
            hit = radius
            break
    if hit is None:
        return field.curl(tri.mean(axis=0)) * _shoelace(tri)
    exact = _split_flux(field, tri, hit)
    if exact is not None:
        return exact
    if depth == 0:
        return field.curl(tri.mean(axis=0)) * _shoelace(tri)
    a, b, c = tri
    ab, bc, ca = (a + b) / 2.0, (b + c) / 2.0, (c + a) / 2.0
    return (_refine_flux(field, np.array([a, ab, ca]), depth - 1)
            + _refine_flux(field, np.array([ab, b, bc]), depth - 1)
            + _refine_flux(field, np.array([ca, bc, c]), depth - 1)
            + _refine_flux(field, np.array([ab, bc, ca]), depth - 1))


def _fan_cells(loop: PlanarLoop, max_strips: int = 256) -> np.ndarray:
    """Near-isotropic triangles paving the loop's spanning surface.

    Fan triangles from the centroid are sliced into radial strips so no cell
    is a long sliver; signed areas make the paving exact for any winding.
    """
    apex = loop.points.mean(axis=0)
    cells = []
    for a, b in loop.segments():
        base = np.linalg.norm(b - a)
        side = max(np.linalg.norm(a - apex), np.linalg.norm(b - apex))
        strips = int(np.clip(np.ceil(side / max(base, 1e-12)), 1, max_strips))
        fr = np.linspace(0.0, 1.0, strips + 1)[:, None]
        pa = apex + fr * (a - apex)
        pb = apex + fr * (b - apex)
        for i in range(strips):
            cells.append((pa[i], pa[i + 1], pb[i + 1]))
            cells.append((pa[i], pb[i + 1], pb[i]))
    return np.array(cells)


def surface_flux(field: VectorPotentialField, loop: PlanarLoop,
                 boundary_depth: int = 6) -> float:
    """Flux of curl A through the triangulated surface spanning the loop.

    Smooth cells take one centroid curl sample each (vectorized); cells that
    straddle a declared curl discontinuity are refined quadtree-style and
    finally split along the local boundary line, so confined cores integrate
    to the tolerance of the linearized boundary rather than the cell size.
    """
    cells = _fan_cells(loop)
    rel = cells - field.center
    rads = np.linalg.norm(rel, axis=2)
    diam = np.maximum(np.linalg.norm(cells[:, 0] - cells[:, 1], axis=1),
                      np.maximum(np.linalg.norm(cells[:, 1] - cells[:, 2], axis=1),
                                 np.linalg.norm(cells[:, 2] - cells[:, 0], axis=1)))
    suspicious = np.zeros(len(cells), dtype=bool)
    for radius in field.boundary_radii:
        suspicious |= (rads.min(axis=1) - diam < radius) & (radius < rads.max(axis=1) + diam)

    smooth = cells[~suspicious]
    total = 0.0
    if len(smooth):
        centroids = smooth.mean(axis=1)
        u = smooth[:, 1] - smooth[:, 0]
        w = smooth[:, 2] - smooth[:, 0]
        areas = 0.5 * (u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])
        total += float(np.sum(field.curl_many(centroids) * areas))
    for tri in cells[suspicious]:
        total += _refine_flux(field, tri, boundary_depth)
    return total


def winding_number(loop: PlanarLoop, center) -> int:
    """Turns of the loop about center: total swept angle over 2 pi, rounded."""
    center = np.asarray(center, dtype=float)
    rel = loop.points - center
    rads = np.linalg.norm(rel, axis=1)
    if np.any(rads < BOUNDARY_CLEARANCE):
        raise CenterOnLoopError(f"loop passes within {BOUNDARY_CLEARANCE} of the center")
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    ang = np.append(ang, ang[0])
    swept = np.sum((np.diff(ang) + np.pi) % (2.0 * np.pi) - np.pi)
    turns = swept / (2.0 * np.pi)
    n = int(np.round(turns))
    if abs(turns - n) > 1e-6:
        raise CenterOnLoopError(
            f"swept angle {swept:.9f} is not an integer number of turns; "
            "a segment passes too close to the center")
    return n


def patch_flatness(field: VectorPotentialField, center, size: float = 0.05,
                   subdiv: int = 32) -> float:
    """|circulation| / area of a small square patch (Simpson per edge).

    Simpson keeps the quadrature error far below the 1e-9 flatness budget
    that the field-free exterior must meet.
    """
    c = np.asarray(center, dtype=float)
    h = size / 2.0
    corners = [c + np.array([sx * h, sy * h])
               for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    loop = PlanarLoop(np.array(corners))
    circ = line_integral(field, loop, subdiv=subdiv, rule="simpson")
    return abs(circ) / (size * size)


def ab_phase(field: VectorPotentialField, loop: PlanarLoop, q: float = 1.0,
             hbar: float = 1.0, subdiv: int = SEGMENT_SUBDIV) -> ABReport:
    """Aharonov-Bohm report for one loop: line integral, flux, reduced phase.

    The phase only uses the line integral (the measurable); the flux is the
    Stokes cross-check through the spanned surface.
    """
    _check_solenoid_clearance(field, loop, subdiv)
    li = line_integral(field, loop, subdiv=subdiv)
    flux = surface_flux(field, loop)
    wind = winding_number(loop, field.center) if _center_off_loop(field, loop) else 0
    classification = _classify_field(field)
    return ABReport(
        line_integral=float(li),
        flux_through_surface=float(flux),
        phase=principal(q * li / hbar),
        winding_number=wind,
        classification=classification,
        diagnostics={"stokes_residual": abs(li - flux),
                     "charge": q, "hbar": hbar},
    )


def _center_off_loop(field, loop):
    rel = loop.points - field.center
    return bool(np.all(np.linalg.norm(rel, axis=1) > BOUNDARY_CLEARANCE))


def _classify_field(field):
    probes = (solenoid_probe_set(field) if field.confined_region
              else generic_field_probe_set(field))
    return classify_holonomy(probes)


# --- classifier ----------------------------------------------------------

@dataclass(frozen=True)
class LoopFamilyProbe:
    """Holonomies of several loops within one homotopy class."""

    class_label: str
    holonomies: tuple


@dataclass(frozen=True)
class ProbeSet:
    """Evidence gathered for classification.

    patch_results: (holonomy, area) of small contractible loops.
    families: holonomies grouped by homotopy class.
    base_simply_connected: the ambient base space (with excluded regions
    removed from consideration) is topologically trivial.
    confined_region: a region excluded from probing confines nonzero field.
    """

    patch_results: tuple
    families: tuple
    base_simply_connected: bool
    confined_region: bool
    reference_scale: float = 1.0


def classify_holonomy(probes: ProbeSet, flat_threshold: float = FLATNESS_THRESHOLD) -> str:
    """Sort the probed connection into one of the three holonomy types.

    (a) everywhere-flat patches and holonomy a function of homotopy class
        alone -> flat_topological;
    (b) non-flat patches -> curved_geometric;
    (c) flat, class-determined, but the classes wind about a confined-field
        region in a simply connected ambient space -> ab_type.
    """
    n_probes = len(probes.patch_results) + sum(len(f.holonomies) for f in probes.families)
    if n_probes < 8:
        raise InsufficientProbesError(f"need >= 8 probe loops, got {n_probes}")
    scale = probes.reference_scale
    flat = all(abs(h) / a < flat_threshold * scale for h, a in probes.patch_results)
    if not flat:
        return "curved_geometric"
    for fam in probes.families:
        hs = np.asarray(fam.holonomies)
        if hs.size > 1 and np.max(np.abs(hs - hs[0])) > flat_threshold * scale:
            return "curved_geometric"  # same class disagrees: loop-shape dependence
    if probes.confined_region and probes.base_simply_connected:
        return "ab_type"
    return "flat_topological"


def solenoid_probe_set(field: VectorPotentialField, loop_radius_factor: float = 4.0,
                       n_patches: int = 4, n_deformations: int = 3,
                       seed: int = 0) -> ProbeSet:
    """Probe a confined-flux field: exterior patches plus winding families."""
    rng = np.random.default_rng(seed)
    a = max(field.boundary_radii) if field.boundary_radii else 1.0
    r0 = loop_radius_factor * a
    patches = []
    for k in range(n_patches):
        ang = 2.0 * np.pi * k / n_patches
        center = field.center + (r0 + 0.5) * np.array([np.cos(ang), np.sin(ang)])
        patches.append((patch_flatness(field, center, size=0.05) * 0.05 ** 2, 0.05 ** 2))

    def wound_loop(wind, wiggle):
        n = 256
        ts = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        if wind == 0:
            offset = field.center + np.array([2.5 * r0, 0.0])
            return PlanarLoop(offset + 0.5 * a * np.column_stack([np.cos(ts), np.sin(ts)]))
        rr = r0 * (1.0 + 0.25 * wiggle * np.sin(3.0 * ts + rng.uniform(0, 2 * np.pi)))
        return PlanarLoop(np.column_stack([rr * np.cos(wind * ts),
                                           rr * np.sin(wind * ts)]) + field.center)

    families = []
    for wind in (0, 1, 2):
        hols = []
        count = n_deformations if wind == 1 else 1
        for _ in range(count):
            lp = wound_loop(wind, wiggle=0.0 if wind == 0 else rng.uniform(0.2, 1.0))
            hols.append(line_integral(field, lp))
        families.append(LoopFamilyProbe(class_label=f"winding_{wind}", holonomies=tuple(hols)))
    return ProbeSet(patch_results=tuple(patches), families=tuple(families),
                    base_simply_connected=True, confined_region=field.confined_region,
                    reference_scale=1.0)


def generic_field_probe_set(field: VectorPotentialField, n_patches: int = 8,
                            extent: float = 2.0) -> ProbeSet:
    """Patches spread over the plane for a field with no excluded region."""
    patches = []
    for k in range(n_patches):
        ang = 2.0 * np.pi * k / n_patches
        center = field.center + extent * np.array([np.cos(ang), np.sin(ang)])
        patches.append((patch_flatness(field, center, size=0.05) * 0.05 ** 2, 0.05 ** 2))
    return ProbeSet(patch_results=tuple(patches), families=(),
                    base_simply_connected=True, confined_region=False,
                    reference_scale=1.0)


def sphere_probe_set(n_patches: int = 8, size: float = 0.05) -> ProbeSet:
    """Tangent-transport patches on the unit sphere; curvature 1 everywhere."""
    from .classical import sphere_patch_curvature

    rng = np.random.default_rng(0)
    patches = []
    for _ in range(n_patches):
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        k = sphere_patch_curvature(v, size=size)
        patches.append((k * size * size, size * size))
    return ProbeSet(patch_results=tuple(patches), families=(),
                    base_simply_connected=True, confined_region=False,
                    reference_scale=1.0)


def mobius_probe_set(n_patches: int = 6, patch_size: float = 0.05) -> ProbeSet:
    """Normal-line-bundle probes on the Moebius strip.

    Interior patches are flat; full circuits flip the normal according to
    circuit parity, a function of homotopy class only.
    """
    from .classical import mobius_flatness_check, mobius_transport

    patches = []
    for k in range(n_patches):
        worst = mobius_flatness_check(patch_size=patch_size, samples=k + 1)
        patches.append((worst * patch_size ** 2, patch_size ** 2))
    families = []
    for circuits, repeats in ((1, 2), (2, 1), (3, 1)):
        hols = []
        for r in range(repeats):
            orientation = mobius_transport(circuits, steps_per_circuit=540 + 180 * r)
            hols.append(0.0 if orientation == 1 else np.pi)
        families.append(LoopFamilyProbe(class_label=f"circuits_{circuits}",
                                        holonomies=tuple(hols)))
    return ProbeSet(patch_results=tuple(patches), families=tuple(families),
                    base_simply_connected=False, confined_region=False,
                    reference_scale=1.0)
