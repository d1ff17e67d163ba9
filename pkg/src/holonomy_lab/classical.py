"""Classical holonomies: sphere transport, Moebius strip, Foucault, Thomas.

Sign conventions: sphere holonomy is positive counterclockwise viewed from
outside the sphere at the base point; Foucault precession is reported in the
ground frame (negative = clockwise in the Northern hemisphere); the Thomas
angle is signed relative to the orbital sense (retrograde = negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AntipodalSegmentError,
    BasePointMismatchError,
    SuperluminalVelocityError,
)

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None

UNIT_TOL = 1e-12
TANGENCY_TOL = 1e-10
ANTIPODAL_MARGIN = 1e-6
SPEED_MARGIN = 1e-9

MOBIUS_RADIUS = 1.0
MOBIUS_WIDTH = 0.3


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    return v / n


def slerp(a, b, num: int, endpoint: bool = False) -> np.ndarray:
    """Geodesic interpolation between unit vectors a and b (num samples)."""
    a, b = _unit(a), _unit(b)
    ang = np.arccos(np.clip(a @ b, -1.0, 1.0))
    if ang >= np.pi - ANTIPODAL_MARGIN:
        raise AntipodalSegmentError("geodesic between antipodal points is ambiguous")
    ts = np.linspace(0.0, 1.0, num, endpoint=endpoint)
    if ang < 1e-14:
        return np.tile(a, (len(ts), 1))
    return (np.sin((1.0 - ts)[:, None] * ang) * a + np.sin(ts[:, None] * ang) * b) / np.sin(ang)


def spherical_excess(a, b, c) -> float:
    """Signed solid angle of the geodesic triangle (a, b, c).

    Positive when (a, b, c) winds counterclockwise seen from outside.
    Used as the area oracle for transport holonomies.
    """
    a, b, c = _unit(a), _unit(b), _unit(c)
    num = float(a @ np.cross(b, c))
    den = 1.0 + float(a @ b) + float(b @ c) + float(c @ a)
    return 2.0 * float(np.arctan2(num, den))


def spherical_polygon_area(points) -> float:
    """Signed area of a geodesic polygon, by fan triangulation from points[0]."""
    pts = np.asarray(points, dtype=float)
    return sum(spherical_excess(pts[0], pts[k], pts[k + 1])
               for k in range(1, len(pts) - 1))


@dataclass(frozen=True)
class SpherePath:
    """Ordered unit vectors on the sphere; the closing segment is implicit.

    mode "geodesic" refines each segment along great circles before
    transport; "as_given" uses the stored points directly (for paths that
    are not geodesic polygons, e.g. latitude circles).
    """

    points: np.ndarray
    mode: str = "geodesic"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 3 or pts.shape[1] != 3:
            raise ValueError(f"need >= 3 unit 3-vectors, got shape {pts.shape}")
        norms = np.linalg.norm(pts, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise ValueError("path points must be unit vectors")
        if self.mode not in ("geodesic", "as_given"):
            raise ValueError(f"unknown mode {self.mode!r}")
        closed = np.vstack([pts, pts[:1]])
        cosang = np.sum(closed[1:] * closed[:-1], axis=1)
        if np.any(cosang <= np.cos(np.pi - ANTIPODAL_MARGIN)):
            raise AntipodalSegmentError("consecutive path points are (nearly) antipodal")
        object.__setattr__(self, "points", pts)

    def refined(self, per_segment: int = 64) -> np.ndarray:
        """Sample points around the closed loop (without the duplicate seam)."""
        if self.mode == "as_given":
            return self.points
        segs = []
        n = len(self.points)
        for k in range(n):
            segs.append(slerp(self.points[k], self.points[(k + 1) % n], per_segment))
        return np.vstack(segs)


@dataclass(frozen=True)
class TangentVector:
    """Unit vector dir tangent to the sphere at unit base point."""

    base: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        base = _unit(self.base)
        d = _unit(self.dir)
        if abs(d @ base) > TANGENCY_TOL:
            raise ValueError(f"dir is not tangent at base: |dir.base| = {abs(d @ base):.2e}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "dir", d)


def _transport_along(points, v):
    """Discrete Levi-Civita transport: project onto each new tangent plane.

    Exact (to roundoff) for the geodesic polygon through the sample points,
    so refinement only matters for paths with geodesic curvature.
    """
    for p in points:
        v = v - (v @ p) * p
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise AntipodalSegmentError("transported vector degenerated; path too coarse")
        v = v / n
    return v


def sphere_parallel_transport(path: SpherePath, v0: TangentVector,
                              refine_per_segment: int = 256):
    """Parallel transport v0 around the closed path.

    Returns (final TangentVector, holonomy angle). The angle is measured
    from v0.dir to the returned dir in the tangent plane at the base point,
    positive counterclockwise seen from outside the sphere; it equals the
    enclosed spherical area mod 2 pi.
    """
    pts = path.refined(refine_per_segment)
    if np.linalg.norm(v0.base - pts[0]) > 1e-9:
        raise BasePointMismatchError("v0.base must equal the first path point")
    closed = np.vstack([pts[1:], pts[:1]])
    v = _transport_along(closed, v0.dir.copy())
    angle = float(np.arctan2(v0.base @ np.cross(v0.dir, v), v0.dir @ v))
    return TangentVector(base=v0.base, dir=v), angle


def sphere_patch_curvature(center, size: float = 0.05, refine: int = 64) -> float:
    """Transport holonomy over area of a small geodesic square: the Gaussian
    curvature probe (should be 1 on the unit sphere)."""
    c = _unit(center)
    seed = np.array([0.0, 0.0, 1.0]) if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = _unit(np.cross(seed, c))
    e2 = np.cross(c, e1)
    half = size / 2.0
    corners = []
    for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        t = sx * half * e1 + sy * half * e2
        ang = np.linalg.norm(t)
        corners.append(np.cos(ang) * c + np.sin(ang) * _unit(t))
    path = SpherePath(np.array(corners), mode="geodesic")
    d0 = corners[1] - (corners[1] @ corners[0]) * corners[0]
    v0 = TangentVector(base=corners[0], dir=_unit(d0))
    _, hol = sphere_parallel_transport(path, v0, refine_per_segment=refine)
    return hol / (size * size)


# --- Moebius strip -------------------------------------------------------

def _mobius_point(u: float, w: float) -> np.ndarray:
    r = MOBIUS_RADIUS + w * np.cos(u / 2.0)
    return np.array([r * np.cos(u), r * np.sin(u), w * np.sin(u / 2.0)])


def _mobius_normal(u: float, w: float) -> np.ndarray:
    """Unit surface normal of the half-twist strip at chart point (u, w)."""
    r = MOBIUS_RADIUS + w * np.cos(u / 2.0)
    xu = np.array([
        -0.5 * w * np.sin(u / 2.0) * np.cos(u) - r * np.sin(u),
        -0.5 * w * np.sin(u / 2.0) * np.sin(u) + r * np.cos(u),
        0.5 * w * np.cos(u / 2.0),
    ])
    xw = np.array([np.cos(u / 2.0) * np.cos(u),
                   np.cos(u / 2.0) * np.sin(u),
                   np.sin(u / 2.0)])
    return _unit(np.cross(xu, xw))


def _transport_normal_line(us_ws, v):
    """Transport a vector in the normal line bundle: project onto each new
    normal line, keeping the sign continuous. The fiber is 1-D, so the
    result is always exactly +-(normal)."""
    for u, w in us_ws:
        n = _mobius_normal(u, w)
        s = 1.0 if v @ n >= 0.0 else -1.0
        v = s * n
    return v


def mobius_transport(circuits: int, steps_per_circuit: int = 720) -> int:
    """Carry the surface normal around the strip's centerline.

    Returns +1 if the vector comes back unflipped, -1 if reversed. The
    closed form (-1)**circuits is the test oracle, not the implementation.
    """
    if circuits < 0:
        raise ValueError("circuits must be >= 0")
    start = _mobius_normal(0.0, 0.0)
    if circuits == 0:
        return 1
    us = np.linspace(0.0, 2.0 * np.pi * circuits, steps_per_circuit * circuits + 1)
    v = _transport_normal_line(((u, 0.0) for u in us), start.copy())
    return 1 if v @ start > 0.0 else -1


def mobius_flatness_check(patch_size: float = 0.05, samples: int = 12,
                          steps_per_edge: int = 32) -> float:
    """Max |holonomy|/area of the line-bundle connection over interior patches.

    Small contractible rectangles in the (u, w) chart; the normal line comes
    back on itself exactly, so the per-patch holonomy angle is 0 or pi with
    pi impossible on contractible loops. A flat connection returns ~0.
    """
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(samples):
        u0 = rng.uniform(0.0, 2.0 * np.pi)
        w0 = rng.uniform(-MOBIUS_WIDTH / 4.0, MOBIUS_WIDTH / 4.0)
        du = patch_size
        dw = min(patch_size, MOBIUS_WIDTH / 4.0)
        edge = []
        for k in range(steps_per_edge):
            edge.append((u0 + du * k / steps_per_edge, w0))
        for k in range(steps_per_edge):
            edge.append((u0 + du, w0 + dw * k / steps_per_edge))
        for k in range(steps_per_edge):
            edge.append((u0 + du * (1 - k / steps_per_edge), w0 + dw))
        for k in range(steps_per_edge):
            edge.append((u0, w0 + dw * (1 - k / steps_per_edge)))
        edge.append((u0, w0))
        start = _mobius_normal(u0, w0)
        v = _transport_normal_line(edge, start.copy())
        angle = 0.0 if v @ start > 0.0 else np.pi
        xu_xw = np.cross(
            (_mobius_point(u0 + 1e-6, w0) - _mobius_point(u0 - 1e-6, w0)) / 2e-6,
            (_mobius_point(u0, w0 + 1e-6) - _mobius_point(u0, w0 - 1e-6)) / 2e-6,
        )
        area = float(np.linalg.norm(xu_xw)) * du * dw
        worst = max(worst, abs(angle) / area)
    return worst


# --- Foucault ------------------------------------------------------------

def foucault_precession(latitude: float, duration: float = 1.0,
                        steps_per_day: int = 4000) -> float:
    """Ground-frame precession angle after `duration` sidereal days.

    Computed by parallel transport along the latitude circle: the swing
    direction is transported, the local east/north frame co-rotates with the
    ground, and the unwrapped angle of the transported vector in that frame
    is the precession. The closed form -2 pi sin(latitude) per day is the
    oracle, not the implementation.
    """
    if abs(latitude) > np.pi / 2.0:
        raise ValueError("latitude must lie in [-pi/2, pi/2]")
    cl, sl = np.cos(latitude), np.sin(latitude)
    n_steps = max(8, int(round(steps_per_day * abs(duration))))
    phis = np.linspace(0.0, 2.0 * np.pi * duration, n_steps + 1)
    cp, sp = np.cos(phis), np.sin(phis)
    bases = np.column_stack([cl * cp, cl * sp, np.full_like(cp, sl)])
    easts = np.column_stack([-sp, cp, np.zeros_like(cp)])
    norths = np.column_stack([-sl * cp, -sl * sp, np.full_like(cp, cl)])
    return float(_frame_angle_sweep(bases, easts, norths))


def _frame_angle_sweep_py(bases, easts, norths):
    """Projection transport with the angle tracked in the co-moving frame."""
    vx, vy, vz = easts[0, 0], easts[0, 1], easts[0, 2]
    prev = 0.0
    total = 0.0
    for k in range(1, bases.shape[0]):
        bx, by, bz = bases[k, 0], bases[k, 1], bases[k, 2]
        d = vx * bx + vy * by + vz * bz
        vx -= d * bx
        vy -= d * by
        vz -= d * bz
        inv = 1.0 / math.sqrt(vx * vx + vy * vy + vz * vz)
        vx *= inv
        vy *= inv
        vz *= inv
        ang = math.atan2(vx * norths[k, 0] + vy * norths[k, 1] + vz * norths[k, 2],
                         vx * easts[k, 0] + vy * easts[k, 1] + vz * easts[k, 2])
        delta = ang - prev
        if delta > math.pi:
            delta -= 2.0 * math.pi
        elif delta < -math.pi:
            delta += 2.0 * math.pi
        total += delta
        prev = ang
    return total


_frame_angle_sweep = _njit(cache=True)(_frame_angle_sweep_py) if _njit else _frame_angle_sweep_py


# --- Thomas / Wigner rotation -------------------------------------------

@dataclass(frozen=True)
class VelocityLoop:
    """Closed loop of 3-velocities, all strictly below c."""

    velocities: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if v.shape[0] < 3 or v.shape[1] != 3:
            raise ValueError(f"need >= 3 3-velocities, got shape {v.shape}")
        speeds = np.linalg.norm(v, axis=1)
        if np.any(speeds >= self.c * (1.0 - SPEED_MARGIN)):
            raise SuperluminalVelocityError(
                f"speed {speeds.max():.6g} not below c = {self.c} by margin {SPEED_MARGIN}")
        object.__setattr__(self, "velocities", v)


def _pure_boost(beta) -> np.ndarray:
    """4x4 pure boost for beta = v/c (maps rest-frame components to lab)."""
    return _pure_boost_batch(np.asarray(beta, dtype=float)[None, :])[0]


def _pure_boost_batch(betas: np.ndarray) -> np.ndarray:
    """(n, 3) velocities/c -> (n, 4, 4) pure boosts."""
    b2 = np.einsum("ni,ni->n", betas, betas)
    g = 1.0 / np.sqrt(1.0 - b2)
    n = betas.shape[0]
    m = np.zeros((n, 4, 4))
    m[:, 0, 0] = g
    m[:, 0, 1:] = g[:, None] * betas
    m[:, 1:, 0] = g[:, None] * betas
    # (g-1)/b2 -> 1/2 as b2 -> 0
    factor = np.where(b2 > 1e-28, (g - 1.0) / np.where(b2 > 1e-28, b2, 1.0), 0.5)
    m[:, 1:, 1:] = np.eye(3) + factor[:, None, None] * betas[:, :, None] * betas[:, None, :]
    return m


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """Product mats[n-1] @ ... @ mats[0] by pairwise tree reduction."""
    while mats.shape[0] > 1:
        tail = None
        if mats.shape[0] % 2 == 1:
            tail = mats[-1]
            mats = mats[:-1]
        mats = np.einsum("nij,njk->nik", mats[1::2], mats[0::2])
        if tail is not None:
            mats = np.concatenate([mats, tail[None]])
    return mats[0]


def thomas_rotation(loop: VelocityLoop, chunk: int = 65536):
    """Net Wigner rotation of boost-hopping around the velocity loop.

    Each step applies the pure boost between successive rest frames (the
    relative velocity read off the de-boosted 4-velocity); the per-step
    Wigner rotation W = B(v2)^-1 B(v1) B(u_rel) accumulates into the loop
    holonomy. Returns (R, angle): R the 3x3 rotation, angle from its trace,
    signed relative to the loop's orbital sense (retrograde = negative).
    """
    v = loop.velocities / loop.c
    n = v.shape[0]
    acc = np.eye(4)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        v1 = v[idx]
        v2 = v[(idx + 1) % n]
        g2 = 1.0 / np.sqrt(1.0 - np.einsum("ni,ni->n", v2, v2))
        u4 = np.concatenate([g2[:, None], g2[:, None] * v2], axis=1)
        u4 = np.einsum("nij,nj->ni", _pure_boost_batch(-v1), u4)
        u_rel = u4[:, 1:] / u4[:, 0:1]
        w = np.einsum("nij,njk,nkl->nil",
                      _pure_boost_batch(-v2), _pure_boost_batch(v1),
                      _pure_boost_batch(u_rel))
        acc = _ordered_product(w) @ acc
    rot = acc[1:, 1:]
    angle = float(np.arccos(np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)))
    axis = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    orbit_normal = np.sum(np.cross(v, np.roll(v, -1, axis=0)), axis=0)
    if np.linalg.norm(axis) > 1e-12 and np.linalg.norm(orbit_normal) > 1e-12:
        if axis @ orbit_normal < 0.0:
            angle = -angle
    return rot, angle
