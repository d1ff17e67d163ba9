"""Scenario documents: TOML files, one scenario per file.

Grammar (documented in the README): a top-level table with `kind`, `id`,
optional `seed`, a kind-specific `[params]` table and an optional `[expect]`
table. Unknown keys anywhere are validation errors; angle-valued parameters
accept radians as numbers or strings like "pi/3", "2pi/3", "48.85 deg".
Expectations are `name = [value, tol]` or `[value, tol, "mod2pi"]`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ParseError, ValidationError

KINDS = (
    "berry_adiabatic",
    "aharonov_anandan",
    "bargmann",
    "connection_integral",
    "curvature",
    "sphere_transport",
    "mobius",
    "foucault",
    "thomas",
    "ab_phase",
    "classify",
)

_ANGLE_RE = re.compile(r"^\s*(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")
_DEG_RE = re.compile(r"^\s*(-?\d+\.?\d*(?:[eE][+-]?\d+)?)\s*deg\s*$")


def parse_angle(value) -> float:
    """Radians from a number, a 'pi' expression, or an explicit 'deg' suffix."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _DEG_RE.match(value)
        if m:
            return math.radians(float(m.group(1)))
        m = _ANGLE_RE.match(value)
        if m:
            coef = m.group(1)
            if coef in ("", "-"):
                coef += "1"
            num = float(coef) * math.pi
            return num / float(m.group(2)) if m.group(2) else num
    raise ValidationError(f"cannot interpret {value!r} as an angle "
                          "(use radians, 'N deg', or 'pi/k')")


@dataclass(frozen=True)
class Expectation:
    name: str
    value: object  # float, or str for equality checks
    tol: float
    mode: str = "abs"  # abs | mod2pi | eq


@dataclass(frozen=True)
class Scenario:
    kind: str
    id: str
    seed: int
    params: dict
    expectations: tuple = field(default_factory=tuple)


class _P:
    """One parameter slot of a kind schema."""

    def __init__(self, typ: str, default=None, required: bool = False,
                 minimum=None, maximum=None, choices=None):
        self.typ = typ
        self.default = default
        self.required = required
        self.minimum = minimum
        self.maximum = maximum
        self.choices = choices

    def coerce(self, key: str, value):
        if self.typ == "angle":
            out = parse_angle(value)
        elif self.typ == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"param {key!r} must be a number, got {value!r}")
            out = float(value)
        elif self.typ == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"param {key!r} must be an integer, got {value!r}")
            out = int(value)
        elif self.typ == "bool":
            if not isinstance(value, bool):
                raise ValidationError(f"param {key!r} must be a boolean, got {value!r}")
            out = value
        elif self.typ == "str":
            if not isinstance(value, str):
                raise ValidationError(f"param {key!r} must be a string, got {value!r}")
            out = value
        else:  # pragma: no cover
            raise AssertionError(f"bad schema type {self.typ}")
        if self.choices is not None and out not in self.choices:
            raise ValidationError(f"param {key!r} must be one of {self.choices}, got {out!r}")
        if self.minimum is not None and out < self.minimum:
            raise ValidationError(f"param {key!r} = {out} below minimum {self.minimum}")
        if self.maximum is not None and out > self.maximum:
            raise ValidationError(f"param {key!r} = {out} above maximum {self.maximum}")
        return out


KIND_SCHEMAS: dict[str, dict[str, _P]] = {
    "berry_adiabatic": {
        "theta": _P("angle", required=True, minimum=1e-6, maximum=math.pi - 1e-6),
        "field_magnitude": _P("float", default=1.0, minimum=1e-12),
        "period": _P("float", default=8000.0, minimum=1e-9),
        "n_points": _P("int", default=2000, minimum=3),
        "steps_per_segment": _P("int", default=48, minimum=1),
        "level": _P("int", default=0, minimum=0, maximum=1),
        "compare_alt_driver": _P("bool", default=False),
        "alt_field_scale": _P("float", default=3.0, minimum=1e-6),
        "alt_period_scale": _P("float", default=1.0 / 3.0, minimum=1e-6),
        "alt_field_only_scale": _P("float", default=2.0, minimum=1e-6),
    },
    "aharonov_anandan": {
        "period": _P("float", default=6.0, minimum=1e-9),
        "wobble_amplitude": _P("float", default=0.3, minimum=0.0, maximum=0.49),
        "energy_offset": _P("float", default=0.4),
        "n_points": _P("int", default=400, minimum=3),
        "steps_per_segment": _P("int", default=32, minimum=1),
        "n_reparametrizations": _P("int", default=5, minimum=1),
    },
    "bargmann": {
        "path": _P("str", default="octant",
                   choices=("octant", "equator", "cone", "random_closed")),
        "n_points": _P("int", default=3000, minimum=3),
        "theta": _P("angle", default=math.pi / 2, minimum=1e-6, maximum=math.pi - 1e-6),
        "n_paths": _P("int", default=100, minimum=1),
        "dim": _P("int", default=3, minimum=2, maximum=16),
    },
    "connection_integral": {
        "theta": _P("angle", required=True, minimum=1e-6, maximum=math.pi - 1e-6),
        "field_magnitude": _P("float", default=1.0, minimum=1e-12),
        "n_points": _P("int", default=2000, minimum=3),
        "traversals": _P("int", default=1, minimum=1, maximum=8),
        "level": _P("int", default=0, minimum=0, maximum=1),
    },
    "curvature": {
        "field_magnitude": _P("float", default=1.0, minimum=1e-12),
        "level": _P("int", default=0, minimum=0, maximum=1),
        "step": _P("float", default=1e-3, minimum=1e-9),
        "n_theta": _P("int", default=48, minimum=4),
        "n_phi": _P("int", default=48, minimum=4),
    },
    "sphere_transport": {
        "variant": _P("str", required=True, choices=("octant", "half_equator")),
        "refine_per_segment": _P("int", default=3400, minimum=2),
    },
    "mobius": {
        "max_circuits": _P("int", default=2, minimum=1, maximum=6),
        "patch_size": _P("float", default=0.05, minimum=1e-4, maximum=0.5),
        "steps_per_circuit": _P("int", default=720, minimum=16),
    },
    "foucault": {
        "latitude": _P("angle", default=None, minimum=-math.pi / 2, maximum=math.pi / 2),
        "n_random": _P("int", default=None, minimum=1),
        "duration": _P("float", default=1.0),
        "steps_per_day": _P("int", default=4000, minimum=16),
    },
    "thomas": {
        "speed": _P("float", default=0.6, minimum=1e-9, maximum=1.0 - 1e-9),
        "n_points": _P("int", default=100_000, minimum=3),
        "c": _P("float", default=1.0, minimum=1e-12),
        "oracle_n_points": _P("int", default=1_000_000, minimum=3),
    },
    "ab_phase": {
        "flux": _P("float", default=math.pi),
        "q": _P("float", default=1.0),
        "solenoid_radius": _P("float", default=0.5, minimum=1e-9),
        "loop_radius_factor": _P("float", default=4.0, minimum=1.2),
        "n_random_loops": _P("int", default=20, minimum=1),
        "n_loop_points": _P("int", default=512, minimum=3),
        "n_flatness_patches": _P("int", default=6, minimum=1),
    },
    "classify": {
        "subject": _P("str", required=True, choices=("mobius", "sphere", "solenoid")),
        "flux": _P("float", default=math.pi),
        "solenoid_radius": _P("float", default=0.5, minimum=1e-9),
    },
}

_TOP_KEYS = {"kind", "id", "seed", "params", "expect"}


def _position_of(exc: Exception) -> Optional[int]:
    m = re.search(r"at line (\d+)", str(exc))
    return int(m.group(1)) if m else None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate one scenario document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc), line=_position_of(exc)) from exc
    return validate_scenario_dict(doc)


def validate_scenario_dict(doc: dict) -> Scenario:
    """Validate an already-parsed scenario table (used by parse and sweeps)."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {sorted(unknown)}")
    for req in ("kind", "id"):
        if req not in doc:
            raise ValidationError(f"missing required key {req!r}")
    kind = doc["kind"]
    if kind not in KINDS:
        raise ValidationError(f"unknown kind {kind!r}; expected one of {KINDS}")
    sid = doc["id"]
    if not isinstance(sid, str) or not sid:
        raise ValidationError("key 'id' must be a non-empty string")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("key 'seed' must be an integer")

    schema = KIND_SCHEMAS[kind]
    raw_params = doc.get("params", {})
    if not isinstance(raw_params, dict):
        raise ValidationError("'params' must be a table")
    unknown = set(raw_params) - set(schema)
    if unknown:
        raise ValidationError(
            f"unknown param key(s) for kind {kind!r}: {sorted(unknown)}")
    params = {}
    for key, slot in schema.items():
        if key in raw_params:
            params[key] = slot.coerce(key, raw_params[key])
        elif slot.required:
            raise ValidationError(f"missing required param {key!r} for kind {kind!r}")
        else:
            params[key] = slot.default

    if kind == "foucault":
        if params["latitude"] is None and params["n_random"] is None:
            raise ValidationError("foucault needs param 'latitude' or 'n_random'")
        if params["latitude"] is not None and params["n_random"] is not None:
            raise ValidationError("foucault params 'latitude' and 'n_random' are exclusive")

    expectations = _parse_expectations(doc.get("expect", {}))
    return Scenario(kind=kind, id=sid, seed=seed, params=params,
                    expectations=expectations)


def _parse_expectations(table) -> tuple:
    if not isinstance(table, dict):
        raise ValidationError("'expect' must be a table")
    out = []
    for name, spec in table.items():
        if isinstance(spec, list) and len(spec) == 1 and isinstance(spec[0], str):
            out.append(Expectation(name=name, value=spec[0], tol=0.0, mode="eq"))
            continue
        if (not isinstance(spec, list) or len(spec) not in (2, 3)
                or any(isinstance(x, bool) for x in spec[:2])
                or not all(isinstance(x, (int, float)) for x in spec[:2])):
            raise ValidationError(
                f"expect.{name} must be [value, tol], [value, tol, 'mod2pi'], "
                "or [\"string\"]")
        mode = "abs"
        if len(spec) == 3:
            if spec[2] not in ("abs", "mod2pi"):
                raise ValidationError(f"expect.{name}: unknown mode {spec[2]!r}")
            mode = spec[2]
        if spec[1] < 0:
            raise ValidationError(f"expect.{name}: tolerance must be non-negative")
        out.append(Expectation(name=name, value=float(spec[0]), tol=float(spec[1]), mode=mode))
    return tuple(out)
