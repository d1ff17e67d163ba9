"""Run reports and their serialization.

JSON output is deterministic: sorted keys, fixed separators, no timestamps,
floats via repr (shortest round-trip, 17 significant digits). CSV flattens
nested values with dotted paths and RFC-4180 quoting.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from . import __version__
from .errors import InternalInvariantBrokenError, UnsupportedFormatError
from .phases import circular_distance
from .scenarios import Expectation, Scenario


@dataclass(frozen=True)
class ExpectationResult:
    name: str
    expected: object
    tol: float
    mode: str
    actual: object
    deviation: float
    passed: bool


@dataclass(frozen=True)
class RunReport:
    scenario_id: str
    kind: str
    seed: int
    outputs: dict
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    expectation_results: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.expectation_results)

    def failures(self):
        return [r for r in self.expectation_results if not r.passed]

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "kind": self.kind,
            "seed": self.seed,
            "outputs": self.outputs,
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
            "expectations": [vars(r) for r in self.expectation_results],
            "passed": self.passed,
        }


def build_report(scenario: Scenario, outputs: dict, diagnostics: dict,
                 constants: dict | None = None) -> RunReport:
    """Assemble a report and evaluate the scenario's expectations."""
    provenance = {"engine": "holonomy-lab", "version": __version__,
                  "hbar": 1.0, "c": 1.0}
    if constants:
        provenance.update(constants)
    results = tuple(_evaluate(e, outputs, diagnostics) for e in scenario.expectations)
    return RunReport(scenario_id=scenario.id, kind=scenario.kind, seed=scenario.seed,
                     outputs=outputs, diagnostics=diagnostics, provenance=provenance,
                     expectation_results=results)


def _lookup(name: str, outputs: dict, diagnostics: dict):
    src = outputs
    path = name.split(".")
    if path[0] == "diagnostics":
        src, path = diagnostics, path[1:]
    elif path[0] == "outputs":
        path = path[1:]
    node = src
    for part in path:
        if isinstance(node, (list, tuple)):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise InternalInvariantBrokenError(
                f"expectation {name!r} does not match any report field")
    return node


def _evaluate(exp: Expectation, outputs: dict, diagnostics: dict) -> ExpectationResult:
    raw = _lookup(exp.name, outputs, diagnostics)
    if exp.mode == "eq":
        passed = str(raw) == exp.value
        return ExpectationResult(name=exp.name, expected=exp.value, tol=0.0,
                                 mode="eq", actual=raw,
                                 deviation=0.0 if passed else 1.0, passed=passed)
    actual = float(raw)
    dev = (circular_distance(actual, exp.value) if exp.mode == "mod2pi"
           else abs(actual - exp.value))
    return ExpectationResult(name=exp.name, expected=exp.value, tol=exp.tol,
                             mode=exp.mode, actual=actual, deviation=dev,
                             passed=bool(dev <= exp.tol))


def _check_finite(node, path="report"):
    if isinstance(node, float) and not math.isfinite(node):
        raise InternalInvariantBrokenError(f"non-finite value at {path}")
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, f"{path}.{k}")
    if isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _check_finite(v, f"{path}.{i}")


def flatten(node, prefix="") -> dict:
    """Nested dicts/lists to a flat dict with dotted paths."""
    out = {}
    if isinstance(node, dict):
        for k, v in node.items():
            out.update(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            out.update(flatten(v, f"{prefix}.{i}" if prefix else str(i)))
    else:
        out[prefix] = node
    return out


def _scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report, fmt: str = "json") -> str:
    """Serialize one report (RunReport or its dict form); identical reports
    yield byte-identical text."""
    doc = report.to_dict() if isinstance(report, RunReport) else report
    _check_finite(doc)
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        flat = flatten(doc)
        keys = sorted(flat)
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(keys)
        writer.writerow([_scalar(flat[k]) for k in keys])
        return buf.getvalue()
    raise UnsupportedFormatError(f"unsupported format {fmt!r} (use json or csv)")


def emit_table(rows: list[dict], fmt: str = "csv") -> str:
    """Serialize a sweep table: one flattened row per entry."""
    flats = [flatten(r) for r in rows]
    keys = sorted({k for f in flats for k in f})
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(keys)
        for f in flats:
            for v in f.values():
                _check_finite(v)
            writer.writerow([_scalar(f.get(k, "")) for k in keys])
        return buf.getvalue()
    if fmt == "json":
        for f in flats:
            _check_finite(f)
        return json.dumps(rows, sort_keys=True, indent=2, allow_nan=False) + "\n"
    raise UnsupportedFormatError(f"unsupported format {fmt!r} (use json or csv)")
