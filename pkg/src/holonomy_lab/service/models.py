"""Pydantic request/response models for the holonomy service."""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str
    hbar: float = 1.0
    c: float = 1.0


class RunScenarioRequest(BaseModel):
    document: str = Field(description="One scenario document (TOML text)")
    seed: Optional[int] = Field(default=None, description="Overrides the document seed")


class ExpectationModel(BaseModel):
    name: str
    expected: Union[float, str]
    tol: float
    mode: str
    actual: Union[float, str]
    deviation: float
    passed: bool


class ReportResponse(BaseModel):
    scenario_id: str
    kind: str
    seed: int
    outputs: dict[str, Any]
    diagnostics: dict[str, Any]
    provenance: dict[str, Any]
    expectations: list[ExpectationModel]
    passed: bool


class ValidateResponse(BaseModel):
    kind: str
    id: str
    seed: int
    params: dict[str, Any]
    n_expectations: int


class CorpusEntry(BaseModel):
    name: str
    report: ReportResponse


class CorpusResponse(BaseModel):
    results: list[CorpusEntry]
    all_passed: bool


class SweepRequest(BaseModel):
    document: str
    param: str = Field(description="Dotted path; bare names resolve under [params]")
    values: list[Union[float, int, str]] = Field(min_length=1)
    seed: Optional[int] = None


class SweepRow(BaseModel):
    sweep_param: str
    sweep_value: float
    scenario_id: str
    outputs: dict[str, Any]


class SweepResponse(BaseModel):
    rows: list[SweepRow]


class ErrorBody(BaseModel):
    category: Literal["validation", "physics", "internal"]
    error: str
    detail: str
