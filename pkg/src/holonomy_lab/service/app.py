"""FastAPI service wrapping the scenario runner.

Error mapping: scenario parse/validation problems return 422 with
category "validation"; physics-engine preconditions (degenerate spectra,
open loops, superluminal velocities, ...) return 409 with category
"physics". Tolerance failures are not errors: reports carry per-expectation
results and a `passed` flag.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import HolonomyLabError, InputError, PhysicsError
from ..reports import RunReport
from ..runner import corpus_documents, run_document, sweep_document
from ..scenarios import parse_scenario
from .models import (
    CorpusEntry,
    CorpusResponse,
    ErrorBody,
    HealthResponse,
    ReportResponse,
    RunScenarioRequest,
    SweepRequest,
    SweepResponse,
    SweepRow,
    ValidateResponse,
)


def _report_response(report: RunReport) -> ReportResponse:
    return ReportResponse(**report.to_dict())


def create_app() -> FastAPI:
    app = FastAPI(title="holonomy-lab", version=__version__,
                  description="Geometric phase and holonomy scenario service")

    @app.exception_handler(InputError)
    async def _input_error(request, exc):
        body = ErrorBody(category="validation", error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=422, content=body.model_dump())

    @app.exception_handler(PhysicsError)
    async def _physics_error(request, exc):
        body = ErrorBody(category="physics", error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=409, content=body.model_dump())

    @app.exception_handler(HolonomyLabError)
    async def _internal_error(request, exc):
        body = ErrorBody(category="internal", error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=500, content=body.model_dump())

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(version=__version__)

    @app.post("/scenarios/validate", response_model=ValidateResponse)
    def validate(req: RunScenarioRequest):
        sc = parse_scenario(req.document)
        return ValidateResponse(kind=sc.kind, id=sc.id, seed=sc.seed, params=sc.params,
                                n_expectations=len(sc.expectations))

    @app.post("/scenarios/run", response_model=ReportResponse)
    def run(req: RunScenarioRequest):
        report = run_document(req.document, seed_override=req.seed)
        return _report_response(report)

    @app.get("/corpus", response_model=CorpusResponse)
    def corpus(jobs: int = 1, seed: int | None = None):
        names = sorted(corpus_documents())
        docs = corpus_documents()
        if jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(
                    lambda n: run_document(docs[n], seed_override=seed), names))
        else:
            reports = [run_document(docs[n], seed_override=seed) for n in names]
        entries = [CorpusEntry(name=n, report=_report_response(r))
                   for n, r in zip(names, reports)]
        return CorpusResponse(results=entries,
                              all_passed=all(r.passed for r in reports))

    @app.get("/corpus/list")
    def corpus_list():
        return {"scenarios": sorted(corpus_documents())}

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        rows = sweep_document(req.document, req.param, req.values,
                              seed_override=req.seed)
        return SweepResponse(rows=[SweepRow(**r) for r in rows])

    return app


app = create_app()
