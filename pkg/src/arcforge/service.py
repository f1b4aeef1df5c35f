"""REST API over the project store, consumed by the designer UI and tests.

Errors come back as {"code", "message", "details"} with stable codes so
clients can branch on them (CONFLICT for stale revisions, EDIT_REJECTED with
the violation code, and so on).
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .arcs import ArcKind
from .errors import (
    ArcforgeError,
    BackendError,
    ConflictError,
    EditRejectedError,
    ExportError,
    FinalizeBlockedError,
    GenerationFailedError,
    NotFoundError,
    RequestError,
    UnknownTriggerError,
)
from .pipeline import GenerationRequest
from .project import ProjectStore, parse_edit, project_to_dict


class CreateProjectBody(BaseModel):
    prompt: str
    arc: str = "none"
    min_endings: int = Field(default=1, ge=0)
    node_budget: int = Field(default=7, ge=0)
    storyline_word_cap: int = Field(default=50, ge=1)
    seed: int = 0
    backend: str = "template"


class EditBody(BaseModel):
    expected_revision: int
    edit: dict


class AnalysisBody(BaseModel):
    runs: int = Field(default=10, ge=1, le=100)


def _error_payload(code: str, exc: Exception, details=None) -> dict:
    return {"code": code, "message": str(exc), "details": details}


def _to_response(exc: ArcforgeError) -> JSONResponse:
    if isinstance(exc, NotFoundError):
        return JSONResponse(_error_payload("NOT_FOUND", exc), status_code=404)
    if isinstance(exc, ConflictError):
        return JSONResponse(
            _error_payload(
                "CONFLICT", exc, {"expected": exc.expected, "actual": exc.actual}
            ),
            status_code=409,
        )
    if isinstance(exc, EditRejectedError):
        return JSONResponse(
            _error_payload("EDIT_REJECTED", exc, {"violation": exc.code}),
            status_code=422,
        )
    if isinstance(exc, UnknownTriggerError):
        return JSONResponse(
            _error_payload(
                "EDIT_REJECTED", exc, {"violation": "CRITERIA_UNPARSEABLE"}
            ),
            status_code=422,
        )
    if isinstance(exc, RequestError):
        return JSONResponse(_error_payload(exc.code, exc), status_code=422)
    if isinstance(exc, GenerationFailedError):
        details = None
        if exc.report is not None:
            details = {
                "violations": [
                    {"code": v.code, "ref": v.ref, "message": v.message}
                    for v in exc.report.violations
                ]
            }
        return JSONResponse(
            _error_payload("GENERATION_FAILED", exc, details), status_code=422
        )
    if isinstance(exc, FinalizeBlockedError):
        details = {
            "violations": [
                {"code": v.code, "ref": v.ref, "message": v.message}
                for v in exc.report.violations
            ]
        }
        return JSONResponse(
            _error_payload("FINALIZE_BLOCKED", exc, details), status_code=422
        )
    if isinstance(exc, ExportError):
        return JSONResponse(_error_payload("NOT_FINALIZED", exc), status_code=409)
    if isinstance(exc, BackendError):
        return JSONResponse(_error_payload("BACKEND_ERROR", exc), status_code=502)
    return JSONResponse(_error_payload("INTERNAL", exc), status_code=500)


def create_app(store: ProjectStore) -> FastAPI:
    app = FastAPI(title="arcforge", version="0.1.0")

    @app.exception_handler(ArcforgeError)
    async def handle_domain_error(request: Request, exc: ArcforgeError):
        return _to_response(exc)

    @app.exception_handler(ValueError)
    async def handle_value_error(request: Request, exc: ValueError):
        return JSONResponse(_error_payload("BAD_REQUEST", exc), status_code=422)

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody):
        request = GenerationRequest(
            prompt=body.prompt,
            arc=ArcKind(body.arc),
            min_endings=body.min_endings,
            node_budget=body.node_budget,
            storyline_word_cap=body.storyline_word_cap,
        )
        project = store.create(request, seed=body.seed, backend_name=body.backend)
        return project_to_dict(project)

    @app.get("/projects")
    def list_projects():
        return {"projects": store.list_ids()}

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        return project_to_dict(store.get(project_id))

    @app.post("/projects/{project_id}/edits")
    def commit_edit(project_id: str, body: EditBody):
        edit = parse_edit(body.edit)
        project = store.commit_edit(project_id, edit, body.expected_revision)
        return project_to_dict(project)

    @app.post("/projects/{project_id}/finalize")
    def finalize(project_id: str):
        return project_to_dict(store.finalize(project_id))

    @app.get("/projects/{project_id}/export")
    def export(project_id: str):
        blob = store.export(project_id)
        return Response(content=blob, media_type="application/json")

    @app.post("/projects/{project_id}/analysis")
    def run_analysis(project_id: str, body: AnalysisBody | None = None):
        runs = body.runs if body else 10
        return store.analyze(project_id, runs=runs)

    @app.get("/projects/{project_id}/analysis/latest")
    def latest_analysis(project_id: str):
        return store.latest_analysis(project_id)

    return app
