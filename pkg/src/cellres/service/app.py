"""FastAPI service wrapping the simulator.

POST endpoints take the same JSON config as the CLI and return the rendered
artifacts in the response body, so clients decide where files land. Dataset
paths in the config are resolved on the server.
"""
from __future__ import annotations

import logging

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import ConfigError, ModelConfig, ScenarioConfig
from ..ingest import IngestionError
from ..runner import execute_coverage, execute_importance, execute_run
from ..scenarios import ScenarioError
from .models import (
    CoverageResponse,
    ErrorInfo,
    HealthResponse,
    ImportanceResponse,
    RunRequest,
    RunResponse,
)

log = logging.getLogger(__name__)

_ERROR_RESPONSES = {
    400: {"model": ErrorInfo},
    422: {"model": ErrorInfo},
    500: {"model": ErrorInfo},
}


def _error(status: int, kind: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"kind": kind, "detail": detail})


def _guarded(fn, request: RunRequest):
    try:
        return fn(request.config)
    except ConfigError as exc:
        return _error(422, "config", str(exc))
    except (IngestionError, FileNotFoundError) as exc:
        return _error(400, "ingestion", str(exc))
    except ScenarioError as exc:
        return _error(422, "config", str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("request failed")
        return _error(500, "runtime", str(exc))


def create_app() -> FastAPI:
    app = FastAPI(title="cellres", version=__version__)

    @app.get("/api/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/api/defaults")
    def defaults():
        return {
            "model": ModelConfig().model_dump(),
            "scenario": ScenarioConfig().model_dump(),
        }

    @app.post("/api/run", response_model=RunResponse, responses=_ERROR_RESPONSES)
    def run(request: RunRequest):
        bundle = _guarded(execute_run, request)
        if isinstance(bundle, JSONResponse):
            return bundle
        return RunResponse(
            files=bundle.files,
            manifest=bundle.manifest,
            aggregates=bundle.summary["aggregates"],
        )

    @app.post("/api/importance", response_model=ImportanceResponse, responses=_ERROR_RESPONSES)
    def importance(request: RunRequest):
        bundle = _guarded(execute_importance, request)
        if isinstance(bundle, JSONResponse):
            return bundle
        return ImportanceResponse(
            files=bundle.files, manifest=bundle.manifest, table=bundle.summary
        )

    @app.post("/api/coverage", response_model=CoverageResponse, responses=_ERROR_RESPONSES)
    def coverage(request: RunRequest):
        bundle = _guarded(execute_coverage, request)
        if isinstance(bundle, JSONResponse):
            return bundle
        return CoverageResponse(
            files=bundle.files, manifest=bundle.manifest, summary=bundle.summary
        )

    return app


app = create_app()
