"""Request/response models of the HTTP API."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel

from ..config import RunConfig


class RunRequest(BaseModel):
    config: RunConfig


class AggregateEntry(BaseModel):
    mode: str
    operator: str
    fdp_mean: float
    fdp_std: float
    fsp_mean: float
    fsp_std: float
    runs: int


class BundleResponse(BaseModel):
    """Artifacts of one command: file name -> text content, plus the manifest."""

    files: dict[str, str]
    manifest: dict


class RunResponse(BundleResponse):
    aggregates: list[AggregateEntry]


class ImportanceEntry(BaseModel):
    cell_id: str
    operator: str
    delta_fdp: float
    delta_fsp: float


class ImportanceResponse(BundleResponse):
    table: dict[str, list[ImportanceEntry]]  # mode -> rows


class CoverageLabelSummary(BaseModel):
    below_threshold_fraction: float
    squares: int
    in_region_squares: int


class CoverageResponse(BundleResponse):
    summary: dict[str, CoverageLabelSummary]


class ErrorInfo(BaseModel):
    kind: Literal["config", "ingestion", "runtime"]
    detail: str


class HealthResponse(BaseModel):
    status: str
    version: str
