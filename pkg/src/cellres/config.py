"""Run configuration: dataset paths, model constants, scenario settings.

The JSON shape accepted here is also the request body of the service
endpoints. Defaults follow the simulator's standard parameter set: SINR
threshold 5 dB, 2% active population, 5 km interference radius, 8-20 Mbps
rate requirements, 2000 m border margin, 3 coordinated neighbors, 100 runs.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError, model_validator

from .association import MODE_BOTH
from .geo import Point
from .ingest import OperatorSpectrum
from .scenarios import (
    FAILURE_CORRELATED,
    FAILURE_ISOLATED,
    FAILURE_NONE,
    FailureSpec,
    ModelParams,
    ScenarioSpec,
)


class ConfigError(Exception):
    """Configuration file is invalid; str() carries the diagnostics."""


class PathsConfig(BaseModel):
    antennas: str
    population: str
    region: str
    spectrum: str


class ModelConfig(BaseModel):
    gamma_min_db: float = 5.0
    f_p: float = Field(default=0.02, ge=0.0, le=1.0)
    r_max_m: float = Field(default=5000.0, gt=0.0)
    rate_min_mbps: float = Field(default=8.0, ge=0.0)
    rate_max_mbps: float = Field(default=20.0, ge=0.0)
    noise_figure_db: float = 7.8
    thermal_noise_dbm_hz: float = -174.0
    border_margin_m: float = Field(default=2000.0, ge=0.0)
    coordination_k: int = Field(default=3, ge=0)
    shadow_fading: bool = False
    ut_height_m: float = Field(default=1.5, gt=0.0)
    operator_split: list[float] | None = None

    @model_validator(mode="after")
    def _check_rates(self):
        if self.rate_min_mbps > self.rate_max_mbps:
            raise ValueError("rate_min_mbps must not exceed rate_max_mbps")
        if self.operator_split is not None:
            if any(s < 0 for s in self.operator_split):
                raise ValueError("operator_split fractions must be non-negative")
            if abs(sum(self.operator_split) - 1.0) > 1e-9:
                raise ValueError("operator_split must sum to 1")
        return self


class FailureConfig(BaseModel):
    kind: Literal["none", "isolated", "correlated", "single-bs-sweep"] = FAILURE_NONE
    p_iso: float = Field(default=0.0, ge=0.0, le=1.0)
    center_x_m: float | None = None
    center_y_m: float | None = None
    r_fail_m: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_center(self):
        if (self.center_x_m is None) != (self.center_y_m is None):
            raise ValueError("center_x_m and center_y_m must be given together")
        return self


class ScenarioConfig(BaseModel):
    mode: Literal["per-operator", "roaming", "both"] = MODE_BOTH
    failure: FailureConfig = Field(default_factory=FailureConfig)
    p_pop: float = Field(default=0.0, ge=0.0)
    runs: int = Field(default=100, ge=1)
    seed: int = 0
    region_id: str | None = None


class RunConfig(BaseModel):
    paths: PathsConfig
    model: ModelConfig = Field(default_factory=ModelConfig)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)

    def scenario_spec(self) -> ScenarioSpec:
        f = self.scenario.failure
        center = None
        if f.center_x_m is not None:
            center = Point(f.center_x_m, f.center_y_m)
        return ScenarioSpec(
            mode=self.scenario.mode,
            failure=FailureSpec(
                kind=f.kind, p_iso=f.p_iso, center=center, r_fail_m=f.r_fail_m
            ),
            p_pop=self.scenario.p_pop,
            runs=self.scenario.runs,
            seed=self.scenario.seed,
            region_id=self.scenario.region_id,
        )

    def model_params(self, spectrum: OperatorSpectrum) -> ModelParams:
        m = self.model
        split = tuple(m.operator_split) if m.operator_split is not None else None
        if split is not None and len(split) != len(spectrum.operators):
            raise ConfigError(
                f"operator_split has {len(split)} entries but the spectrum map "
                f"defines {len(spectrum.operators)} operators"
            )
        return ModelParams(
            operators=spectrum.operators,
            gamma_min_db=m.gamma_min_db,
            f_p=m.f_p,
            r_max_m=m.r_max_m,
            rate_band_bps=(m.rate_min_mbps * 1e6, m.rate_max_mbps * 1e6),
            noise_figure_db=m.noise_figure_db,
            thermal_dbm_hz=m.thermal_noise_dbm_hz,
            border_margin_m=m.border_margin_m,
            coordination_k=m.coordination_k,
            shadow_fading=m.shadow_fading,
            ut_height_m=m.ut_height_m,
            split=split,
        )


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    cfg = parse_config(data)
    return resolve_paths(cfg, path.parent)


def resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    """Make relative dataset paths relative to the config file location."""

    def resolve(p: str) -> str:
        path = Path(p)
        return str(path if path.is_absolute() else (base / path))

    return cfg.model_copy(
        update={
            "paths": PathsConfig(
                antennas=resolve(cfg.paths.antennas),
                population=resolve(cfg.paths.population),
                region=resolve(cfg.paths.region),
                spectrum=resolve(cfg.paths.spectrum),
            )
        }
    )


def apply_overrides(
    cfg: RunConfig,
    *,
    seed: int | None = None,
    runs: int | None = None,
    p_iso: float | None = None,
    r_fail_m: float | None = None,
    p_pop: float | None = None,
    mode: str | None = None,
) -> RunConfig:
    """Apply the flat CLI override flags on top of a parsed config."""
    if p_iso is not None and r_fail_m is not None:
        raise ConfigError("--p-iso and --r-fail are mutually exclusive")
    scenario = cfg.scenario.model_dump()
    if seed is not None:
        scenario["seed"] = seed
    if runs is not None:
        scenario["runs"] = runs
    if p_pop is not None:
        scenario["p_pop"] = p_pop
    if mode is not None:
        scenario["mode"] = mode
    if p_iso is not None:
        scenario["failure"] = {"kind": FAILURE_ISOLATED, "p_iso": p_iso}
    if r_fail_m is not None:
        scenario["failure"] = {"kind": FAILURE_CORRELATED, "r_fail_m": r_fail_m}
    try:
        return cfg.model_copy(update={"scenario": ScenarioConfig.model_validate(scenario)})
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc
