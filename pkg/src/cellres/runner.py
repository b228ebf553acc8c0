"""End-to-end orchestration: ingest datasets, execute a command, bundle files.

The three entry points (run, importance, coverage) are what both the service
endpoints and the CLI call; they return the artifacts as text so a thin
client can write them wherever it wants.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import __version__
from .association import MODE_PER_OPERATOR, MODE_ROAMING
from .config import RunConfig
from .geo import Region
from .ingest import (
    Cell,
    IngestionError,
    OperatorSpectrum,
    PopulationGrid,
    build_cells,
    filter_records,
    load_region,
    load_spectrum,
    parse_antenna_csv,
    parse_population_csv,
    select_cells_for_region,
)
from .metrics import coverage_raster
from .outputs import (
    aggregates_as_dicts,
    build_manifest,
    render_coverage_summary,
    render_ecdf_csv,
    render_fdp_fsp_csv,
    render_importance_csv,
    render_manifest,
    render_raster_csv,
    render_results_json,
    safe_label,
)
from .scenarios import ScenarioRunner


@dataclass(frozen=True)
class RegionData:
    region: Region
    cells: tuple[Cell, ...]
    population: PopulationGrid
    population_in_region: tuple
    spectrum: OperatorSpectrum
    ingest_summary: dict


@dataclass(frozen=True)
class ResultBundle:
    files: dict[str, str]  # file name -> text content
    manifest: dict
    summary: dict


def ingest_inputs(cfg: RunConfig) -> RegionData:
    spectrum = load_spectrum(cfg.paths.spectrum)
    region, projection = load_region(cfg.paths.region, cfg.scenario.region_id)
    grid, population_errors = parse_population_csv(cfg.paths.population)
    parsed = parse_antenna_csv(cfg.paths.antennas)
    records, filter_report = filter_records(parsed.records)
    cells, quarantined = build_cells(records, spectrum, grid, projection)
    selected = select_cells_for_region(cells, region, cfg.model.border_margin_m)
    if not selected:
        raise IngestionError(
            f"no cells inside region {region.id!r} or its {cfg.model.border_margin_m} m margin"
        )
    summary = {
        "region": region.id,
        "antenna_rows": len(parsed.records) + len(parsed.errors),
        "antenna_row_errors": [str(e) for e in parsed.errors],
        "population_row_errors": [str(e) for e in population_errors],
        "removed_2g": filter_report.removed_2g,
        "removed_omni": filter_report.removed_omni,
        "quarantined": quarantined,
        "cells_selected": len(selected),
        "cells_in_region": sum(1 for c in selected if c.in_region),
        "cells_border_margin": sum(1 for c in selected if c.border_margin),
        "operators": list(spectrum.operators),
    }
    return RegionData(
        region=region,
        cells=selected,
        population=grid,
        population_in_region=grid.cells_in_region(region),
        spectrum=spectrum,
        ingest_summary=summary,
    )


def _runner_for(cfg: RunConfig, data: RegionData) -> ScenarioRunner:
    return ScenarioRunner(
        cfg.scenario_spec(),
        data.cells,
        data.population_in_region,
        data.region,
        cfg.model_params(data.spectrum),
    )


def _bundle(cfg: RunConfig, files: dict[str, str], summary: dict) -> ResultBundle:
    config_echo = cfg.model_dump()
    manifest = build_manifest(config_echo, cfg.scenario.seed, __version__, files)
    files = dict(files)
    files["manifest.json"] = render_manifest(manifest)
    return ResultBundle(files=files, manifest=manifest, summary=summary)


def execute_run(cfg: RunConfig) -> ResultBundle:
    """Run the scenario and render results.json + fdp_fsp.csv."""
    data = ingest_inputs(cfg)
    runner = _runner_for(cfg, data)
    result = runner.run()
    operators = data.spectrum.operators
    files = {
        "results.json": render_results_json(cfg.model_dump(), result, data.ingest_summary),
        "fdp_fsp.csv": render_fdp_fsp_csv(result, operators),
    }
    return _bundle(cfg, files, {"aggregates": aggregates_as_dicts(result)})


def execute_importance(cfg: RunConfig) -> ResultBundle:
    """Per-cell importance sweep; one CSV per resolved association mode.

    bs_importance.csv always holds the first resolved mode; when the scenario
    asks for both modes the roaming sweep lands in bs_importance_roaming.csv.
    """
    data = ingest_inputs(cfg)
    runner = _runner_for(cfg, data)
    table = runner.importance_sweep()
    files = {}
    summary = {}
    for i, (mode, rows) in enumerate(table.items()):
        name = "bs_importance.csv" if i == 0 else f"bs_importance_{safe_label(mode)}.csv"
        files[name] = render_importance_csv(rows)
        summary[mode] = [
            {
                "cell_id": r.cell_id,
                "operator": r.operator,
                "delta_fdp": r.delta_fdp,
                "delta_fsp": r.delta_fsp,
            }
            for r in rows
        ]
    return _bundle(cfg, files, summary)


def execute_coverage(cfg: RunConfig) -> ResultBundle:
    """Best-SINR rasters and their ECDFs, one label per operator plus roaming.

    Uses the first run's failure and LOS draws, so the output is a single
    deterministic snapshot under the scenario seed.
    """
    data = ingest_inputs(cfg)
    runner = _runner_for(cfg, data)
    cells = runner.surviving_cells(1)
    link = runner.link_model(1, cells)
    modes = cfg.scenario_spec().resolved_modes
    labels: list[tuple[str | None, str]] = []
    if MODE_PER_OPERATOR in modes:
        labels.extend((op, op) for op in data.spectrum.operators)
    if MODE_ROAMING in modes:
        labels.append((None, "roaming"))
    rasters = [
        coverage_raster(
            data.region,
            cells,
            link,
            label=label,
            operator=operator,
            gamma_min_db=cfg.model.gamma_min_db,
        )
        for operator, label in labels
    ]
    files = {}
    for raster in rasters:
        files[f"raster_{safe_label(raster.label)}.csv"] = render_raster_csv(raster)
        files[f"ecdf_{safe_label(raster.label)}.csv"] = render_ecdf_csv(raster)
    files["coverage_summary.json"] = render_coverage_summary(rasters)
    summary = {
        r.label: {
            "below_threshold_fraction": r.below_threshold_fraction,
            "squares": r.nx * r.ny,
            "in_region_squares": len(r.region_values_db),
        }
        for r in rasters
    }
    return _bundle(cfg, files, summary)
