"""Result serialization: CSV/JSON artifacts and the reproducibility manifest.

All renderers are pure text producers; floats are written with repr so the
files round-trip exactly and identical runs yield byte-identical artifacts.
"""
from __future__ import annotations

import hashlib
import json
import re

from .metrics import ALL_OPERATORS, CoverageRaster, raster_ecdf
from .scenarios import ImportanceRow, ScenarioResult


def fnum(x: float) -> str:
    """Shortest exact decimal form; infinities serialize as inf/-inf."""
    return repr(float(x))


def safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def render_fdp_fsp_csv(result: ScenarioResult, operators) -> str:
    lines = ["mode,operator,run,fdp,fsp"]
    labels = [ALL_OPERATORS, *operators]
    modes = sorted({rec.mode for rec in result.records})
    by_mode = {
        mode: sorted((r for r in result.records if r.mode == mode), key=lambda r: r.run)
        for mode in modes
    }
    for mode in modes:
        for label in labels:
            for rec in by_mode[mode]:
                rep = rec.report
                if label == ALL_OPERATORS:
                    fdp, fsp = rep.fdp, rep.fsp
                else:
                    fdp, fsp = rep.per_operator[label].fdp, rep.per_operator[label].fsp
                lines.append(f"{mode},{label},{rec.run},{fnum(fdp)},{fnum(fsp)}")
    return "\n".join(lines) + "\n"


def aggregates_as_dicts(result: ScenarioResult) -> list[dict]:
    out = []
    for (mode, label), stats in sorted(result.aggregates.items()):
        out.append(
            {
                "mode": mode,
                "operator": label,
                "fdp_mean": stats.fdp_mean,
                "fdp_std": stats.fdp_std,
                "fsp_mean": stats.fsp_mean,
                "fsp_std": stats.fsp_std,
                "runs": stats.runs,
            }
        )
    return out


def render_results_json(config_echo: dict, result: ScenarioResult, ingest_summary: dict) -> str:
    per_run = [
        {
            "run": rec.run,
            "mode": rec.mode,
            "fdp": rec.report.fdp,
            "fsp": rec.report.fsp,
            "per_operator": {
                op: {"fdp": om.fdp, "fsp": om.fsp, "users": om.users}
                for op, om in sorted(rec.report.per_operator.items())
            },
        }
        for rec in sorted(result.records, key=lambda r: (r.mode, r.run))
    ]
    doc = {
        "config": config_echo,
        "ingest": ingest_summary,
        "aggregates": aggregates_as_dicts(result),
        "runs": per_run,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_importance_csv(rows: list[ImportanceRow]) -> str:
    lines = ["cell_id,operator,delta_fdp,delta_fsp"]
    for r in rows:
        lines.append(f"{r.cell_id},{r.operator},{fnum(r.delta_fdp)},{fnum(r.delta_fsp)}")
    return "\n".join(lines) + "\n"


def render_raster_csv(raster: CoverageRaster) -> str:
    lines = ["x_m,y_m,best_sinr_db"]
    for ix, iy, center in raster.centers():
        lines.append(f"{fnum(center.x)},{fnum(center.y)},{fnum(raster.values_db[iy][ix])}")
    return "\n".join(lines) + "\n"


def render_ecdf_csv(raster: CoverageRaster) -> str:
    lines = ["sinr_db,cum_fraction"]
    for value, fraction in raster_ecdf(raster):
        lines.append(f"{fnum(value)},{fnum(fraction)}")
    return "\n".join(lines) + "\n"


def render_coverage_summary(rasters: list[CoverageRaster]) -> str:
    doc = {
        "square_m": rasters[0].square_m if rasters else None,
        "gamma_min_db": rasters[0].gamma_min_db if rasters else None,
        "labels": {
            r.label: {
                "below_threshold_fraction": r.below_threshold_fraction,
                "squares": r.nx * r.ny,
                "in_region_squares": len(r.region_values_db),
            }
            for r in rasters
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def build_manifest(config_echo: dict, seed: int, version: str, files: dict[str, str]) -> dict:
    """Manifest with a content hash per artifact; enough to reproduce the bundle."""
    return {
        "tool": "cellres",
        "version": version,
        "seed": seed,
        "config": config_echo,
        "files": {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in sorted(files.items())
        },
    }


def render_manifest(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
