"""Dataset ingestion: antenna registries, population grids, regions, spectrum.

Applies the cleaning rules the simulator expects: drop 2G and omnidirectional
antennas, map each antenna to its operator through spectrum ownership, derate
EIRP to 90% of the registered maximum, and classify each site as urban or
rural macro from the urbanity of the population cell it sits in.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .geo import (
    GeometryError,
    Point,
    PopulationCell,
    Region,
    TangentPlaneProjection,
    point_in_region,
)

log = logging.getLogger(__name__)

TECHNOLOGIES = ("2G", "3G", "4G", "5G")
OMNI_MARKER = "OMNI"
UMA = "UMa"
RMA = "RMa"
DEFAULT_BORDER_MARGIN_M = 2000.0

ANTENNA_HEADER_GEO = (
    "site_id,operator,lat,lon,height_m,azimuth_deg,frequency_mhz,"
    "bandwidth_mhz,eirp_dbw,technology"
)
ANTENNA_HEADER_PLANAR = (
    "site_id,operator,x_m,y_m,height_m,azimuth_deg,frequency_mhz,"
    "bandwidth_mhz,eirp_dbw,technology"
)
POPULATION_HEADER = "cell_x_m,cell_y_m,population,urbanity"

# Share of the registered maximum EIRP actually spent on transmission; the
# rest of the site power budget goes to cooling, processing, etc.
TX_POWER_DERATING = 0.9


class IngestionError(Exception):
    """Dataset cannot be ingested (bad schema, unusable contents)."""


class SchemaError(IngestionError):
    """File header or structure does not match the documented schema."""


@dataclass(frozen=True)
class RowError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class RawAntennaRecord:
    site_id: str
    operator_hint: str
    latitude: float | None
    longitude: float | None
    x_m: float | None
    y_m: float | None
    height_m: float
    azimuth_deg: float | None  # None when omnidirectional
    omnidirectional: bool
    frequency_mhz: float
    bandwidth_mhz: float
    eirp_dbw: float
    technology: str

    @property
    def is_planar(self) -> bool:
        return self.x_m is not None


@dataclass(frozen=True)
class ParseResult:
    records: tuple[RawAntennaRecord, ...]
    errors: tuple[RowError, ...]


@dataclass(frozen=True)
class FilterReport:
    removed_2g: int
    removed_omni: int


@dataclass(frozen=True)
class Cell:
    """One transmitting sector-carrier; the unit users associate with."""

    index: int
    id: str
    site_id: str
    operator: str
    position: Point
    height_m: float
    azimuth_deg: float
    frequency_mhz: float
    bandwidth_hz: float
    tx_power_w: float  # derated EIRP, linear watts, boresight gain included
    eirp_dbw: float  # raw registry value
    environment: str  # UMA or RMA
    in_region: bool = False
    border_margin: bool = False


def derated_power_w(eirp_dbw: float) -> float:
    """Linear transmit power: 90% of the registered maximum EIRP."""
    return TX_POWER_DERATING * 10.0 ** (eirp_dbw / 10.0)


def _parse_float(raw: str, field: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{field}: cannot parse {raw!r} as a number") from None
    if not math.isfinite(value):
        raise ValueError(f"{field}: non-finite value {raw!r}")
    return value


def _parse_antenna_row(row: list[str], planar: bool) -> RawAntennaRecord:
    site_id, operator = row[0].strip(), row[1].strip()
    c1 = _parse_float(row[2], "x_m" if planar else "lat")
    c2 = _parse_float(row[3], "y_m" if planar else "lon")
    height = _parse_float(row[4], "height_m")
    azimuth_raw = row[5].strip()
    if azimuth_raw.upper() == OMNI_MARKER:
        azimuth, omni = None, True
    else:
        azimuth = _parse_float(azimuth_raw, "azimuth_deg")
        if not 0.0 <= azimuth < 360.0:
            raise ValueError(f"azimuth_deg: {azimuth} outside [0, 360)")
        omni = False
    frequency = _parse_float(row[6], "frequency_mhz")
    bandwidth = _parse_float(row[7], "bandwidth_mhz")
    eirp = _parse_float(row[8], "eirp_dbw")
    technology = row[9].strip()
    if technology not in TECHNOLOGIES:
        raise ValueError(f"technology: unknown value {technology!r}")
    if frequency <= 0:
        raise ValueError(f"frequency_mhz: must be positive, got {frequency}")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth_mhz: must be positive, got {bandwidth}")
    if height <= 0:
        raise ValueError(f"height_m: must be positive, got {height}")
    return RawAntennaRecord(
        site_id=site_id,
        operator_hint=operator,
        latitude=None if planar else c1,
        longitude=None if planar else c2,
        x_m=c1 if planar else None,
        y_m=c2 if planar else None,
        height_m=height,
        azimuth_deg=azimuth,
        omnidirectional=omni,
        frequency_mhz=frequency,
        bandwidth_mhz=bandwidth,
        eirp_dbw=eirp,
        technology=technology,
    )


def parse_antenna_csv(path) -> ParseResult:
    """Parse an antenna registry CSV.

    Malformed rows are collected into the error report with their line number;
    they are never silently dropped. A wrong header is a SchemaError.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected header") from None
        header_text = ",".join(h.strip() for h in header)
        if header_text == ANTENNA_HEADER_GEO:
            planar = False
        elif header_text == ANTENNA_HEADER_PLANAR:
            planar = True
        else:
            raise SchemaError(
                f"{path}: unexpected header {header_text!r}; expected "
                f"{ANTENNA_HEADER_GEO!r} or {ANTENNA_HEADER_PLANAR!r}"
            )
        records: list[RawAntennaRecord] = []
        errors: list[RowError] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 10:
                errors.append(RowError(line_no, f"expected 10 fields, got {len(row)}"))
                continue
            try:
                records.append(_parse_antenna_row(row, planar))
            except ValueError as exc:
                errors.append(RowError(line_no, str(exc)))
    return ParseResult(records=tuple(records), errors=tuple(errors))


def serialize_antenna_records(records) -> str:
    """Render records back to CSV text (round-trips through parse)."""
    planar = any(r.is_planar for r in records)
    lines = [ANTENNA_HEADER_PLANAR if planar else ANTENNA_HEADER_GEO]
    for r in records:
        c1 = r.x_m if planar else r.latitude
        c2 = r.y_m if planar else r.longitude
        azimuth = OMNI_MARKER if r.omnidirectional else repr(r.azimuth_deg)
        lines.append(
            f"{r.site_id},{r.operator_hint},{c1!r},{c2!r},{r.height_m!r},"
            f"{azimuth},{r.frequency_mhz!r},{r.bandwidth_mhz!r},{r.eirp_dbw!r},{r.technology}"
        )
    return "\n".join(lines) + "\n"


def filter_records(records) -> tuple[tuple[RawAntennaRecord, ...], FilterReport]:
    """Drop 2G antennas and omnidirectional antennas, reporting the counts."""
    kept: list[RawAntennaRecord] = []
    removed_2g = removed_omni = 0
    for r in records:
        if r.technology == "2G":
            removed_2g += 1
        elif r.omnidirectional:
            removed_omni += 1
        else:
            kept.append(r)
    return tuple(kept), FilterReport(removed_2g=removed_2g, removed_omni=removed_omni)


class OperatorAssignmentError(IngestionError):
    """Record frequency is not covered by any operator's spectrum."""


class OperatorSpectrum:
    """Carrier ownership map: operator -> technology -> [(center, bandwidth)] MHz."""

    def __init__(self, carriers: dict[str, dict[str, list[tuple[float, float]]]]):
        self.carriers = carriers
        self.operators = tuple(sorted(carriers))
        self._check_disjoint()

    def _iter_bands(self):
        for op in self.operators:
            for tech in sorted(self.carriers[op]):
                for center, bw in self.carriers[op][tech]:
                    yield op, tech, center - bw / 2.0, center + bw / 2.0

    def _check_disjoint(self):
        bands = list(self._iter_bands())
        for i, (op_a, _, lo_a, hi_a) in enumerate(bands):
            for op_b, _, lo_b, hi_b in bands[i + 1:]:
                if op_a != op_b and lo_a < hi_b and lo_b < hi_a:
                    raise IngestionError(
                        f"spectrum carriers of {op_a} and {op_b} overlap: "
                        f"[{lo_a}, {hi_a}] vs [{lo_b}, {hi_b}] MHz"
                    )

    def owner_of(self, frequency_mhz: float) -> str | None:
        for op, _, lo, hi in self._iter_bands():
            if lo <= frequency_mhz <= hi:
                return op
        return None


def load_spectrum(path) -> OperatorSpectrum:
    with Path(path).open(encoding="utf-8") as fh:
        data = json.load(fh)
    carriers: dict[str, dict[str, list[tuple[float, float]]]] = {}
    for op, by_tech in data.items():
        carriers[op] = {}
        for tech, pairs in by_tech.items():
            carriers[op][tech] = [(float(c), float(b)) for c, b in pairs]
    if not carriers:
        raise IngestionError(f"{path}: spectrum map is empty")
    return OperatorSpectrum(carriers)


def assign_operator(record: RawAntennaRecord, spectrum: OperatorSpectrum) -> str:
    """Resolve the operator owning the record's carrier frequency.

    An explicit operator hint wins when it agrees with spectrum ownership;
    a hint that contradicts the frequency lookup is an error, as is a
    frequency outside every carrier.
    """
    owner = spectrum.owner_of(record.frequency_mhz)
    hint = record.operator_hint
    if owner is None:
        raise OperatorAssignmentError(
            f"site {record.site_id}: frequency {record.frequency_mhz} MHz "
            f"matches no operator carrier"
        )
    if hint and hint != owner:
        raise OperatorAssignmentError(
            f"site {record.site_id}: operator hint {hint!r} contradicts "
            f"spectrum owner {owner!r} at {record.frequency_mhz} MHz"
        )
    return owner


class PopulationGrid:
    """Population cells indexed on their 500 m lattice for fast lookup."""

    def __init__(self, cells):
        self.cells: tuple[PopulationCell, ...] = tuple(cells)
        if not self.cells:
            raise IngestionError("population grid is empty")
        self.size = self.cells[0].size
        self._by_key = {self._key(c.origin.x, c.origin.y): c for c in self.cells}

    def _key(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(round(x / self.size, 6)), math.floor(round(y / self.size, 6)))

    def cell_at(self, p: Point) -> PopulationCell | None:
        cell = self._by_key.get((math.floor(p.x / self.size), math.floor(p.y / self.size)))
        if cell is not None and cell.contains(p):
            return cell
        return None

    def nearest_cell(self, p: Point) -> PopulationCell:
        return min(self.cells, key=lambda c: p.distance_to(c.center))

    def cells_in_region(self, region: Region) -> tuple[PopulationCell, ...]:
        return tuple(c for c in self.cells if point_in_region(c.center, region))


def parse_population_csv(path) -> tuple[PopulationGrid, tuple[RowError, ...]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected header") from None
        if ",".join(h.strip() for h in header) != POPULATION_HEADER:
            raise SchemaError(f"{path}: expected header {POPULATION_HEADER!r}")
        cells: list[PopulationCell] = []
        errors: list[RowError] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            try:
                x = _parse_float(row[0], "cell_x_m")
                y = _parse_float(row[1], "cell_y_m")
                population = _parse_float(row[2], "population")
                urbanity = int(row[3])
                cells.append(
                    PopulationCell(origin=Point(x, y), population=population, urbanity=urbanity)
                )
            except (ValueError, IndexError, GeometryError) as exc:
                errors.append(RowError(line_no, str(exc)))
    if not cells:
        raise IngestionError(f"{path}: no population cells parsed")
    return PopulationGrid(cells), tuple(errors)


def classify_environment(position: Point, grid: PopulationGrid) -> str:
    """UMa for urbanity 1-3, RMa for 4-5, from the cell containing position."""
    cell = grid.cell_at(position)
    if cell is None:
        cell = grid.nearest_cell(position)
        log.warning(
            "position (%.1f, %.1f) outside population grid; classified by nearest cell",
            position.x,
            position.y,
        )
    return UMA if cell.urbanity <= 3 else RMA


def _looks_geographic(coords) -> bool:
    return all(abs(x) <= 360.0 and abs(y) <= 90.0 for x, y in coords)


def load_region(path, region_id: str | None = None):
    """Load a region boundary from GeoJSON (single-ring Polygon) or CSV.

    Returns (region, projection): projection is a TangentPlaneProjection when
    the ring was geographic (anchored at the ring's mean coordinate), or None
    for planar inputs.
    """
    path = Path(path)
    if path.suffix.lower() in (".json", ".geojson"):
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("type") == "Feature":
            data = data.get("geometry", {})
        if data.get("type") != "Polygon":
            raise SchemaError(f"{path}: expected a GeoJSON Polygon")
        rings = data.get("coordinates", [])
        if len(rings) != 1:
            raise SchemaError(f"{path}: expected a single-ring polygon, got {len(rings)} rings")
        coords = [(float(x), float(y)) for x, y in rings[0]]
        name = region_id or data.get("id") or path.stem
    else:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x_m", "y_m"]:
                raise SchemaError(f"{path}: expected header 'x_m,y_m'")
            coords = [(float(r[0]), float(r[1])) for r in reader if r]
        name = region_id or path.stem
    if len(coords) >= 2 and coords[0] == coords[-1]:
        coords = coords[:-1]
    projection = None
    if path.suffix.lower() in (".json", ".geojson") and _looks_geographic(coords):
        lon0 = sum(c[0] for c in coords) / len(coords)
        lat0 = sum(c[1] for c in coords) / len(coords)
        projection = TangentPlaneProjection(lat0_deg=lat0, lon0_deg=lon0)
        points = tuple(projection.to_planar(lat, lon) for lon, lat in coords)
    else:
        points = tuple(Point(x, y) for x, y in coords)
    try:
        region = Region(id=name, boundary=points)
    except GeometryError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    return region, projection


def build_cells(
    records,
    spectrum: OperatorSpectrum,
    grid: PopulationGrid,
    projection: TangentPlaneProjection | None = None,
) -> tuple[tuple[Cell, ...], tuple[str, ...]]:
    """Turn filtered records into Cells: operator, planar position, environment.

    Records whose operator cannot be resolved are quarantined and reported,
    not silently dropped. Cell ids are stable strings derived from the record,
    deduplicated in file order.
    """
    cells: list[Cell] = []
    quarantined: list[str] = []
    seen_ids: dict[str, int] = {}
    for record in records:
        if record.omnidirectional:
            quarantined.append(
                f"site {record.site_id}: omnidirectional record reached cell "
                f"construction; run filter_records first"
            )
            continue
        try:
            operator = assign_operator(record, spectrum)
        except OperatorAssignmentError as exc:
            quarantined.append(str(exc))
            continue
        if record.is_planar:
            position = Point(record.x_m, record.y_m)
        else:
            if projection is None:
                raise IngestionError(
                    f"site {record.site_id}: geographic coordinates but no projection "
                    f"(region boundary was planar)"
                )
            position = projection.to_planar(record.latitude, record.longitude)
        cell_id = f"{record.site_id}:{record.frequency_mhz:g}:{record.azimuth_deg:g}"
        if cell_id in seen_ids:
            seen_ids[cell_id] += 1
            cell_id = f"{cell_id}#{seen_ids[cell_id]}"
        else:
            seen_ids[cell_id] = 1
        cells.append(
            Cell(
                index=len(cells),
                id=cell_id,
                site_id=record.site_id,
                operator=operator,
                position=position,
                height_m=record.height_m,
                azimuth_deg=record.azimuth_deg,
                frequency_mhz=record.frequency_mhz,
                bandwidth_hz=record.bandwidth_mhz * 1e6,
                tx_power_w=derated_power_w(record.eirp_dbw),
                eirp_dbw=record.eirp_dbw,
                environment=classify_environment(position, grid),
            )
        )
    return tuple(cells), tuple(quarantined)


def select_cells_for_region(cells, region: Region, margin: float = DEFAULT_BORDER_MARGIN_M):
    """Keep cells inside the region plus cells within margin meters outside.

    Inside cells are flagged in_region; the outside-but-close ones get
    border_margin so they can serve and interfere without counting as the
    region's own infrastructure. Cell indexes are re-assigned contiguously.
    """
    if margin < 0:
        raise IngestionError(f"border margin must be >= 0, got {margin}")
    selected: list[Cell] = []
    for cell in cells:
        if point_in_region(cell.position, region):
            selected.append(
                replace(cell, index=len(selected), in_region=True, border_margin=False)
            )
        elif region.boundary_distance(cell.position) <= margin:
            selected.append(
                replace(cell, index=len(selected), in_region=False, border_margin=True)
            )
    return tuple(selected)
