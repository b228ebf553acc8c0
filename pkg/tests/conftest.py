"""Shared builders for synthetic fixtures."""
import json
from pathlib import Path

import pytest

from cellres.geo import Point, PopulationCell, Region, User
from cellres.ingest import Cell, derated_power_w


def square_region(size_m: float, region_id: str = "test-region", origin=(0.0, 0.0)) -> Region:
    x0, y0 = origin
    return Region(
        id=region_id,
        boundary=(
            Point(x0, y0),
            Point(x0 + size_m, y0),
            Point(x0 + size_m, y0 + size_m),
            Point(x0, y0 + size_m),
        ),
    )


def make_cell(
    index: int,
    x: float,
    y: float,
    *,
    operator: str = "MNO1",
    frequency_mhz: float = 800.0,
    bandwidth_mhz: float = 10.0,
    eirp_dbw: float = 33.0,
    azimuth_deg: float = 0.0,
    environment: str = "UMa",
    height_m: float = 25.0,
    in_region: bool = True,
    cell_id: str | None = None,
) -> Cell:
    return Cell(
        index=index,
        id=cell_id or f"cell{index}",
        site_id=f"site{index}",
        operator=operator,
        position=Point(x, y),
        height_m=height_m,
        azimuth_deg=azimuth_deg,
        frequency_mhz=frequency_mhz,
        bandwidth_hz=bandwidth_mhz * 1e6,
        tx_power_w=derated_power_w(eirp_dbw),
        eirp_dbw=eirp_dbw,
        environment=environment,
        in_region=in_region,
    )


def make_user(uid: int, x: float, y: float, operator: str = "MNO1",
              rate_bps: float = 8e6) -> User:
    return User(id=uid, position=Point(x, y), operator=operator, rate_requirement=rate_bps)


def make_pop_cell(x: float, y: float, population: float, urbanity: int = 2) -> PopulationCell:
    return PopulationCell(origin=Point(x, y), population=population, urbanity=urbanity)


def always_los(user_key, cell_id) -> float:
    return 0.0


def never_los(user_key, cell_id) -> float:
    # LOS requires uniform < p; p < 1 beyond the always-LOS radius
    return 1.0 - 1e-15


DEMO_SPECTRUM = {
    "MNO1": {"4G": [[1474.5, 15.0]], "5G": [[773.0, 10.0]]},
    "MNO2": {"4G": [[796.0, 10.0]], "5G": [[783.0, 10.0]]},
    "MNO3": {"4G": [[763.0, 10.0]], "5G": [[1835.0, 20.0]]},
}


def write_dataset(
    tmp_path: Path,
    *,
    region_size_m: float = 2000.0,
    pop_per_cell: float = 400.0,
    sites=((500.0, 500.0), (1500.0, 500.0), (500.0, 1500.0), (1500.0, 1500.0)),
    operators=("MNO1", "MNO2", "MNO3"),
    op_freq={"MNO1": 1474.5, "MNO2": 783.0, "MNO3": 763.0},
    eirp_dbw: float = 33.0,
    urbanity: int = 2,
    runs: int = 2,
    seed: int = 7,
    mode: str = "both",
) -> Path:
    """Write a small synthetic dataset + config; returns the config path."""
    n = int(region_size_m // 500)
    pop_rows = ["cell_x_m,cell_y_m,population,urbanity"]
    for iy in range(n):
        for ix in range(n):
            pop_rows.append(f"{ix * 500.0},{iy * 500.0},{pop_per_cell},{urbanity}")
    (tmp_path / "population.csv").write_text("\n".join(pop_rows) + "\n")

    ant_rows = [
        "site_id,operator,x_m,y_m,height_m,azimuth_deg,frequency_mhz,"
        "bandwidth_mhz,eirp_dbw,technology"
    ]
    for s, (x, y) in enumerate(sites):
        op = operators[s % len(operators)]
        for az in (0.0, 120.0, 240.0):
            ant_rows.append(
                f"S{s},,{x},{y},30,{az},{op_freq[op]},10,{eirp_dbw},4G"
            )
    (tmp_path / "antennas.csv").write_text("\n".join(ant_rows) + "\n")

    region_rows = ["x_m,y_m", "0,0", f"{region_size_m},0",
                   f"{region_size_m},{region_size_m}", f"0,{region_size_m}"]
    (tmp_path / "region.csv").write_text("\n".join(region_rows) + "\n")

    (tmp_path / "spectrum.json").write_text(json.dumps(DEMO_SPECTRUM))

    config = {
        "paths": {
            "antennas": "antennas.csv",
            "population": "population.csv",
            "region": "region.csv",
            "spectrum": "spectrum.json",
        },
        "model": {"f_p": 0.01},
        "scenario": {"mode": mode, "runs": runs, "seed": seed},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return config_path


@pytest.fixture
def dataset_config(tmp_path):
    return write_dataset(tmp_path)
