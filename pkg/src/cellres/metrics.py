"""Resilience metrics over an associated network state.

FDP is the fraction of users whose best link fails the SINR threshold (they
end up unassigned); FSP is the fraction of users that are connected and whose
allocated throughput meets their rate requirement. Satisfaction implies
connection by construction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .association import AssociationState
from .geo import Point, Region, point_in_region
from .radio import LinkModel, allocate_bandwidth, min_bandwidth, throughput

log = logging.getLogger(__name__)

ALL_OPERATORS = "all"


def allocate_throughputs(users, state: AssociationState, cells) -> dict[int, float]:
    """Per-user throughput after proportional bandwidth allocation.

    Each cell splits its bandwidth among its connected users proportionally to
    the bandwidth each would need to hit its rate requirement.
    """
    users_by_id = {u.id: u for u in users}
    cells_by_index = {c.index: c for c in cells}
    result: dict[int, float] = {}
    by_cell: dict[int, list[int]] = {}
    for user_id, cell_index in state.assigned.items():
        by_cell.setdefault(cell_index, []).append(user_id)
    for cell_index, user_ids in by_cell.items():
        user_ids.sort()
        cell = cells_by_index[cell_index]
        needs = [
            min_bandwidth(users_by_id[uid].rate_requirement, state.budgets[uid].sinr)
            for uid in user_ids
        ]
        shares = allocate_bandwidth(needs)
        for uid, share in zip(user_ids, shares):
            result[uid] = throughput(share, cell.bandwidth_hz, state.budgets[uid].sinr)
    return result


@dataclass(frozen=True)
class OperatorMetrics:
    fdp: float
    fsp: float
    users: int


@dataclass(frozen=True)
class MetricsReport:
    fdp: float
    fsp: float
    disconnected_flags: tuple[int, ...]  # aligned with users sorted by id
    satisfied_flags: tuple[int, ...]
    user_ids: tuple[int, ...]
    per_operator: dict[str, OperatorMetrics]

    @property
    def users(self) -> int:
        return len(self.user_ids)


def compute_fdp(users, state: AssociationState) -> tuple[float, dict[int, int]]:
    """FDP and the per-user disconnection flags.

    A user is disconnected iff association left it without a serving cell
    (no candidate reached the SINR threshold).
    """
    users = sorted(users, key=lambda u: u.id)
    if not users:
        log.warning("FDP over an empty user set; defined as 0")
        return 0.0, {}
    flags = {u.id: int(u.id not in state.assigned) for u in users}
    return sum(flags.values()) / len(users), flags


def compute_fsp(users, state: AssociationState,
                throughputs: dict[int, float]) -> tuple[float, dict[int, int]]:
    """FSP and the per-user satisfaction flags.

    Satisfaction requires a serving cell and an allocated throughput at or
    above the user's rate requirement.
    """
    users = sorted(users, key=lambda u: u.id)
    if not users:
        log.warning("FSP over an empty user set; defined as 0")
        return 0.0, {}
    flags = {
        u.id: int(
            u.id in state.assigned and throughputs.get(u.id, 0.0) >= u.rate_requirement
        )
        for u in users
    }
    return sum(flags.values()) / len(users), flags


def build_report(users, state: AssociationState, throughputs: dict[int, float],
                 operators) -> MetricsReport:
    users = sorted(users, key=lambda u: u.id)
    fdp, dis_flags = compute_fdp(users, state)
    fsp, sat_flags = compute_fsp(users, state, throughputs)
    per_operator: dict[str, OperatorMetrics] = {}
    for op in operators:
        op_users = [u for u in users if u.operator == op]
        if op_users:
            per_operator[op] = OperatorMetrics(
                fdp=sum(dis_flags[u.id] for u in op_users) / len(op_users),
                fsp=sum(sat_flags[u.id] for u in op_users) / len(op_users),
                users=len(op_users),
            )
        else:
            per_operator[op] = OperatorMetrics(fdp=0.0, fsp=0.0, users=0)
    return MetricsReport(
        fdp=fdp,
        fsp=fsp,
        disconnected_flags=tuple(dis_flags[u.id] for u in users),
        satisfied_flags=tuple(sat_flags[u.id] for u in users),
        user_ids=tuple(u.id for u in users),
        per_operator=per_operator,
    )


def bs_importance(cells, cell_index: int, baseline: MetricsReport, evaluate):
    """Importance of one cell: metric drop caused by its failure.

    evaluate(cells_without_j) must recompute association and metrics on the
    same users and random draws as the baseline. Returns
    (delta_fdp, delta_fsp) = (before - after) for each metric.
    """
    if all(c.index != cell_index for c in cells):
        raise KeyError(f"unknown cell index {cell_index}")
    remaining = [c for c in cells if c.index != cell_index]
    after = evaluate(remaining)
    return baseline.fdp - after.fdp, baseline.fsp - after.fsp


RASTER_SQUARE_M = 50.0
PROBE_USER_RATE = 0.0  # probes measure SINR only


@dataclass(frozen=True)
class CoverageRaster:
    """Best-SINR raster over the region's bounding box.

    Values are the maximum SINR (dB) a load-free probe at the square center
    reaches over its candidate cells; squares with no candidate in range get
    -inf. The below-threshold fraction counts only squares whose center lies
    inside the region.
    """

    label: str
    origin: Point
    square_m: float
    nx: int
    ny: int
    values_db: tuple[tuple[float, ...], ...]  # [iy][ix]
    in_region: tuple[tuple[bool, ...], ...]
    gamma_min_db: float

    def centers(self):
        for iy in range(self.ny):
            for ix in range(self.nx):
                yield ix, iy, Point(
                    self.origin.x + (ix + 0.5) * self.square_m,
                    self.origin.y + (iy + 0.5) * self.square_m,
                )

    @property
    def region_values_db(self) -> list[float]:
        return [
            self.values_db[iy][ix]
            for iy in range(self.ny)
            for ix in range(self.nx)
            if self.in_region[iy][ix]
        ]

    @property
    def below_threshold_fraction(self) -> float:
        vals = self.region_values_db
        if not vals:
            return 1.0
        return sum(1 for v in vals if v < self.gamma_min_db) / len(vals)


def coverage_raster(
    region: Region,
    cells,
    link: LinkModel,
    *,
    label: str,
    operator: str | None = None,
    gamma_min_db: float,
    square_m: float = RASTER_SQUARE_M,
) -> CoverageRaster:
    """Probe the best achievable SINR on a square grid over the region.

    operator=None means roaming (all cells are candidates); otherwise only
    that operator's cells count. Empty-population squares are rastered like
    any other: area coverage does not depend on residents.
    """
    min_x, min_y, max_x, max_y = region.bounds
    nx = max(1, math.ceil((max_x - min_x) / square_m))
    ny = max(1, math.ceil((max_y - min_y) / square_m))
    origin = Point(min_x, min_y)
    values: list[list[float]] = []
    mask: list[list[bool]] = []
    for iy in range(ny):
        row_vals: list[float] = []
        row_mask: list[bool] = []
        for ix in range(nx):
            center = Point(min_x + (ix + 0.5) * square_m, min_y + (iy + 0.5) * square_m)
            best = -math.inf
            for cell in link.cells_within(center):
                if operator is not None and cell.operator != operator:
                    continue
                budget = link.link_budget(("probe", ix, iy), center, cell)
                if budget.sinr_db > best:
                    best = budget.sinr_db
            row_vals.append(best)
            row_mask.append(point_in_region(center, region))
        values.append(row_vals)
        mask.append(row_mask)
    return CoverageRaster(
        label=label,
        origin=origin,
        square_m=square_m,
        nx=nx,
        ny=ny,
        values_db=tuple(tuple(r) for r in values),
        in_region=tuple(tuple(r) for r in mask),
        gamma_min_db=gamma_min_db,
    )


def raster_ecdf(raster: CoverageRaster) -> list[tuple[float, float]]:
    """(sinr_db, cumulative fraction) pairs over the in-region squares."""
    vals = sorted(raster.region_values_db)
    n = len(vals)
    return [(v, (i + 1) / n) for i, v in enumerate(vals)]
