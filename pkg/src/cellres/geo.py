"""Planar geometry, region membership, population grid, and user sampling.

All geometry is planar meters (x east, y north). Geographic inputs are
converted at ingestion time through a local tangent-plane projection; see
:class:`TangentPlaneProjection`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import Point as _ShapelyPoint
from shapely.geometry import Polygon as _ShapelyPolygon

EARTH_RADIUS_M = 6_371_000.0
POPULATION_CELL_SIZE_M = 500.0

# Wildcard subscription: a user (or probe) allowed to attach to any operator.
ANY_OPERATOR = "ROAMING-ANY"


class GeometryError(ValueError):
    """Degenerate or invalid geometric input."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Region:
    """Simple polygon with an id; boundary vertices in order, meters."""

    id: str
    boundary: tuple[Point, ...]

    def __post_init__(self):
        if len(self.boundary) < 3:
            raise GeometryError(
                f"region {self.id!r}: polygon needs >= 3 vertices, got {len(self.boundary)}"
            )
        polygon = _ShapelyPolygon([(p.x, p.y) for p in self.boundary])
        if not polygon.is_valid or polygon.area <= 0.0:
            raise GeometryError(f"region {self.id!r}: boundary is not a simple polygon")
        object.__setattr__(self, "_polygon", polygon)

    @property
    def centroid(self) -> Point:
        c = self._polygon.centroid
        return Point(c.x, c.y)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) of the boundary."""
        return self._polygon.bounds

    def contains(self, p: Point) -> bool:
        # covers(): boundary points count as inside
        return self._polygon.covers(_ShapelyPoint(p.x, p.y))

    def boundary_distance(self, p: Point) -> float:
        """Distance from p to the region; 0 when inside or on the boundary."""
        return self._polygon.distance(_ShapelyPoint(p.x, p.y))


def point_in_region(p: Point, r: Region) -> bool:
    """True iff p is inside r or on its boundary."""
    return r.contains(p)


@dataclass(frozen=True)
class PopulationCell:
    """One square of the population grid; origin is the southwest corner."""

    origin: Point
    population: float
    urbanity: int
    size: float = POPULATION_CELL_SIZE_M

    def __post_init__(self):
        if self.population < 0:
            raise GeometryError(f"negative population {self.population} at {self.origin}")
        if self.urbanity not in (1, 2, 3, 4, 5):
            raise GeometryError(f"urbanity must be in 1..5, got {self.urbanity}")
        if self.size <= 0:
            raise GeometryError(f"cell size must be positive, got {self.size}")

    @property
    def center(self) -> Point:
        return Point(self.origin.x + self.size / 2.0, self.origin.y + self.size / 2.0)

    def contains(self, p: Point) -> bool:
        # half-open square: shared edges belong to exactly one cell
        return (
            self.origin.x <= p.x < self.origin.x + self.size
            and self.origin.y <= p.y < self.origin.y + self.size
        )


@dataclass(frozen=True)
class User:
    id: int
    position: Point
    operator: str
    rate_requirement: float  # bits/s


@dataclass(frozen=True)
class SamplingSpec:
    """Inputs that produced a UserSet; kept so the set can be rescaled."""

    cells: tuple[PopulationCell, ...]
    f_p: float
    rate_band: tuple[float, float]  # bits/s
    operators: tuple[str, ...]
    split: tuple[float, ...]


@dataclass(frozen=True)
class UserSet:
    users: tuple[User, ...]
    seed: int
    spec: SamplingSpec | None = None

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self):
        return iter(self.users)


def _validate_split(operators, split) -> tuple[float, ...]:
    if split is None:
        split = [1.0 / len(operators)] * len(operators)
    if len(split) != len(operators):
        raise GeometryError("operator split length does not match operator list")
    if any(s < 0 for s in split) or abs(sum(split) - 1.0) > 1e-9:
        raise GeometryError(f"operator split must be non-negative and sum to 1, got {split}")
    return tuple(split)


def _draw_users(gen: np.random.Generator, spec: SamplingSpec, intensity_scale: float,
                first_id: int) -> list[User]:
    rate_lo, rate_hi = spec.rate_band
    users: list[User] = []
    next_id = first_id
    for cell in spec.cells:
        lam = cell.population * spec.f_p * intensity_scale
        n = int(gen.poisson(lam)) if lam > 0 else 0
        if n == 0:
            continue
        xy = gen.random((n, 2)) * cell.size
        ops = gen.choice(len(spec.operators), size=n, p=spec.split)
        rates = gen.uniform(rate_lo, rate_hi, size=n)
        for k in range(n):
            users.append(
                User(
                    id=next_id,
                    position=Point(cell.origin.x + xy[k, 0], cell.origin.y + xy[k, 1]),
                    operator=spec.operators[int(ops[k])],
                    rate_requirement=float(rates[k]),
                )
            )
            next_id += 1
    return users


def sample_users(
    cells,
    f_p: float,
    rate_band: tuple[float, float],
    operators,
    split=None,
    seed: int = 0,
) -> UserSet:
    """Sample active users over the population grid.

    Per cell the user count is Poisson(population * f_p); positions are
    uniform within the cell, operators follow the split fractions, and each
    user draws a rate requirement uniform in rate_band (bits/s). The result is
    fully determined by the seed.
    """
    if not 0.0 <= f_p <= 1.0:
        raise GeometryError(f"f_p must be in [0, 1], got {f_p}")
    if rate_band[0] > rate_band[1] or rate_band[0] < 0:
        raise GeometryError(f"invalid rate band {rate_band}")
    if not operators:
        raise GeometryError("operator list is empty")
    spec = SamplingSpec(
        cells=tuple(cells),
        f_p=f_p,
        rate_band=(float(rate_band[0]), float(rate_band[1])),
        operators=tuple(operators),
        split=_validate_split(operators, split),
    )
    gen = np.random.default_rng(seed)
    return UserSet(users=tuple(_draw_users(gen, spec, 1.0, 0)), seed=seed, spec=spec)


def scale_users(user_set: UserSet, p_pop: float, seed: int) -> UserSet:
    """Add a p_pop percent user surge on top of an existing UserSet.

    Extra users come from the same Poisson procedure with intensity scaled by
    p_pop / 100; the original users (ids, positions, rates) are untouched so
    scenario comparisons stay paired.
    """
    if p_pop < 0:
        raise GeometryError(f"p_pop must be >= 0, got {p_pop}")
    if p_pop == 0:
        return user_set
    if user_set.spec is None:
        if not user_set.users:
            return user_set
        raise GeometryError("cannot scale a UserSet without its sampling spec")
    gen = np.random.default_rng(seed)
    first_id = max((u.id for u in user_set.users), default=-1) + 1
    extra = _draw_users(gen, user_set.spec, p_pop / 100.0, first_id)
    return UserSet(users=user_set.users + tuple(extra), seed=user_set.seed, spec=user_set.spec)


@dataclass(frozen=True)
class TangentPlaneProjection:
    """Equirectangular projection anchored at (lat0, lon0).

    Adequate at municipality/province scale; country-scale users should supply
    data already in a national planar grid, which passes through unchanged.
    """

    lat0_deg: float
    lon0_deg: float

    def to_planar(self, lat_deg: float, lon_deg: float) -> Point:
        x = EARTH_RADIUS_M * math.radians(lon_deg - self.lon0_deg) * math.cos(
            math.radians(self.lat0_deg)
        )
        y = EARTH_RADIUS_M * math.radians(lat_deg - self.lat0_deg)
        return Point(x, y)
