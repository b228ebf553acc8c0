import math

import numpy as np
import pytest

from cellres.geo import (
    GeometryError,
    Point,
    PopulationCell,
    Region,
    TangentPlaneProjection,
    point_in_region,
    sample_users,
    scale_users,
)
from conftest import make_pop_cell, square_region


class TestPointInRegion:
    def test_interior_point(self):
        region = square_region(1.0)
        assert point_in_region(Point(0.5, 0.5), region)

    def test_exterior_point(self):
        region = square_region(1.0)
        assert not point_in_region(Point(2.0, 2.0), region)

    def test_boundary_counts_as_inside(self):
        region = square_region(1.0)
        assert point_in_region(Point(0.5, 0.0), region)
        assert point_in_region(Point(0.0, 0.0), region)

    def test_degenerate_polygon_rejected(self):
        with pytest.raises(GeometryError):
            Region(id="bad", boundary=(Point(0, 0), Point(1, 1)))

    def test_self_intersecting_polygon_rejected(self):
        bowtie = (Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1))
        with pytest.raises(GeometryError):
            Region(id="bowtie", boundary=bowtie)

    def test_non_finite_point_rejected(self):
        with pytest.raises(GeometryError):
            Point(math.nan, 0.0)


class TestPopulationCell:
    def test_negative_population_rejected(self):
        with pytest.raises(GeometryError):
            make_pop_cell(0, 0, -5)

    def test_urbanity_range(self):
        with pytest.raises(GeometryError):
            PopulationCell(origin=Point(0, 0), population=10, urbanity=6)


class TestSampleUsers:
    OPS = ("MNO1", "MNO2", "MNO3")

    def test_zero_population_gives_empty_set(self):
        cells = [make_pop_cell(0, 0, 0.0)]
        users = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=3)
        assert len(users) == 0

    def test_empirical_mean_matches_intensity(self):
        # population 5000, f_p = 0.02 -> Poisson mean 100 per draw
        cells = [make_pop_cell(0, 0, 5000.0)]
        counts = [
            len(sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=s))
            for s in range(10_000)
        ]
        mean = np.mean(counts)
        assert abs(mean - 100.0) <= 2.0  # 2% tolerance

    def test_same_seed_identical(self):
        cells = [make_pop_cell(0, 0, 2000.0), make_pop_cell(500, 0, 1000.0, urbanity=4)]
        a = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=42)
        b = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=42)
        assert a == b

    def test_different_seed_differs(self):
        cells = [make_pop_cell(0, 0, 5000.0)]
        a = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=1)
        b = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=2)
        assert a != b

    def test_positions_inside_source_cells(self):
        cells = [make_pop_cell(1000, -500, 5000.0)]
        users = sample_users(cells, 0.05, (8e6, 20e6), self.OPS, seed=11)
        assert len(users) > 0
        for u in users:
            assert 1000 <= u.position.x < 1500
            assert -500 <= u.position.y < 0

    def test_rates_inside_band(self):
        cells = [make_pop_cell(0, 0, 5000.0)]
        users = sample_users(cells, 0.05, (8e6, 20e6), self.OPS, seed=5)
        for u in users:
            assert 8e6 <= u.rate_requirement <= 20e6

    def test_operator_split_converges(self):
        cells = [make_pop_cell(0, 0, 500_000.0)]
        counts = {op: 0 for op in self.OPS}
        total = 0
        for s in range(5):
            for u in sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=s):
                counts[u.operator] += 1
                total += 1
        for op in self.OPS:
            assert abs(counts[op] / total - 1 / 3) < 0.02

    def test_custom_split(self):
        cells = [make_pop_cell(0, 0, 500_000.0)]
        users = sample_users(
            cells, 0.02, (8e6, 20e6), self.OPS, split=(0.4, 0.4, 0.2), seed=0
        )
        frac3 = sum(1 for u in users if u.operator == "MNO3") / len(users)
        assert abs(frac3 - 0.2) < 0.02

    def test_invalid_fraction_rejected(self):
        with pytest.raises(GeometryError):
            sample_users([make_pop_cell(0, 0, 10)], 1.5, (8e6, 20e6), self.OPS)

    def test_bad_split_rejected(self):
        with pytest.raises(GeometryError):
            sample_users(
                [make_pop_cell(0, 0, 10)], 0.1, (8e6, 20e6), self.OPS, split=(0.5, 0.5, 0.5)
            )


class TestScaleUsers:
    OPS = ("MNO1", "MNO2")

    def _base(self, population=5000.0, seed=9):
        cells = [make_pop_cell(0, 0, population)]
        return sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=seed)

    def test_zero_surge_is_identity(self):
        base = self._base()
        assert scale_users(base, 0.0, seed=1) is base

    def test_negative_surge_rejected(self):
        with pytest.raises(GeometryError):
            scale_users(self._base(), -1.0, seed=1)

    def test_hundred_percent_doubles_expected_count(self):
        totals = []
        for s in range(2000):
            base = self._base(seed=s)
            scaled = scale_users(base, 100.0, seed=s + 777)
            totals.append((len(base), len(scaled)))
        base_mean = np.mean([b for b, _ in totals])
        scaled_mean = np.mean([s for _, s in totals])
        assert abs(scaled_mean / base_mean - 2.0) < 0.02

    def test_surge_on_empty_population_stays_empty(self):
        cells = [make_pop_cell(0, 0, 0.0)]
        base = sample_users(cells, 0.02, (8e6, 20e6), self.OPS, seed=1)
        assert len(scale_users(base, 50.0, seed=2)) == 0

    def test_original_users_preserved(self):
        base = self._base()
        scaled = scale_users(base, 50.0, seed=3)
        assert scaled.users[: len(base)] == base.users

    def test_new_ids_do_not_collide(self):
        base = self._base()
        scaled = scale_users(base, 100.0, seed=4)
        ids = [u.id for u in scaled]
        assert len(ids) == len(set(ids))

    def test_deterministic(self):
        base = self._base()
        assert scale_users(base, 30.0, seed=5) == scale_users(base, 30.0, seed=5)


class TestProjection:
    def test_anchor_maps_to_origin(self):
        proj = TangentPlaneProjection(lat0_deg=52.0, lon0_deg=6.9)
        p = proj.to_planar(52.0, 6.9)
        assert p.x == 0.0 and p.y == 0.0

    def test_latitude_degree_scale(self):
        proj = TangentPlaneProjection(lat0_deg=52.0, lon0_deg=6.9)
        p = proj.to_planar(52.01, 6.9)
        # one degree of latitude is ~111.2 km on this sphere
        assert abs(p.y - 6_371_000.0 * math.radians(0.01)) < 1e-6

    def test_longitude_shrinks_with_latitude(self):
        proj = TangentPlaneProjection(lat0_deg=52.0, lon0_deg=6.9)
        p = proj.to_planar(52.0, 6.91)
        expected = 6_371_000.0 * math.radians(0.01) * math.cos(math.radians(52.0))
        assert abs(p.x - expected) < 1e-6
