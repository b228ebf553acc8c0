"""Failure injection, roaming modes, user surges, and the experiment driver.

A scenario is repeated over independent runs; every source of randomness in a
run (user draws, surge draws, LOS states, association order, failure draws)
lives in its own labeled stream derived from the scenario seed, so runs are
reproducible and the per-operator and roaming variants of a run are paired on
identical populations and channel states.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import rng
from .association import (
    MODE_BOTH,
    MODE_PER_OPERATOR,
    MODE_ROAMING,
    AssociationState,
    associate,
)
from .geo import Point, Region, UserSet, sample_users, scale_users
from .metrics import (
    ALL_OPERATORS,
    MetricsReport,
    allocate_throughputs,
    build_report,
)
from .radio import LinkModel, NoiseModel

log = logging.getLogger(__name__)

FAILURE_NONE = "none"
FAILURE_ISOLATED = "isolated"
FAILURE_CORRELATED = "correlated"
FAILURE_SWEEP = "single-bs-sweep"

THREADS_ENV_VAR = "CELLRES_THREADS"


class ScenarioError(ValueError):
    """Scenario cannot be executed on the given inputs."""


@dataclass(frozen=True)
class ModelParams:
    """Model constants shared by every run of a scenario."""

    operators: tuple[str, ...]
    gamma_min_db: float = 5.0
    f_p: float = 0.02
    r_max_m: float = 5000.0
    rate_band_bps: tuple[float, float] = (8e6, 20e6)
    noise_figure_db: float = 7.8
    thermal_dbm_hz: float = -174.0
    border_margin_m: float = 2000.0
    coordination_k: int = 3
    shadow_fading: bool = False
    ut_height_m: float = 1.5
    split: tuple[float, ...] | None = None


@dataclass(frozen=True)
class FailureSpec:
    kind: str = FAILURE_NONE
    p_iso: float = 0.0
    center: Point | None = None  # None: region centroid
    r_fail_m: float = 0.0

    def __post_init__(self):
        if self.kind not in (FAILURE_NONE, FAILURE_ISOLATED, FAILURE_CORRELATED, FAILURE_SWEEP):
            raise ScenarioError(f"unknown failure kind {self.kind!r}")
        if not 0.0 <= self.p_iso <= 1.0:
            raise ScenarioError(f"p_iso must be in [0, 1], got {self.p_iso}")
        if self.r_fail_m < 0:
            raise ScenarioError(f"r_fail must be >= 0, got {self.r_fail_m}")


@dataclass(frozen=True)
class ScenarioSpec:
    mode: str = MODE_BOTH
    failure: FailureSpec = field(default_factory=FailureSpec)
    p_pop: float = 0.0
    runs: int = 100
    seed: int = 0
    region_id: str | None = None

    def __post_init__(self):
        if self.mode not in (MODE_PER_OPERATOR, MODE_ROAMING, MODE_BOTH):
            raise ScenarioError(f"unknown mode {self.mode!r}")
        if self.runs < 1:
            raise ScenarioError(f"runs must be >= 1, got {self.runs}")
        if self.p_pop < 0:
            raise ScenarioError(f"p_pop must be >= 0, got {self.p_pop}")

    @property
    def resolved_modes(self) -> tuple[str, ...]:
        if self.mode == MODE_BOTH:
            return (MODE_PER_OPERATOR, MODE_ROAMING)
        return (self.mode,)


def apply_isolated_failures(cells, p_iso: float, seed: int):
    """Fail every cell independently with probability p_iso.

    Draws are keyed by (seed, cell id), so the fate of a cell does not depend
    on which other cells are present.
    """
    if not 0.0 <= p_iso <= 1.0:
        raise ScenarioError(f"p_iso must be in [0, 1], got {p_iso}")
    return tuple(c for c in cells if rng.uniform_hash(seed, c.id) >= p_iso)


def apply_correlated_failure(cells, center: Point, r_fail_m: float):
    """Fail every cell within r_fail meters of the disaster center."""
    if r_fail_m < 0:
        raise ScenarioError(f"r_fail must be >= 0, got {r_fail_m}")
    return tuple(c for c in cells if c.position.distance_to(center) > r_fail_m)


@dataclass(frozen=True)
class AggregateStats:
    fdp_mean: float
    fdp_std: float
    fsp_mean: float
    fsp_std: float
    runs: int


@dataclass(frozen=True)
class RunRecord:
    run: int
    mode: str
    report: MetricsReport


@dataclass(frozen=True)
class ScenarioResult:
    spec: ScenarioSpec
    records: tuple[RunRecord, ...]
    aggregates: dict  # (mode, operator label) -> AggregateStats


@dataclass(frozen=True)
class ImportanceRow:
    cell_id: str
    operator: str
    delta_fdp: float
    delta_fsp: float


def worker_count(runs: int) -> int:
    """Worker cap from CELLRES_THREADS (0 or unset = auto)."""
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ScenarioError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if cap <= 0:
        cap = min(32, os.cpu_count() or 1)
    return max(1, min(cap, runs))


def _mean(values) -> float:
    return float(np.mean(values)) if values else 0.0


def _std(values) -> float:
    # population std: well defined for a single run
    return float(np.std(values)) if values else 0.0


class ScenarioRunner:
    """Executes runs of one scenario over an ingested region."""

    def __init__(self, spec: ScenarioSpec, cells, population_cells, region: Region,
                 params: ModelParams):
        if not cells:
            raise ScenarioError("empty network: no cells to simulate")
        if not population_cells:
            log.warning("empty population grid for region %s; metrics will be degenerate",
                        region.id)
        self.spec = spec
        self.cells = tuple(cells)
        self.population_cells = tuple(population_cells)
        self.region = region
        self.params = params

    def sample_run_users(self, run: int) -> UserSet:
        users = sample_users(
            self.population_cells,
            self.params.f_p,
            self.params.rate_band_bps,
            self.params.operators,
            split=self.params.split,
            seed=rng.derive_seed(self.spec.seed, "users", run),
        )
        if self.spec.p_pop > 0:
            users = scale_users(users, self.spec.p_pop,
                                seed=rng.derive_seed(self.spec.seed, "surge", run))
        return users

    def surviving_cells(self, run: int):
        failure = self.spec.failure
        cells = self.cells
        if failure.kind == FAILURE_ISOLATED:
            cells = apply_isolated_failures(
                cells, failure.p_iso, rng.derive_seed(self.spec.seed, "failures", run)
            )
        elif failure.kind == FAILURE_CORRELATED:
            center = failure.center or self.region.centroid
            cells = apply_correlated_failure(cells, center, failure.r_fail_m)
        return cells

    def link_model(self, run: int, cells, rx_cache: dict | None = None) -> LinkModel:
        seed = self.spec.seed

        def link_uniform(user_key, cell_id):
            return rng.uniform_hash(seed, "los", run, user_key, cell_id)

        shadow_normal = None
        if self.params.shadow_fading:
            norm = NormalDist()

            def shadow_normal(user_key, cell_id):
                u = rng.uniform_hash(seed, "shadow", run, user_key, cell_id)
                return norm.inv_cdf(min(max(u, 1e-12), 1.0 - 1e-12))

        return LinkModel(
            cells,
            r_max_m=self.params.r_max_m,
            coordination_k=self.params.coordination_k,
            noise=NoiseModel(self.params.thermal_dbm_hz, self.params.noise_figure_db),
            ut_height_m=self.params.ut_height_m,
            link_uniform=link_uniform,
            shadow_normal=shadow_normal,
            rx_cache=rx_cache,
        )

    def evaluate(self, run: int, users, cells, mode: str,
                 rx_cache: dict | None = None) -> MetricsReport:
        link = self.link_model(run, cells, rx_cache)
        state = associate(
            users,
            cells,
            link,
            self.params.gamma_min_db,
            mode=mode,
            order_seed=rng.derive_seed(self.spec.seed, "assoc", run),
        )
        throughputs = allocate_throughputs(users, state, cells)
        return build_report(users, state, throughputs, self.params.operators)

    def _run_once(self, run: int) -> list[RunRecord]:
        users = self.sample_run_users(run)
        cells = self.surviving_cells(run)
        records = []
        for mode in self.spec.resolved_modes:
            if cells:
                report = self.evaluate(run, users, cells, mode)
            else:
                # every cell failed: everyone is disconnected
                report = self._all_failed_report(users)
            records.append(RunRecord(run=run, mode=mode, report=report))
        return records

    def _all_failed_report(self, users) -> MetricsReport:
        state = AssociationState()
        state.unassigned = [u.id for u in users]
        return build_report(users, state, {}, self.params.operators)

    def run(self) -> ScenarioResult:
        runs = range(1, self.spec.runs + 1)
        with ThreadPoolExecutor(max_workers=worker_count(self.spec.runs)) as pool:
            per_run = list(pool.map(self._run_once, runs))
        records = tuple(rec for batch in per_run for rec in batch)
        return ScenarioResult(
            spec=self.spec, records=records, aggregates=aggregate(records, self.params.operators)
        )

    def importance_sweep(self) -> dict[str, list[ImportanceRow]]:
        """Per-cell FDP/FSP drop from failing that single cell, per mode.

        Runs the no-failure baseline and, for every in-region cell, the same
        runs without that cell; all random draws are shared, so each delta is
        a paired difference averaged over runs.
        """
        targets = [c for c in self.cells if c.in_region]
        base_vals: dict[str, list[MetricsReport]] = {m: [] for m in self.spec.resolved_modes}
        minus_vals: dict[tuple[str, int], list[MetricsReport]] = {
            (m, c.index): [] for m in self.spec.resolved_modes for c in targets
        }

        def sweep_run(run: int):
            users = self.sample_run_users(run)
            rx_cache: dict = {}  # received powers are shared by every subset
            out = {}
            for mode in self.spec.resolved_modes:
                out[(mode, None)] = self.evaluate(run, users, self.cells, mode, rx_cache)
                for cell in targets:
                    remaining = [c for c in self.cells if c.index != cell.index]
                    if remaining:
                        report = self.evaluate(run, users, remaining, mode, rx_cache)
                    else:
                        report = self._all_failed_report(users)
                    out[(mode, cell.index)] = report
            return out

        runs = range(1, self.spec.runs + 1)
        with ThreadPoolExecutor(max_workers=worker_count(self.spec.runs)) as pool:
            results = list(pool.map(sweep_run, runs))
        for out in results:
            for (mode, cell_index), report in out.items():
                if cell_index is None:
                    base_vals[mode].append(report)
                else:
                    minus_vals[(mode, cell_index)].append(report)
        table: dict[str, list[ImportanceRow]] = {}
        for mode in self.spec.resolved_modes:
            base_fdp = _mean([r.fdp for r in base_vals[mode]])
            base_fsp = _mean([r.fsp for r in base_vals[mode]])
            rows = [
                ImportanceRow(
                    cell_id=cell.id,
                    operator=cell.operator,
                    delta_fdp=base_fdp - _mean([r.fdp for r in minus_vals[(mode, cell.index)]]),
                    delta_fsp=base_fsp - _mean([r.fsp for r in minus_vals[(mode, cell.index)]]),
                )
                for cell in targets
            ]
            rows.sort(key=lambda r: (-r.delta_fsp, r.cell_id))
            table[mode] = rows
        return table


def aggregate(records, operators) -> dict:
    """Mean/std of FDP and FSP per (mode, operator label) across runs."""
    labels = [ALL_OPERATORS, *operators]
    out = {}
    modes = sorted({r.mode for r in records})
    for mode in modes:
        mode_reports = [r.report for r in sorted(records, key=lambda r: r.run) if r.mode == mode]
        for label in labels:
            if label == ALL_OPERATORS:
                fdp = [rep.fdp for rep in mode_reports]
                fsp = [rep.fsp for rep in mode_reports]
            else:
                fdp = [rep.per_operator[label].fdp for rep in mode_reports]
                fsp = [rep.per_operator[label].fsp for rep in mode_reports]
            out[(mode, label)] = AggregateStats(
                fdp_mean=_mean(fdp),
                fdp_std=_std(fdp),
                fsp_mean=_mean(fsp),
                fsp_std=_std(fsp),
                runs=len(fdp),
            )
    return out


def run_scenario(spec: ScenarioSpec, cells, population_cells, region: Region,
                 params: ModelParams) -> ScenarioResult:
    """Execute a scenario end to end; identical spec and seed give identical results.

    A single-bs-sweep failure spec runs the no-failure baseline here; the
    per-cell sweep itself is exposed by importance_sweep.
    """
    return ScenarioRunner(spec, cells, population_cells, region, params).run()


def importance_sweep(spec: ScenarioSpec, cells, population_cells, region: Region,
                     params: ModelParams) -> dict[str, list[ImportanceRow]]:
    return ScenarioRunner(spec, cells, population_cells, region, params).importance_sweep()
