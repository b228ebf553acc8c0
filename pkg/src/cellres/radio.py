"""Propagation, antenna gain, noise, interference, SINR, and capacity.

Path loss and line-of-sight probabilities follow the 3GPP TR 38.901 outdoor
macro models (RMa and UMa). All SINR arithmetic happens in linear units; dB
appears only at the interfaces.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

from scipy.spatial import cKDTree

from .geo import Point, User
from .ingest import RMA, UMA, Cell

log = logging.getLogger(__name__)

# Propagation velocity as fixed by the 38.901 breakpoint-distance notes.
PROPAGATION_C = 3.0e8

# RMa environment defaults (average building height / street width).
RMA_BUILDING_HEIGHT_M = 5.0
RMA_STREET_WIDTH_M = 20.0
# UMa effective environment height, valid for UT heights up to 13 m.
UMA_EFFECTIVE_ENV_HEIGHT_M = 1.0

# Model validity floor for 2D distance; shorter links are clamped.
MIN_DISTANCE_2D_M = 10.0

DEFAULT_UT_HEIGHT_M = 1.5

# Sector pattern constants: 3 dB beamwidth and the back-lobe floor.
PHI_3DB_DEG = 65.0
MAX_ATTENUATION_DB = 20.0


class RadioModelError(ValueError):
    """Inputs outside the propagation model's validity."""


def horizontal_gain(phi_deg: float) -> float:
    """Sector antenna attenuation A_H(phi) in dB (non-positive).

    -min{12 (phi / 65)^2, 20}; phi is the horizontal misalignment from
    boresight, folded into [-180, 180]. The boresight gain itself is already
    part of the registered EIRP, so this is the only gain term applied.
    """
    phi = math.remainder(phi_deg, 360.0)
    return -min(12.0 * (phi / PHI_3DB_DEG) ** 2, MAX_ATTENUATION_DB)


def bearing_deg(origin: Point, target: Point) -> float:
    """Compass bearing origin -> target (0 = north/+y, 90 = east/+x)."""
    return math.degrees(math.atan2(target.x - origin.x, target.y - origin.y)) % 360.0


def los_probability(environment: str, distance_2d: float,
                    ut_height_m: float = DEFAULT_UT_HEIGHT_M) -> float:
    """Outdoor LOS probability per TR 38.901 for RMa/UMa."""
    d = distance_2d
    if d < 0:
        raise RadioModelError(f"negative distance {d}")
    if environment == RMA:
        if d <= 10.0:
            return 1.0
        return math.exp(-(d - 10.0) / 1000.0)
    if environment == UMA:
        if d <= 18.0:
            return 1.0
        base = 18.0 / d + math.exp(-d / 63.0) * (1.0 - 18.0 / d)
        if ut_height_m <= 13.0:
            c_h = 0.0
        else:
            c_h = ((min(ut_height_m, 23.0) - 13.0) / 10.0) ** 1.5
        return base * (1.0 + c_h * 1.25 * (d / 100.0) ** 3 * math.exp(-d / 150.0))
    raise RadioModelError(f"unknown environment {environment!r}")


@dataclass(frozen=True)
class PropagationParams:
    environment: str  # UMA or RMA
    bs_height_m: float
    carrier_ghz: float
    ut_height_m: float = DEFAULT_UT_HEIGHT_M

    def __post_init__(self):
        if self.environment not in (UMA, RMA):
            raise RadioModelError(f"unknown environment {self.environment!r}")
        if not 0.5 <= self.carrier_ghz <= 100.0:
            raise RadioModelError(
                f"carrier {self.carrier_ghz} GHz outside model validity (0.5-100 GHz)"
            )
        if self.bs_height_m <= 0 or self.ut_height_m <= 0:
            raise RadioModelError("antenna heights must be positive")


def _rma_pl1(d3d: float, fc_ghz: float, h: float) -> float:
    return (
        20.0 * math.log10(40.0 * math.pi * d3d * fc_ghz / 3.0)
        + min(0.03 * h**1.72, 10.0) * math.log10(d3d)
        - min(0.044 * h**1.72, 14.77)
        + 0.002 * math.log10(h) * d3d
    )


def _rma_los(d2d: float, d3d: float, p: PropagationParams) -> float:
    h = RMA_BUILDING_HEIGHT_M
    d_bp = 2.0 * math.pi * p.bs_height_m * p.ut_height_m * (p.carrier_ghz * 1e9) / PROPAGATION_C
    if d2d <= d_bp:
        return _rma_pl1(d3d, p.carrier_ghz, h)
    return _rma_pl1(d_bp, p.carrier_ghz, h) + 40.0 * math.log10(d3d / d_bp)


def _rma_nlos(d2d: float, d3d: float, p: PropagationParams) -> float:
    h, w = RMA_BUILDING_HEIGHT_M, RMA_STREET_WIDTH_M
    h_bs, h_ut = p.bs_height_m, p.ut_height_m
    pl_nlos = (
        161.04
        - 7.1 * math.log10(w)
        + 7.5 * math.log10(h)
        - (24.37 - 3.7 * (h / h_bs) ** 2) * math.log10(h_bs)
        + (43.42 - 3.1 * math.log10(h_bs)) * (math.log10(d3d) - 3.0)
        + 20.0 * math.log10(p.carrier_ghz)
        - (3.2 * (math.log10(11.75 * h_ut)) ** 2 - 4.97)
    )
    return max(_rma_los(d2d, d3d, p), pl_nlos)


def _uma_los(d2d: float, d3d: float, p: PropagationParams) -> float:
    h_e = UMA_EFFECTIVE_ENV_HEIGHT_M
    d_bp = (
        4.0 * (p.bs_height_m - h_e) * (p.ut_height_m - h_e)
        * (p.carrier_ghz * 1e9) / PROPAGATION_C
    )
    if d2d <= d_bp:
        return 28.0 + 22.0 * math.log10(d3d) + 20.0 * math.log10(p.carrier_ghz)
    return (
        28.0
        + 40.0 * math.log10(d3d)
        + 20.0 * math.log10(p.carrier_ghz)
        - 9.0 * math.log10(d_bp**2 + (p.bs_height_m - p.ut_height_m) ** 2)
    )


def _uma_nlos(d2d: float, d3d: float, p: PropagationParams) -> float:
    pl_nlos = (
        13.54
        + 39.08 * math.log10(d3d)
        + 20.0 * math.log10(p.carrier_ghz)
        - 0.6 * (p.ut_height_m - 1.5)
    )
    return max(_uma_los(d2d, d3d, p), pl_nlos)


def path_loss(params: PropagationParams, distance_2d: float, los: bool) -> float:
    """TR 38.901 path loss in dB for the resolved LOS state.

    Distances below the 10 m validity floor are clamped. NLOS takes the
    maximum with the LOS value, as the standard specifies.
    """
    if distance_2d < 0:
        raise RadioModelError(f"negative distance {distance_2d}")
    d2d = max(distance_2d, MIN_DISTANCE_2D_M)
    if distance_2d < MIN_DISTANCE_2D_M:
        log.debug("2D distance %.2f m below validity floor; clamped to 10 m", distance_2d)
    d3d = math.hypot(d2d, params.bs_height_m - params.ut_height_m)
    if params.environment == RMA:
        return _rma_los(d2d, d3d, params) if los else _rma_nlos(d2d, d3d, params)
    return _uma_los(d2d, d3d, params) if los else _uma_nlos(d2d, d3d, params)


# Shadow fading standard deviations per TR 38.901 (dB).
def shadow_sigma_db(params: PropagationParams, distance_2d: float, los: bool) -> float:
    if params.environment == RMA:
        if not los:
            return 8.0
        d_bp = (
            2.0 * math.pi * params.bs_height_m * params.ut_height_m
            * (params.carrier_ghz * 1e9) / PROPAGATION_C
        )
        return 4.0 if distance_2d <= d_bp else 6.0
    return 4.0 if los else 6.0


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise: thermal density plus noise figure over the band."""

    thermal_dbm_hz: float = -174.0
    noise_figure_db: float = 7.8

    def total_noise_w(self, bandwidth_hz: float) -> float:
        if bandwidth_hz <= 0:
            raise RadioModelError(f"bandwidth must be positive, got {bandwidth_hz}")
        n = 10.0 ** ((self.thermal_dbm_hz + self.noise_figure_db) / 10.0) * 1e-3 * bandwidth_hz
        if n <= 0:
            raise RadioModelError("total noise must be strictly positive")
        return n


@dataclass(frozen=True)
class LinkBudget:
    distance_2d: float
    los: bool
    path_loss_db: float
    gain_db: float
    rx_power_w: float
    interference_w: float
    noise_w: float
    sinr: float  # linear
    snr: float  # linear

    @property
    def sinr_db(self) -> float:
        return 10.0 * math.log10(self.sinr) if self.sinr > 0 else -math.inf


def min_bandwidth(rate_bps: float, sinr: float) -> float:
    """Bandwidth needed to carry rate_bps at the given linear SINR."""
    if sinr <= 0:
        raise RadioModelError(f"SINR must be positive, got {sinr}")
    if rate_bps < 0:
        raise RadioModelError(f"rate must be >= 0, got {rate_bps}")
    if rate_bps == 0:
        return 0.0
    return rate_bps / math.log2(1.0 + sinr)


def allocate_bandwidth(min_bandwidths) -> list[float]:
    """Per-user share of a cell's bandwidth, proportional to need.

    Shares sum to 1 for a non-empty user set. The all-zero-need corner case
    (every rate requirement is 0) falls back to equal shares.
    """
    needs = list(min_bandwidths)
    if not needs:
        return []
    total = sum(needs)
    if total <= 0:
        return [1.0 / len(needs)] * len(needs)
    return [w / total for w in needs]


def throughput(share: float, bandwidth_hz: float, sinr: float) -> float:
    """Shannon throughput over the allocated effective bandwidth."""
    if not 0.0 <= share <= 1.0 + 1e-12:
        raise RadioModelError(f"bandwidth share must be in [0, 1], got {share}")
    return share * bandwidth_hz * math.log2(1.0 + sinr)


def _received_power_w(cell: Cell, position: Point, path_loss_db: float) -> float:
    phi = bearing_deg(cell.position, position) - cell.azimuth_deg
    gain_db = horizontal_gain(phi)
    return cell.tx_power_w * 10.0 ** ((gain_db - path_loss_db) / 10.0)


class LinkModel:
    """Link budgets over a fixed cell set with frozen per-pair LOS draws.

    link_uniform(user_key, cell_id) must return a uniform [0, 1) value that
    depends only on its arguments; the LOS state of a pair is then frozen for
    the whole run and independent across pairs. Interferer sets are
    precomputed cell-to-cell: co-channel cells within r_max of the serving
    cell, minus its coordination_k nearest co-channel cells, which coordinate
    and do not interfere.
    """

    def __init__(
        self,
        cells,
        *,
        r_max_m: float,
        coordination_k: int = 3,
        noise: NoiseModel | None = None,
        ut_height_m: float = DEFAULT_UT_HEIGHT_M,
        link_uniform: Callable[..., float] | None = None,
        shadow_normal: Callable[..., float] | None = None,
        rx_cache: dict | None = None,
    ):
        self.cells: tuple[Cell, ...] = tuple(cells)
        self.r_max_m = r_max_m
        self.coordination_k = coordination_k
        self.noise = noise or NoiseModel()
        self.ut_height_m = ut_height_m
        self._link_uniform = link_uniform or (lambda user_key, cell_id: 0.5)
        self._shadow_normal = shadow_normal
        self._params = {
            c.index: PropagationParams(
                environment=c.environment,
                bs_height_m=c.height_m,
                carrier_ghz=c.frequency_mhz / 1000.0,
                ut_height_m=ut_height_m,
            )
            for c in self.cells
        }
        self._tree = (
            cKDTree([(c.position.x, c.position.y) for c in self.cells]) if self.cells else None
        )
        self._interferers = self._build_interferer_sets()
        self._budget_cache: dict[tuple, LinkBudget] = {}
        # received powers depend only on (user, cell), never on the cell set,
        # so callers evaluating many subsets of one network may share this
        self._rx_cache: dict[tuple, tuple] = {} if rx_cache is None else rx_cache

    def _build_interferer_sets(self) -> dict[int, tuple[Cell, ...]]:
        by_freq: dict[float, list[Cell]] = {}
        for c in self.cells:
            by_freq.setdefault(c.frequency_mhz, []).append(c)
        sets: dict[int, tuple[Cell, ...]] = {}
        for c in self.cells:
            peers = [
                (c.position.distance_to(o.position), o.index, o)
                for o in by_freq[c.frequency_mhz]
                if o.index != c.index
            ]
            peers.sort(key=lambda t: (t[0], t[1]))
            coordinated = {o.index for _, _, o in peers[: self.coordination_k]}
            sets[c.index] = tuple(
                o
                for d, _, o in peers
                if d <= self.r_max_m and o.index not in coordinated
            )
        return sets

    def cells_within(self, position: Point, radius: float | None = None):
        """Cells with 2D distance <= radius (default r_max) of position."""
        if self._tree is None:
            return []
        idx = self._tree.query_ball_point(
            (position.x, position.y), radius if radius is not None else self.r_max_m
        )
        return [self.cells[i] for i in sorted(idx)]

    def _los_state(self, user_key, cell: Cell, distance_2d: float) -> bool:
        p = los_probability(cell.environment, distance_2d, self.ut_height_m)
        return self._link_uniform(user_key, cell.id) < p

    def _path_rx_power(self, user_key, position: Point, cell: Cell):
        # user_key must uniquely identify the position, so the pair is cacheable
        key = (user_key, cell.index)
        hit = self._rx_cache.get(key)
        if hit is not None:
            return hit
        d2d = cell.position.distance_to(position)
        los = self._los_state(user_key, cell, d2d)
        loss_db = path_loss(self._params[cell.index], d2d, los)
        if self._shadow_normal is not None:
            sigma = shadow_sigma_db(self._params[cell.index], d2d, los)
            loss_db += sigma * self._shadow_normal(user_key, cell.id)
        hit = (d2d, los, loss_db, _received_power_w(cell, position, loss_db))
        self._rx_cache[key] = hit
        return hit

    def interference(self, user_key, position: Point, serving: Cell) -> float:
        """Total co-channel interference power (W) at the user's position."""
        total = 0.0
        for other in self._interferers[serving.index]:
            _, _, _, rx = self._path_rx_power(user_key, position, other)
            total += rx
        return total

    def link_budget(self, user_key, position: Point, cell: Cell) -> LinkBudget:
        key = (user_key, cell.index)
        cached = self._budget_cache.get(key)
        if cached is not None:
            return cached
        d2d, los, loss_db, rx_w = self._path_rx_power(user_key, position, cell)
        phi = bearing_deg(cell.position, position) - cell.azimuth_deg
        noise_w = self.noise.total_noise_w(cell.bandwidth_hz)
        interference_w = self.interference(user_key, position, cell)
        budget = LinkBudget(
            distance_2d=d2d,
            los=los,
            path_loss_db=loss_db,
            gain_db=horizontal_gain(phi),
            rx_power_w=rx_w,
            interference_w=interference_w,
            noise_w=noise_w,
            sinr=rx_w / (noise_w + interference_w),
            snr=rx_w / noise_w,
        )
        self._budget_cache[key] = budget
        return budget

    def budget_for_user(self, user: User, cell: Cell) -> LinkBudget:
        return self.link_budget(user.id, user.position, cell)
