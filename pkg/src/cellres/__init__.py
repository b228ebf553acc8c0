"""cellres: cellular-network resilience simulator.

Quantifies the fraction of disconnected population (FDP) and the fraction of
satisfied population (FSP) for one or more mobile operators under baseline
operation, national roaming, random or geographically correlated base-station
failures, and user surges. Deterministic under a scenario seed.
"""

__version__ = "0.1.0"

from .association import MODE_BOTH, MODE_PER_OPERATOR, MODE_ROAMING, associate  # noqa: F401
from .geo import Point, PopulationCell, Region, User, UserSet, sample_users  # noqa: F401
from .ingest import Cell, OperatorSpectrum  # noqa: F401
from .metrics import MetricsReport, coverage_raster  # noqa: F401
from .radio import LinkModel, NoiseModel, horizontal_gain, los_probability, path_loss  # noqa: F401
from .scenarios import (  # noqa: F401
    FailureSpec,
    ModelParams,
    ScenarioSpec,
    importance_sweep,
    run_scenario,
)
