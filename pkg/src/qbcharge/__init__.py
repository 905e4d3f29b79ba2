"""Charging spin-ensemble quantum batteries through collective dissipation and pumping."""

from ._accel import HAS_NUMBA, backend
from .dynamics import (
    TrajectoryResult,
    charging_time,
    integrate,
    integrate_exact,
    integrate_meanfield,
    run_to_steady,
    steady_state_value,
)
from .panels import panel_scenario
from .scenario import ScenarioConfig

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "ScenarioConfig",
    "TrajectoryResult",
    "backend",
    "charging_time",
    "integrate",
    "integrate_exact",
    "integrate_meanfield",
    "panel_scenario",
    "run_to_steady",
    "steady_state_value",
]
