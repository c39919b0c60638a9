"""Packet-level simulator for incentive-based QoS with connection-oriented and best-effort baselines."""

from .errors import InvalidScenario, SimQosError
from .metrics import Report, jain_index, percentile
from .scenario import ScenarioConfig, load_scenario, parse_scenario, validate_scenario
from .sim import Simulation, run

__all__ = [
    "InvalidScenario", "Report", "ScenarioConfig", "SimQosError", "Simulation",
    "jain_index", "load_scenario", "parse_scenario", "percentile", "run", "validate_scenario",
]

__version__ = "0.1.0"
