"""Hetero-functional graph simulation of watershed water and nitrogen dynamics."""

from .architecture import InstantiatedArchitecture, ValidationReport, validate
from .hfit import IncidenceTensors, block_view, build_capability_index, build_incidence, build_place_index, build_tensors
from .ingest import ScenarioDocument, emit_scenario, parse_scenario, read_scenario
from .scenarios import bundled_path, load_bundled
from .simulator import SimulationConfig, Trajectory, concentrations, simulate, stability_max_dt

__version__ = "0.1.0"

__all__ = [
    "InstantiatedArchitecture", "ValidationReport", "validate",
    "IncidenceTensors", "block_view", "build_capability_index", "build_incidence", "build_place_index",
    "build_tensors",
    "ScenarioDocument", "emit_scenario", "parse_scenario", "read_scenario",
    "bundled_path", "load_bundled",
    "SimulationConfig", "Trajectory", "concentrations", "simulate", "stability_max_dt",
]
