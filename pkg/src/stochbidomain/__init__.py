"""Spectral-Galerkin simulation and verification of the stochastic bidomain model."""

__version__ = "0.1.0"

from .config import ScenarioConfig, build_scenario, parse_config, serialize_config
from .ensemble import EnsembleSpec, EnsembleStats, PathScenario, pair_paths, run_ensemble, splitmix64
from .galerkin import (BidomainGalerkin, BlowUpError, GalerkinConfig, GalerkinState, Geometry,
                       TrajectoryRecord, assemble_diffusion, assemble_drift, check_coercivity,
                       check_monotonicity, em_step, solve_path)
from .geometry import ConductivityField, Domain, build_basis
from .membrane import MembraneModel, check_structural_bounds, gating_rhs, ion_current
from .noise import Forcing, NoiseModel, WienerIncrements, sample_increments

__all__ = [
    "BidomainGalerkin", "BlowUpError", "ConductivityField", "Domain", "EnsembleSpec", "EnsembleStats",
    "Forcing", "GalerkinConfig", "GalerkinState", "Geometry", "MembraneModel", "NoiseModel",
    "PathScenario", "ScenarioConfig", "TrajectoryRecord", "WienerIncrements", "assemble_diffusion",
    "assemble_drift", "build_basis", "build_scenario", "check_coercivity", "check_monotonicity",
    "check_structural_bounds", "em_step", "gating_rhs", "ion_current", "pair_paths", "parse_config",
    "run_ensemble", "sample_increments", "serialize_config", "solve_path", "splitmix64",
]
