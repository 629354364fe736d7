"""Semiclassical Monte-Carlo simulation of Sisyphus cooling and transport
in a two-dimensional lin-perp-lin optical lattice."""

__version__ = "0.1.0"

from .dynamics import (
    AtomState,
    EnsembleSeries,
    InitialDistribution,
    SimulationSchedule,
    TrajectoryRecord,
    ensemble_run,
    simulate_trajectory,
    step,
)
from .errors import (
    AnalysisError,
    ConfigError,
    DriftCalibrationError,
    FitFailedError,
    InsufficientDataError,
    IntegrationDivergedError,
    SimulationError,
    SisycoolError,
)
from .lattice import (
    LatticeParams,
    escape_energy,
    force,
    polarization_intensities,
    potential,
    pump_rate,
)
from .observables import (
    DiffusionFit,
    DriftFit,
    PopulationSplit,
    RelaxationFit,
    TransportResult,
    classify_trapped,
    fit_diffusion,
    fit_relaxation,
    friction_drift,
    friction_einstein,
    kinetic_temperature,
    subpopulation_report,
)
from .rir import ProbeGeometry, RirFit, RirSpectrum, fit_rir, rir_spectrum
from .sweep import RunManifest, SweepSpec, replay, run_sweep, validate_config
from .units import UnitSystem

__all__ = [
    "AtomState",
    "AnalysisError",
    "ConfigError",
    "DriftCalibrationError",
    "EnsembleSeries",
    "FitFailedError",
    "InitialDistribution",
    "InsufficientDataError",
    "IntegrationDivergedError",
    "LatticeParams",
    "SimulationError",
    "SimulationSchedule",
    "SisycoolError",
    "TrajectoryRecord",
    "UnitSystem",
    "__version__",
    "ensemble_run",
    "escape_energy",
    "force",
    "polarization_intensities",
    "potential",
    "pump_rate",
    "simulate_trajectory",
    "step",
]
