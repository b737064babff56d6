"""Cascaded online-learning flight control with action-smoothness techniques."""

from .agents import Agent, AgentConfig, one_step_cost, online_ts_loss, td_error
from .analysis import (
    SATURATION_GRADIENT_THRESHOLD,
    SmoothnessReport,
    Spectrum,
    action_increments,
    band_energy,
    fft_magnitude,
    saturation_fraction,
    saturation_level,
    sensitivity_measure,
    smoothness_report,
)
from .command_filter import CommandFilter
from .dynamics import (
    ALPHA_VALID_DEG,
    ActuatorState,
    PhysicalParams,
    VehicleState,
    actuator_step,
    phi_m,
    phi_z,
    phi_z_prime,
    rk4_step,
    state_derivative,
)
from .harness import (
    MODES,
    ComparisonReport,
    ConfigError,
    RunConfig,
    SimulationTrace,
    compare,
    load_trace_csv,
    reference,
    run,
)
from .incremental import IncrementalModel, IncrementRecord, analytic_jacobians
from .networks import HIDDEN, AdamConfig, Approximator, soft_update

__version__ = "0.1.0"

__all__ = [
    "ALPHA_VALID_DEG",
    "ActuatorState",
    "AdamConfig",
    "Agent",
    "AgentConfig",
    "Approximator",
    "CommandFilter",
    "ComparisonReport",
    "ConfigError",
    "HIDDEN",
    "IncrementRecord",
    "IncrementalModel",
    "MODES",
    "PhysicalParams",
    "RunConfig",
    "SATURATION_GRADIENT_THRESHOLD",
    "SimulationTrace",
    "SmoothnessReport",
    "Spectrum",
    "VehicleState",
    "action_increments",
    "actuator_step",
    "analytic_jacobians",
    "band_energy",
    "compare",
    "fft_magnitude",
    "load_trace_csv",
    "one_step_cost",
    "online_ts_loss",
    "phi_m",
    "phi_z",
    "phi_z_prime",
    "reference",
    "rk4_step",
    "run",
    "saturation_fraction",
    "saturation_level",
    "sensitivity_measure",
    "smoothness_report",
    "soft_update",
    "state_derivative",
    "td_error",
]
