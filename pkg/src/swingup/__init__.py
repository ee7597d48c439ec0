"""Two-color (swing-up) excitation of a solid-state emitter: pulse carving,
master-equation dynamics, photon statistics, estimators and simulated experiments."""

from .config import ConfigError, ExperimentConfig
from .dynamics import EmitterModel, Trajectory, evolve, ground_state
from .protocols import (
    ScanGrid,
    calibrate_pi,
    run_lifetime_experiment,
    run_rabi_sweep,
    run_single_pulse_control,
    run_super_power_extension,
    run_super_scan,
)
from .pulsecraft import SpectralEnvelope, TemporalEnvelope, apply_mask, gaussian_source, to_time

__version__ = "0.1.0"
