"""Numerical laboratory for clustered multi-antenna downlink transmission
with superposition coding and imperfect transmitter channel knowledge.

The package covers the full chain: channel draws under pilot- or
feedback-limited estimation (:mod:`noma_lab.channel`), null-space
beamforming (:mod:`noma_lab.beamforming`), Monte Carlo link simulation
(:mod:`noma_lab.linksim`), exact and asymptotic average-rate formulas
(:mod:`noma_lab.analytic`), power/feedback/mode optimizers
(:mod:`noma_lab.allocation`), and reproducible experiment drivers behind
the ``noma-lab`` command (:mod:`noma_lab.experiments`).
"""

from .allocation import (
    FeedbackPlan,
    TransmissionMode,
    enumerate_modes,
    equal_power,
    feedback_allocation,
    fixed_ratio_power,
    joint_optimize,
    power_allocation,
    select_mode,
)
from .analytic import (
    RateParams,
    avg_rate,
    closed_form_rates,
    csi_scaling_for_constant_gap,
    expint_ei,
    noise_limited_rate,
)
from .channel import (
    DirectCsi,
    FddCsi,
    SystemGeometry,
    TddCsi,
    csi_accuracy_fdd,
    csi_accuracy_tdd,
    draw_channels,
)
from .errors import ConfigError, InfeasibleGeometryError
from .experiments import ExperimentConfig, load_config, run_command
from .linksim import PowerPlan, RateReport, monte_carlo_rates, tdma_mrt_baseline

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DirectCsi",
    "ExperimentConfig",
    "FddCsi",
    "FeedbackPlan",
    "InfeasibleGeometryError",
    "PowerPlan",
    "RateParams",
    "RateReport",
    "SystemGeometry",
    "TddCsi",
    "TransmissionMode",
    "avg_rate",
    "closed_form_rates",
    "csi_accuracy_fdd",
    "csi_accuracy_tdd",
    "csi_scaling_for_constant_gap",
    "draw_channels",
    "enumerate_modes",
    "equal_power",
    "expint_ei",
    "feedback_allocation",
    "fixed_ratio_power",
    "joint_optimize",
    "load_config",
    "monte_carlo_rates",
    "noise_limited_rate",
    "power_allocation",
    "run_command",
    "select_mode",
    "tdma_mrt_baseline",
    "__version__",
]
