"""Simulation and analysis toolkit for Mott-memristor relaxation oscillators.

Subpackages:

* device     piecewise-affine two-state memristor with temperature drift
* analytic   closed-form oscillation criteria, period and energy
* transient  event-driven single-node, gate-driven and coupled simulation
* stochastic escape-time Monte Carlo with band-limited 1/f noise
* analysis   cycle segmentation, exponential fits, parameter extraction
* thermal    conductance sigmoid and threshold-scaling formulas
* cli        batch command-line front end (`mott-osc`)
"""
from .analytic import (
    NotOscillatingError,
    OscillationAssessment,
    PeriodBreakdown,
    UnreachableTargetError,
    assess,
    energy_per_spike,
    oscillation_current_window,
    period,
    relax_voltage,
    segment_time,
)
from .device import (
    MemristorParams,
    ParamSlopes,
    Phase,
    TemperatureModel,
    branch_current,
    params_at_temperature,
    quasistatic_iv,
    step_phase,
)
from .waveform import Waveform

__all__ = [
    "MemristorParams",
    "NotOscillatingError",
    "OscillationAssessment",
    "ParamSlopes",
    "PeriodBreakdown",
    "Phase",
    "TemperatureModel",
    "UnreachableTargetError",
    "Waveform",
    "assess",
    "branch_current",
    "energy_per_spike",
    "oscillation_current_window",
    "params_at_temperature",
    "period",
    "quasistatic_iv",
    "relax_voltage",
    "segment_time",
    "step_phase",
]

__version__ = "0.1.0"
