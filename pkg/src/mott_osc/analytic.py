"""Closed-form relaxation-oscillation math for the current-biased device.

With a constant bias current I and a load capacitance C_L across the device,
each phase charges or discharges the capacitor exponentially toward a virtual
asymptote set by the active affine branch:

    rising  (insulating):  v_ar = v_oi + r_i * I,  time constant tau_r = C_L * r_i
    falling (metallic):    v_af = v_om + r_m * I,  time constant tau_f = C_L * r_m

Self-sustained oscillation requires the rising asymptote to lie above the
threshold (v_ar > v_th) and the falling asymptote below the holding level
(v_af < v_hl).  The period is the sum of the two exponential transit times
between v_hl and v_th.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import MemristorParams
from .waveform import Waveform


class NotOscillatingError(ValueError):
    """Raised when the bias point does not sustain oscillation."""


class UnreachableTargetError(ValueError):
    """Raised when an exponential relaxation can never reach the target level."""


@dataclass(frozen=True)
class OscillationAssessment:
    """Bias-point classification.

    oscillates        both margin conditions hold
    v_ar, v_af        rising / falling asymptote voltages, V
    threshold_margin  v_th - v_ar, V (negative when the rising condition holds)
    holding_margin    v_af - v_hl, V (negative when the falling condition holds)
    """

    oscillates: bool
    v_ar: float
    v_af: float
    threshold_margin: float
    holding_margin: float


@dataclass(frozen=True)
class PeriodBreakdown:
    """Oscillation period split into its two phases (seconds / hertz)."""

    t_rise: float
    t_fall: float
    period: float
    frequency: float


def assess(params: MemristorParams, i_bias: float) -> OscillationAssessment:
    """Classify a constant-current bias point."""
    v_ar = params.v_oi + params.r_i * i_bias
    v_af = params.v_om + params.r_m * i_bias
    threshold_margin = params.v_th - v_ar
    holding_margin = v_af - params.v_hl
    return OscillationAssessment(
        oscillates=(threshold_margin < 0.0 and holding_margin < 0.0),
        v_ar=v_ar,
        v_af=v_af,
        threshold_margin=threshold_margin,
        holding_margin=holding_margin,
    )


def period(params: MemristorParams, i_bias: float, c_l: float) -> PeriodBreakdown:
    """Oscillation period at a constant-current bias point.

    Raises NotOscillatingError (naming the failed margin) when the bias point
    does not oscillate.  Diverges toward infinity as either asymptote
    approaches its switching level.
    """
    if not c_l > 0.0:
        raise ValueError(f"c_l must be > 0, got {c_l!r}")
    a = assess(params, i_bias)
    if not a.oscillates:
        failed = []
        if a.threshold_margin >= 0.0:
            failed.append(
                f"rising asymptote v_ar={a.v_ar!r} does not exceed v_th={params.v_th!r}"
            )
        if a.holding_margin >= 0.0:
            failed.append(
                f"falling asymptote v_af={a.v_af!r} does not drop below v_hl={params.v_hl!r}"
            )
        raise NotOscillatingError("; ".join(failed))
    tau_r = c_l * params.r_i
    tau_f = c_l * params.r_m
    t_rise = tau_r * math.log((params.v_hl - a.v_ar) / (params.v_th - a.v_ar))
    t_fall = tau_f * math.log((params.v_th - a.v_af) / (params.v_hl - a.v_af))
    p = t_rise + t_fall
    return PeriodBreakdown(t_rise=t_rise, t_fall=t_fall, period=p, frequency=1.0 / p)


def relax_voltage(v0: float, v_a: float, tau: float, t: float) -> float:
    """Exponential relaxation from v0 toward asymptote v_a: value at time t."""
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau!r}")
    return v_a + (v0 - v_a) * math.exp(-t / tau)


def segment_time(v_from: float, v_to: float, v_a: float, tau: float) -> float:
    """Time for an exponential relaxation toward v_a to go from v_from to v_to.

    The target must lie between the start and the asymptote; otherwise the
    relaxation can never reach it and UnreachableTargetError is raised (the
    escape regime, where only noise can produce a crossing).
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau!r}")
    num = v_from - v_a
    den = v_to - v_a
    if v_from == v_to:
        return 0.0
    if den == 0.0 or (num > 0.0) != (den > 0.0) or abs(den) > abs(num):
        raise UnreachableTargetError(
            f"target {v_to!r} V is not between start {v_from!r} V and asymptote "
            f"{v_a!r} V; pure relaxation never reaches it"
        )
    return tau * math.log(num / den)


def energy_per_spike(segment: Waveform, i_bias: float) -> float:
    """Bias energy delivered over one oscillation period, joules.

    Trapezoidal integral of v(t) * I over a waveform segment spanning exactly
    one period.
    """
    if len(segment) < 2:
        raise ValueError("waveform segment must contain at least 2 samples")
    return i_bias * float(np.trapezoid(segment.samples, dx=segment.dt))


def oscillation_current_window(params: MemristorParams) -> tuple[float, float]:
    """Open interval of bias currents that sustain oscillation.

    Lower edge: rising asymptote reaches v_th.  Upper edge: falling asymptote
    reaches v_hl.  The interval may be empty (lower >= upper) for parameter
    sets whose branches cannot satisfy both margins at any shared current.
    """
    i_low = (params.v_th - params.v_oi) / params.r_i
    i_high = (params.v_hl - params.v_om) / params.r_m
    return i_low, i_high
