"""Event-driven transient simulation of memristor relaxation circuits.

Single-node topology: a bias drive injects current into the node, the
memristor (affine two-state model), an optional load resistor r_l and the
load capacitor c_l all connect the node to ground.  Within one device phase
the circuit is linear, so each time step is advanced with the exact
exponential solution; threshold crossings inside a step are located by
solving the exponential analytically (bisection fallback), the phase is
switched there, and the remainder of the step is integrated in the new
phase.  This keeps switch instants accurate to float precision instead of
one sample period.

Two coupled nodes (resistor r_c between them) are integrated with classic
fixed-step RK4 on the two-state ODE; crossings are located by within-step
linear interpolation.  Drive currents are zero-order-held over each step in
all simulators.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import analytic
from .device import MemristorParams, Phase, step_phase
from .waveform import Waveform, atomic_write_text

# Steps per smallest branch time constant demanded of single-node runs.
SINGLE_NODE_RESOLUTION = 50
# Steps per smallest node time constant demanded of coupled runs.
COUPLED_RESOLUTION = 100
# Above this coupling resistance the cross current is below float noise
# relative to the branch currents, and each node is integrated independently
# with the exact single-node scheme.
DECOUPLING_RC_OHMS = 1e11
# Most alternations tolerated within one dt step before giving up.
_MAX_SWITCHES_PER_STEP = 16


@dataclass(frozen=True)
class JlfetModel:
    """Behavioral square-law model of a p-type depletion-mode junction FET.

    The device conducts for gate voltages below the cutoff v_t; the
    overdrive is v_t - v_g.  A series resistance r_sd degenerates the
    intrinsic channel.  lam is the optional channel-length-modulation slope
    applied in saturation (continuous at the region boundary).

    k      transconductance factor, A/V^2
    v_t    cutoff gate voltage, V (full depletion at and above v_t)
    r_sd   source/drain series resistance, ohm
    lam    saturation output-conductance parameter, 1/V
    """

    k: float
    v_t: float
    r_sd: float = 343e3
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not self.k > 0.0:
            raise ValueError(f"k must be > 0, got {self.k!r}")
        if self.r_sd < 0.0 or self.lam < 0.0:
            raise ValueError("r_sd and lam must be >= 0")


def jlfet_current(model: JlfetModel, v_g: float, v_ds: float) -> float:
    """Drain current (A) of the behavioral JLFET.

    Piecewise square law solved self-consistently with the series
    resistance: the intrinsic channel sees v_ds - I * r_sd.  Continuous and
    monotone in the overdrive; zero at and beyond cutoff.  Antisymmetric in
    v_ds.  For small drain bias it reduces to v_ds / (r_ch + r_sd) with
    r_ch = 1 / (k * overdrive).
    """
    v_ov = model.v_t - v_g
    if v_ov <= 0.0:
        return 0.0
    if v_ds == 0.0:
        return 0.0
    sign = 1.0 if v_ds > 0.0 else -1.0
    v_ds = abs(v_ds)
    k, r, lam = model.k, model.r_sd, model.lam

    in_linear = False
    if r > 0.0:
        # (k r / 2) u^2 - (1 + k r v_ov) u + v_ds = 0 with u the intrinsic
        # drain voltage; no real root means the channel has pinched off.
        a = 0.5 * k * r
        b = 1.0 + k * r * v_ov
        disc = b * b - 4.0 * a * v_ds
        if disc >= 0.0:
            u = (b - math.sqrt(disc)) / (2.0 * a)
            in_linear = u < v_ov
    else:
        u = v_ds
        in_linear = u < v_ov

    if in_linear:
        i = k * (v_ov * u - 0.5 * u * u)
    else:
        # Saturation, with lam referenced to the pinch-off point so the two
        # regions meet continuously.
        i_sat0 = 0.5 * k * v_ov * v_ov
        i = i_sat0 * (1.0 + lam * (v_ds - v_ov)) / (1.0 + i_sat0 * lam * r)
    return sign * i


# ---------------------------------------------------------------------------
# Gate signals


@dataclass(frozen=True)
class ConstantGate:
    v: float

    def value(self, t: float) -> float:
        return self.v

    def bounds(self) -> tuple[float, float]:
        return self.v, self.v

    period = None


@dataclass(frozen=True)
class RampGate:
    """Linear ramp from v0 at t=0 to v1 at t_total, holding v1 afterwards."""

    v0: float
    v1: float
    t_total: float

    def __post_init__(self) -> None:
        if not self.t_total > 0.0:
            raise ValueError("ramp t_total must be > 0")

    def value(self, t: float) -> float:
        if t >= self.t_total:
            return self.v1
        if t <= 0.0:
            return self.v0
        return self.v0 + (self.v1 - self.v0) * (t / self.t_total)

    def bounds(self) -> tuple[float, float]:
        return min(self.v0, self.v1), max(self.v0, self.v1)

    @property
    def period(self) -> float:
        return self.t_total


@dataclass(frozen=True)
class SineGate:
    v_mid: float
    v_amp: float
    freq: float

    def __post_init__(self) -> None:
        if not self.freq > 0.0:
            raise ValueError("sine freq must be > 0")

    def value(self, t: float) -> float:
        return self.v_mid + self.v_amp * math.sin(2.0 * math.pi * self.freq * t)

    def bounds(self) -> tuple[float, float]:
        a = abs(self.v_amp)
        return self.v_mid - a, self.v_mid + a

    @property
    def period(self) -> float:
        return 1.0 / self.freq


@dataclass(frozen=True)
class SquareGate:
    """v_high during the first `duty` fraction of each cycle, else v_low."""

    v_low: float
    v_high: float
    freq: float
    duty: float = 0.5

    def __post_init__(self) -> None:
        if not self.freq > 0.0:
            raise ValueError("square freq must be > 0")
        if not 0.0 < self.duty < 1.0:
            raise ValueError("square duty must lie in (0, 1)")

    def value(self, t: float) -> float:
        frac = t * self.freq
        frac -= math.floor(frac)
        return self.v_high if frac < self.duty else self.v_low

    def bounds(self) -> tuple[float, float]:
        return min(self.v_low, self.v_high), max(self.v_low, self.v_high)

    @property
    def period(self) -> float:
        return 1.0 / self.freq


GateSignal = Union[ConstantGate, RampGate, SineGate, SquareGate]


# ---------------------------------------------------------------------------
# Bias drives


@dataclass(frozen=True)
class ConstantCurrent:
    """Ideal current source injecting i amps into the node."""

    i: float

    def __post_init__(self) -> None:
        if not self.i > 0.0:
            raise ValueError(f"bias current must be > 0, got {self.i!r}")


@dataclass(frozen=True)
class TransistorDrive:
    """JLFET current source from a supply rail of magnitude |v_ss|.

    The transistor sees a drain-source headroom of |v_ss| - v_node, so the
    injected current is jlfet_current(model, v_gate(t), |v_ss| - v_node).
    """

    model: JlfetModel
    gate: GateSignal
    v_ss: float

    def __post_init__(self) -> None:
        if self.v_ss == 0.0:
            raise ValueError("supply rail v_ss must be nonzero")
        lo, hi = self.gate.bounds()
        if self.model.v_t - hi <= 0.0:
            raise ValueError(
                f"gate range reaches cutoff: max gate {hi!r} V >= v_t="
                f"{self.model.v_t!r} V would zero the drive current"
            )


BiasDrive = Union[ConstantCurrent, TransistorDrive]


@dataclass(frozen=True)
class CircuitConfig:
    """Single oscillator node.

    c_l          load capacitance, farad
    r_l          load resistance to ground, ohm (math.inf disables it)
    drive        bias source
    temperature  base-plane temperature, Celsius (metadata used by sweeps)
    """

    drive: BiasDrive
    c_l: float = 70e-12
    r_l: float = 1e6
    temperature: float = 25.0

    def __post_init__(self) -> None:
        if not self.c_l > 0.0:
            raise ValueError(f"c_l must be > 0, got {self.c_l!r}")
        if not self.r_l > 0.0:
            raise ValueError(f"r_l must be > 0, got {self.r_l!r}")


@dataclass(frozen=True)
class CoupledConfig:
    """Two oscillator nodes joined by a linear coupling resistor r_c.

    v_ss_a / v_ss_b, when given, override the supply rail of the respective
    node's transistor drive (ignored for constant-current drives).
    """

    node_a: CircuitConfig
    node_b: CircuitConfig
    r_c: float = 343e3
    v_ss_a: float | None = None
    v_ss_b: float | None = None

    def __post_init__(self) -> None:
        if not self.r_c > 0.0:
            raise ValueError(f"r_c must be > 0, got {self.r_c!r}")


@dataclass(frozen=True)
class SwitchEvent:
    """Phase transition instant.  direction: +1 insulating->metallic,
    -1 metallic->insulating."""

    time: float
    direction: int


def events_to_csv(events: list[SwitchEvent], path: str | os.PathLike) -> None:
    buf = io.StringIO()
    buf.write("t_seconds,direction\n")
    for ev in events:
        buf.write(f"{ev.time!r},{ev.direction}\n")
    atomic_write_text(path, buf.getvalue())


def events_from_csv(path: str | os.PathLike) -> list[SwitchEvent]:
    events = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t_seconds,direction":
            raise ValueError(f"{path}: unexpected events header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t_str, d_str = line.split(",")
            events.append(SwitchEvent(float(t_str), int(d_str)))
    return events


# ---------------------------------------------------------------------------
# Single-node engine


def _drive_current(drive: BiasDrive, t: float, v_node: float) -> float:
    if isinstance(drive, ConstantCurrent):
        return drive.i
    return jlfet_current(drive.model, drive.gate.value(t), abs(drive.v_ss) - v_node)


def _validate_step(params: MemristorParams, circuit: CircuitConfig,
                   duration: float, dt: float | None,
                   resolution: int) -> tuple[int, float]:
    if not duration > 0.0:
        raise ValueError(f"duration must be > 0, got {duration!r}")
    tau_min = circuit.c_l * min(params.r_m, params.r_i)
    if dt is None:
        dt = tau_min / resolution
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if dt > tau_min / resolution:
        raise ValueError(
            f"dt={dt!r} s too coarse: must be <= {tau_min / resolution!r} s "
            f"(smallest branch time constant / {resolution})"
        )
    n_steps = int(math.floor(duration / dt))
    if n_steps < 1:
        raise ValueError("duration must cover at least one dt step")
    return n_steps, dt


def simulate_single(
    params: MemristorParams,
    circuit: CircuitConfig,
    duration: float,
    dt: float | None = None,
    initial_v: float = 0.0,
    initial_phase: Phase = Phase.INSULATING,
) -> tuple[Waveform, list[SwitchEvent]]:
    """Simulate one oscillator node; returns the sampled waveform and the
    chronologically ordered phase-switch events.

    The node obeys c_l * dV/dt = I_drive - I_branch(V) - V / r_l.  Within a
    phase the solution is an exact exponential toward the Thevenin asymptote
    of the active branch, so sample values carry no integration error; switch
    instants are solved analytically inside the step.  dt defaults to the
    resolution guard, smallest branch time constant / 50.
    """
    n_steps, dt = _validate_step(params, circuit, duration, dt,
                                 SINGLE_NODE_RESOLUTION)

    c = circuit.c_l
    inv_rl = 0.0 if math.isinf(circuit.r_l) else 1.0 / circuit.r_l
    # Per-phase constants: conductance seen by the node and branch offset current.
    g_i = 1.0 / params.r_i + inv_rl
    g_m = 1.0 / params.r_m + inv_rl
    off_i = params.v_oi / params.r_i
    off_m = params.v_om / params.r_m
    tau_i = c / g_i
    tau_m = c / g_m
    v_th = params.v_th
    v_hl = params.v_hl

    drive = circuit.drive
    const_i = drive.i if isinstance(drive, ConstantCurrent) else None

    v = float(initial_v)
    phase = step_phase(params, initial_phase, v)
    events: list[SwitchEvent] = []
    if phase is not initial_phase:
        events.append(SwitchEvent(0.0, +1 if phase is Phase.METALLIC else -1))

    samples = np.empty(n_steps + 1)
    samples[0] = v
    metallic = phase is Phase.METALLIC
    exp = math.exp
    log = math.log

    for k in range(n_steps):
        t_step = k * dt
        i_drive = const_i if const_i is not None else _drive_current(drive, t_step, v)
        if not i_drive > 0.0:
            raise ValueError(
                f"drive current nonpositive ({i_drive!r} A) at t={t_step!r} s"
            )
        remaining = dt
        consumed = 0.0
        for _ in range(_MAX_SWITCHES_PER_STEP):
            if metallic:
                g, tau, off = g_m, tau_m, off_m
                target = v_hl
            else:
                g, tau, off = g_i, tau_i, off_i
                target = v_th
            v_inf = (i_drive + off) / g
            v_end = v_inf + (v - v_inf) * exp(-remaining / tau)
            crossed = (v_end >= target > v) if not metallic else (v_end <= target < v)
            if not crossed:
                v = v_end
                break
            # Analytic in-step crossing time; bisection fallback for the
            # pathological case where rounding spoils the log argument.
            num = v - v_inf
            den = target - v_inf
            if num != 0.0 and den != 0.0 and (num > 0.0) == (den > 0.0) \
                    and abs(den) <= abs(num):
                t_star = tau * log(num / den)
            else:
                lo, hi = 0.0, remaining
                while hi - lo > 1e-15:
                    mid = 0.5 * (lo + hi)
                    v_mid = v_inf + (v - v_inf) * exp(-mid / tau)
                    if (v_mid >= target) == (not metallic):
                        hi = mid
                    else:
                        lo = mid
                t_star = 0.5 * (lo + hi)
            t_star = min(max(t_star, 0.0), remaining)
            consumed += t_star
            remaining -= t_star
            events.append(SwitchEvent(t_step + consumed, -1 if metallic else +1))
            metallic = not metallic
            v = target
        else:
            raise RuntimeError(
                f"more than {_MAX_SWITCHES_PER_STEP} phase switches within one "
                f"dt step at t={t_step!r} s; dt is too coarse for this circuit"
            )
        samples[k + 1] = v

    return Waveform(dt, samples, t0=0.0), events


def _estimate_min_period(
    params: MemristorParams, drive: TransistorDrive, c_l: float
) -> float | None:
    """Smallest analytic oscillation period over a sample of gate values,
    using the full supply headroom; None if no sampled point oscillates."""
    lo, hi = drive.gate.bounds()
    best = None
    for v_g in (lo, 0.5 * (lo + hi), hi):
        i = jlfet_current(drive.model, v_g, abs(drive.v_ss))
        if i <= 0.0:
            continue
        if analytic.assess(params, i).oscillates:
            p = analytic.period(params, i, c_l).period
            best = p if best is None else min(best, p)
    return best


def simulate_vco(
    params: MemristorParams,
    circuit: CircuitConfig,
    duration: float,
    dt: float | None = None,
) -> Waveform:
    """Voltage-controlled operation: a gate signal modulates the transistor
    drive current, which is recomputed from the instantaneous gate voltage at
    the start of every step (zero-order hold).

    Requires a transistor drive whose gate signal is slow against the
    oscillation (quasi-static separation >= 10x).
    """
    drive = circuit.drive
    if not isinstance(drive, TransistorDrive):
        raise ValueError("simulate_vco requires a TransistorDrive circuit")
    gate_period = drive.gate.period
    if gate_period is not None:
        p_min = _estimate_min_period(params, drive, circuit.c_l)
        if p_min is not None and gate_period < 10.0 * p_min:
            raise ValueError(
                f"gate period {gate_period!r} s violates quasi-static "
                f"separation: needs >= 10x the oscillation period ({p_min!r} s)"
            )
    waveform, _ = simulate_single(params, circuit, duration, dt)
    return waveform


# ---------------------------------------------------------------------------
# Coupled pair


def _with_vss(node: CircuitConfig, v_ss: float | None) -> CircuitConfig:
    if v_ss is None or not isinstance(node.drive, TransistorDrive):
        return node
    return replace(node, drive=replace(node.drive, v_ss=v_ss))


def simulate_coupled(
    params_a: MemristorParams,
    params_b: MemristorParams,
    config: CoupledConfig,
    duration: float,
    dt: float | None = None,
    initial_v_a: float = 0.0,
    initial_v_b: float = 0.0,
) -> tuple[Waveform, Waveform]:
    """Simulate two resistively coupled oscillator nodes.

    Node equations (and symmetrically for b):

        c_a dVa/dt = I_a - (Va - v_o_a)/r_a - Va/r_l_a - (Va - Vb)/r_c

    Fixed-step RK4 with the device phases frozen over each step; crossings
    are located by within-step linear interpolation, the remainder of the
    step re-integrated.  Drive currents are zero-order-held per step.  For
    r_c >= 1e11 ohm the cross current is negligible at float precision and
    each node runs through the exact single-node integrator instead.  dt
    defaults to the resolution guard, min coupled time constant / 100.
    """
    node_a = _with_vss(config.node_a, config.v_ss_a)
    node_b = _with_vss(config.node_b, config.v_ss_b)

    if config.r_c >= DECOUPLING_RC_OHMS:
        wf_a, _ = simulate_single(params_a, node_a, duration, dt, initial_v_a)
        wf_b, _ = simulate_single(params_b, node_b, duration, dt, initial_v_b)
        return wf_a, wf_b

    if not duration > 0.0:
        raise ValueError(f"duration must be > 0, got {duration!r}")

    inv_rc = 1.0 / config.r_c

    def node_consts(params: MemristorParams, node: CircuitConfig):
        inv_rl = 0.0 if math.isinf(node.r_l) else 1.0 / node.r_l
        tau = node.c_l / (1.0 / params.r_m + inv_rl + inv_rc)
        return inv_rl, tau

    inv_rl_a, tau_a = node_consts(params_a, node_a)
    inv_rl_b, tau_b = node_consts(params_b, node_b)
    tau_min = min(tau_a, tau_b)
    if dt is None:
        dt = tau_min / COUPLED_RESOLUTION
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if dt > tau_min / COUPLED_RESOLUTION:
        raise ValueError(
            f"dt={dt!r} s too coarse for the coupled pair: must be <= "
            f"{tau_min / COUPLED_RESOLUTION!r} s (min time constant / "
            f"{COUPLED_RESOLUTION})"
        )
    n_steps = int(math.floor(duration / dt))
    if n_steps < 1:
        raise ValueError("duration must cover at least one dt step")

    inv_ca = 1.0 / node_a.c_l
    inv_cb = 1.0 / node_b.c_l

    drive_a, drive_b = node_a.drive, node_b.drive
    const_ia = drive_a.i if isinstance(drive_a, ConstantCurrent) else None
    const_ib = drive_b.i if isinstance(drive_b, ConstantCurrent) else None

    va = float(initial_v_a)
    vb = float(initial_v_b)
    pa = step_phase(params_a, Phase.INSULATING, va)
    pb = step_phase(params_b, Phase.INSULATING, vb)
    met_a = pa is Phase.METALLIC
    met_b = pb is Phase.METALLIC

    vth_a, vhl_a = params_a.v_th, params_a.v_hl
    vth_b, vhl_b = params_b.v_th, params_b.v_hl
    # Branch constants as (offset voltage, 1/r) per phase.
    ins_a = (params_a.v_oi, 1.0 / params_a.r_i)
    metl_a = (params_a.v_om, 1.0 / params_a.r_m)
    ins_b = (params_b.v_oi, 1.0 / params_b.r_i)
    metl_b = (params_b.v_om, 1.0 / params_b.r_m)

    out_a = np.empty(n_steps + 1)
    out_b = np.empty(n_steps + 1)
    out_a[0] = va
    out_b[0] = vb

    for k in range(n_steps):
        t_step = k * dt
        ia = const_ia if const_ia is not None else _drive_current(drive_a, t_step, va)
        ib = const_ib if const_ib is not None else _drive_current(drive_b, t_step, vb)
        if not ia > 0.0 or not ib > 0.0:
            raise ValueError(f"drive current nonpositive at t={t_step!r} s")

        h = dt
        for _ in range(_MAX_SWITCHES_PER_STEP):
            voa, ga = metl_a if met_a else ins_a
            vob, gb = metl_b if met_b else ins_b

            ka1 = (ia - (va - voa) * ga - va * inv_rl_a - (va - vb) * inv_rc) * inv_ca
            kb1 = (ib - (vb - vob) * gb - vb * inv_rl_b + (va - vb) * inv_rc) * inv_cb
            a2 = va + 0.5 * h * ka1
            b2 = vb + 0.5 * h * kb1
            ka2 = (ia - (a2 - voa) * ga - a2 * inv_rl_a - (a2 - b2) * inv_rc) * inv_ca
            kb2 = (ib - (b2 - vob) * gb - b2 * inv_rl_b + (a2 - b2) * inv_rc) * inv_cb
            a3 = va + 0.5 * h * ka2
            b3 = vb + 0.5 * h * kb2
            ka3 = (ia - (a3 - voa) * ga - a3 * inv_rl_a - (a3 - b3) * inv_rc) * inv_ca
            kb3 = (ib - (b3 - vob) * gb - b3 * inv_rl_b + (a3 - b3) * inv_rc) * inv_cb
            a4 = va + h * ka3
            b4 = vb + h * kb3
            ka4 = (ia - (a4 - voa) * ga - a4 * inv_rl_a - (a4 - b4) * inv_rc) * inv_ca
            kb4 = (ib - (b4 - vob) * gb - b4 * inv_rl_b + (a4 - b4) * inv_rc) * inv_cb
            va_new = va + h * (ka1 + 2.0 * (ka2 + ka3) + ka4) / 6.0
            vb_new = vb + h * (kb1 + 2.0 * (kb2 + kb3) + kb4) / 6.0

            # Crossing fractions (linear interpolation within the step).
            theta_a = theta_b = 2.0
            if not met_a:
                if va < vth_a <= va_new:
                    theta_a = (vth_a - va) / (va_new - va)
            elif va > vhl_a >= va_new:
                theta_a = (vhl_a - va) / (va_new - va)
            if not met_b:
                if vb < vth_b <= vb_new:
                    theta_b = (vth_b - vb) / (vb_new - vb)
            elif vb > vhl_b >= vb_new:
                theta_b = (vhl_b - vb) / (vb_new - vb)

            if theta_a > 1.0 and theta_b > 1.0:
                va, vb = va_new, vb_new
                break
            theta = min(theta_a, theta_b)
            va = va + theta * (va_new - va)
            vb = vb + theta * (vb_new - vb)
            if theta_a <= theta_b:
                va = vth_a if not met_a else vhl_a
                met_a = not met_a
            if theta_b <= theta_a:
                vb = vth_b if not met_b else vhl_b
                met_b = not met_b
            h *= (1.0 - theta)
            if h <= 0.0:
                break
        else:
            raise RuntimeError(
                f"more than {_MAX_SWITCHES_PER_STEP} phase switches within one "
                f"dt step at t={t_step!r} s; dt is too coarse for this pair"
            )
        out_a[k + 1] = va
        out_b[k + 1] = vb

    return Waveform(dt, out_a, t0=0.0), Waveform(dt, out_b, t0=0.0)
