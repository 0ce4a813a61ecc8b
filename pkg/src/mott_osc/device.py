"""Piecewise-affine two-state model of a volatile Mott memristor.

The device is either insulating or metallic.  Each branch of the measured
hysteretic I-V is approximated near the switching region by an affine law

    V = V_o + R * I

with a branch-specific offset voltage ``V_o`` and differential resistance
``R``.  Switching is abrupt and hysteretic: the insulating device turns
metallic once the applied voltage reaches the threshold ``v_th``, and the
metallic device returns to insulating once the voltage drops to the holding
level ``v_hl`` (v_hl < v_th).

All six branch parameters drift approximately linearly with base-plane
temperature over the operating range, which :class:`TemperatureModel`
captures with one slope per parameter.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

PARAM_FIELDS = ("v_th", "v_hl", "r_i", "r_m", "v_oi", "v_om")

PARAM_UNITS = {
    "v_th": "V",
    "v_hl": "V",
    "r_i": "ohm",
    "r_m": "ohm",
    "v_oi": "V",
    "v_om": "V",
}


class Phase(enum.Enum):
    """Resistive state of the device."""

    INSULATING = "insulating"
    METALLIC = "metallic"


@dataclass(frozen=True)
class MemristorParams:
    """Affine branch parameters at one fixed temperature.

    v_th   threshold voltage, V (insulating -> metallic at V >= v_th)
    v_hl   holding voltage, V   (metallic -> insulating at V <= v_hl)
    r_i    insulating branch differential resistance, ohm
    r_m    metallic branch differential resistance, ohm
    v_oi   insulating branch offset voltage, V
    v_om   metallic branch offset voltage, V
    """

    v_th: float
    v_hl: float
    r_i: float
    r_m: float
    v_oi: float
    v_om: float

    def __post_init__(self) -> None:
        for name in PARAM_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if not self.v_th > self.v_hl:
            raise ValueError(
                f"hysteresis window collapsed: v_th={self.v_th!r} <= v_hl={self.v_hl!r}"
            )
        if not (self.r_i > self.r_m > 0.0):
            raise ValueError(
                f"branch resistances must satisfy r_i > r_m > 0, "
                f"got r_i={self.r_i!r}, r_m={self.r_m!r}"
            )

    def branch(self, phase: Phase) -> tuple[float, float]:
        """(offset voltage, resistance) of the active branch."""
        if phase is Phase.INSULATING:
            return self.v_oi, self.r_i
        return self.v_om, self.r_m

    def to_json_dict(self) -> dict:
        doc = {name: getattr(self, name) for name in PARAM_FIELDS}
        doc["units"] = dict(PARAM_UNITS)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MemristorParams":
        missing = [name for name in PARAM_FIELDS if name not in doc]
        if missing:
            raise ValueError(f"device parameters missing fields: {missing}")
        return cls(**{name: float(doc[name]) for name in PARAM_FIELDS})


@dataclass(frozen=True)
class ParamSlopes:
    """Per-degree drift of each branch parameter (V/K or ohm/K)."""

    v_th: float = 0.0
    v_hl: float = 0.0
    r_i: float = 0.0
    r_m: float = 0.0
    v_oi: float = 0.0
    v_om: float = 0.0


@dataclass(frozen=True)
class TemperatureModel:
    """Linear temperature dependence of the branch parameters.

    base    parameters measured at the reference temperature t_ref
    t_ref   reference temperature, Celsius
    slopes  per-degree drift of each parameter
    t_min, t_max   validity interval, Celsius
    """

    base: MemristorParams
    t_ref: float = 25.0
    slopes: ParamSlopes = field(default_factory=ParamSlopes)
    t_min: float = 20.0
    t_max: float = 50.0

    def __post_init__(self) -> None:
        if not self.t_min < self.t_max:
            raise ValueError(f"empty validity interval [{self.t_min}, {self.t_max}]")

    def to_json_dict(self) -> dict:
        units = dict(PARAM_UNITS)
        units.update({"t_ref": "degC", "t_min": "degC", "t_max": "degC",
                      "slopes": "per kelvin"})
        return {
            "base": {name: getattr(self.base, name) for name in PARAM_FIELDS},
            "t_ref": self.t_ref,
            "slopes": {name: getattr(self.slopes, name) for name in PARAM_FIELDS},
            "t_min": self.t_min,
            "t_max": self.t_max,
            "units": units,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TemperatureModel":
        if "base" not in doc:
            raise ValueError("temperature model requires a 'base' parameter block")
        base = MemristorParams.from_json_dict(doc["base"])
        slopes_doc = doc.get("slopes", {})
        unknown = set(slopes_doc) - set(PARAM_FIELDS)
        if unknown:
            raise ValueError(f"unknown slope fields: {sorted(unknown)}")
        slopes = ParamSlopes(**{k: float(v) for k, v in slopes_doc.items()})
        return cls(
            base=base,
            t_ref=float(doc.get("t_ref", 25.0)),
            slopes=slopes,
            t_min=float(doc.get("t_min", 20.0)),
            t_max=float(doc.get("t_max", 50.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TemperatureModel":
        return cls.from_json_dict(json.loads(text))


def params_at_temperature(model: TemperatureModel, t: float) -> MemristorParams:
    """Evaluate the linear drift model at temperature ``t`` (Celsius).

    Raises ValueError outside the validity interval or if the drifted
    parameters violate the model invariants (collapsed hysteresis window,
    inverted or nonpositive resistances).
    """
    if not (model.t_min <= t <= model.t_max):
        raise ValueError(
            f"temperature {t!r} C outside validity interval "
            f"[{model.t_min}, {model.t_max}] C"
        )
    d = t - model.t_ref
    values = {
        name: getattr(model.base, name) + getattr(model.slopes, name) * d
        for name in PARAM_FIELDS
    }
    if not values["v_th"] > values["v_hl"]:
        raise ValueError(
            f"hysteresis window collapses at {t!r} C: "
            f"v_th={values['v_th']!r} <= v_hl={values['v_hl']!r}"
        )
    if not (values["r_i"] > values["r_m"] > 0.0):
        raise ValueError(
            f"branch resistances invalid at {t!r} C: "
            f"r_i={values['r_i']!r}, r_m={values['r_m']!r}"
        )
    return MemristorParams(**values)


def step_phase(params: MemristorParams, phase: Phase, v: float) -> Phase:
    """Hysteretic state machine: the only allowed transitions are
    insulating -> metallic at v >= v_th and metallic -> insulating at v <= v_hl."""
    if phase is Phase.INSULATING:
        if v >= params.v_th:
            return Phase.METALLIC
        return Phase.INSULATING
    if v <= params.v_hl:
        return Phase.INSULATING
    return Phase.METALLIC


def branch_current(params: MemristorParams, phase: Phase, v: float) -> float:
    """Device current (A) on the active affine branch at applied voltage v."""
    v_o, r = params.branch(phase)
    return (v - v_o) / r


class IvPoint(NamedTuple):
    v: float
    i: float
    phase: Phase


def quasistatic_iv(
    params: MemristorParams,
    v_start: float,
    v_max: float,
    step: float,
) -> list[IvPoint]:
    """Voltage-driven hysteresis loop: sweep v_start -> v_max -> v_start.

    The state machine is applied at every sample, so the returned points
    trace the full loop: the upward branch switches metallic at v >= v_th,
    the downward branch returns insulating at v <= v_hl.  The sweep starts
    insulating.
    """
    if not step > 0.0:
        raise ValueError(f"sweep step must be > 0, got {step!r}")
    if not v_max > v_start:
        raise ValueError(f"v_max={v_max!r} must exceed v_start={v_start!r}")
    n = int(math.floor((v_max - v_start) / step + 1e-9))
    up = [v_start + k * step for k in range(n + 1)]
    if up[-1] < v_max - 1e-12 * max(1.0, abs(v_max)):
        up.append(v_max)
    grid = up + up[-2::-1]

    points: list[IvPoint] = []
    phase = Phase.INSULATING
    for v in grid:
        phase = step_phase(params, phase, v)
        points.append(IvPoint(v, branch_current(params, phase, v), phase))
    return points
