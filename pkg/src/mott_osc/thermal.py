"""Thermal surrogate of the insulator-metal transition and the resulting
threshold scaling of device current and switching power.

The film conductance vs temperature is modeled as a sigmoid between the
insulating and metallic plateaus.  Self-heating arguments reduce the
threshold condition to power-law scalings in the gap between the base-plane
temperature and the threshold temperature t_th:

    I_TH  ~ (t_th - T)^(2/3)
    P_TH  ~ (t_th - T)^(4/3)
    T_spike / P_TH ~ (t_th - T)^(-1/3)

The prefactors are kept exactly as the derivation writes them (they fold
film resistivity, geometry and the interface thermal resistance together);
they are calibration constants, not re-derived quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize


@dataclass(frozen=True)
class GtModel:
    """Sigmoid conductance-temperature characteristic.

    g_i, g_m  insulating / metallic plateau conductances, S
    t_imt     transition midpoint temperature, Celsius
    delta_t   transition width, K
    """

    g_i: float
    g_m: float
    t_imt: float
    delta_t: float

    def __post_init__(self) -> None:
        if not 0.0 < self.g_i < self.g_m:
            raise ValueError(
                f"need 0 < g_i < g_m, got g_i={self.g_i!r}, g_m={self.g_m!r}"
            )
        if not self.delta_t > 0.0:
            raise ValueError(f"delta_t must be > 0, got {self.delta_t!r}")


def conductance(model: GtModel, t: float | np.ndarray) -> float | np.ndarray:
    """Film conductance (S) at base-plane temperature t (Celsius).

    Strictly increasing in t; approaches g_i far below the transition and
    g_m far above it; exactly the plateau midpoint at t_imt.
    """
    t = np.asarray(t, dtype=float)
    value = model.g_i + (model.g_m - model.g_i) / (
        1.0 + np.exp((model.t_imt - t) / model.delta_t)
    )
    return float(value) if value.ndim == 0 else value


def fit_gt(data: list[tuple[float, float]]) -> GtModel:
    """Fit the sigmoid to measured (temperature, conductance) points.

    Needs at least 8 points and data on both sides of the transition;
    raises ValueError when the fitted midpoint falls outside the measured
    temperature range (transition not bracketed) or the fit fails.
    """
    if len(data) < 8:
        raise ValueError(f"need at least 8 (t, g) points, got {len(data)}")
    t = np.array([p[0] for p in data], dtype=float)
    g = np.array([p[1] for p in data], dtype=float)
    if np.any(g <= 0.0):
        raise ValueError("conductances must be positive")

    g_lo, g_hi = float(g.min()), float(g.max())
    if g_hi <= g_lo:
        raise ValueError("conductance data is constant; no transition to fit")
    order = np.argsort(t)
    ts, gs = t[order], g[order]
    dg = np.diff(gs) / np.maximum(np.diff(ts), 1e-12)
    t0 = float(ts[:-1][np.argmax(dg)]) if dg.size else float(np.median(ts))
    p0 = (g_lo, g_hi, t0, max((ts[-1] - ts[0]) / 10.0, 1e-3))

    def model(tt, g_i, g_m, t_imt, delta_t):
        return g_i + (g_m - g_i) / (1.0 + np.exp((t_imt - tt) / delta_t))

    try:
        popt, _ = optimize.curve_fit(
            model, t, g, p0=p0, maxfev=20000,
            bounds=([0.0, 0.0, -np.inf, 1e-9], [np.inf, np.inf, np.inf, np.inf]),
        )
    except RuntimeError as exc:
        raise ValueError(f"sigmoid fit did not converge: {exc}") from exc
    g_i, g_m, t_imt, delta_t = (float(x) for x in popt)
    if not t.min() <= t_imt <= t.max():
        raise ValueError(
            f"fitted transition midpoint {t_imt!r} C lies outside the data "
            f"range [{t.min()!r}, {t.max()!r}] C; the data covers one side only"
        )
    if not g_i < g_m:
        g_i, g_m = g_m, g_i
    return GtModel(g_i=g_i, g_m=g_m, t_imt=t_imt, delta_t=delta_t)


def threshold_temperature(t_imt: float, convention: str = "celsius") -> float:
    """Threshold temperature t_th = 0.9 * t_imt.

    The 0.9 factor is a numeric convention; "celsius" (default) applies it
    to the Celsius value directly, "kelvin" applies it on the absolute scale
    and converts back.  The two differ by ~27 C for a transition near 68 C,
    so the choice is surfaced rather than hidden.
    """
    if convention == "celsius":
        return 0.9 * t_imt
    if convention == "kelvin":
        return 0.9 * (t_imt + 273.15) - 273.15
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class ThermalGeometry:
    """Device geometry and film constants entering the threshold scalings.

    w_dev, l_dev  nanosheet width / length, m
    thickness     film thickness, m
    a_c           thermal contact footprint area, m^2
    a_cs          current cross-section (w_dev * thickness), m^2
    r_th0         specific interface thermal resistance, K m^2 / W
    rho_20        room-temperature film resistivity, ohm m
    r_r           insulator/metal resistance ratio (dimensionless, > 1)
    t_th          threshold temperature, Celsius
    g_eff, t_eff  optional reported effective interface conductance (W/m^2/K)
                  and thickness (m); their product must equal a_c / r_th0
                  ... per unit area, i.e. g_eff * t_eff = 1 / r_th0.
    """

    w_dev: float = 2e-6
    l_dev: float = 3e-6
    thickness: float = 60e-9
    a_c: float = 6e-12
    a_cs: float = 1.2e-13
    r_th0: float = 9e-6
    rho_20: float = 5e-3
    r_r: float = 30.0
    t_th: float = 61.2
    g_eff: float | None = None
    t_eff: float | None = None

    def __post_init__(self) -> None:
        for name in ("w_dev", "l_dev", "thickness", "a_c", "a_cs", "r_th0",
                     "rho_20"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.r_r > 1.0:
            raise ValueError(f"resistance ratio r_r must exceed 1, got {self.r_r!r}")
        if (self.g_eff is None) != (self.t_eff is None):
            raise ValueError("g_eff and t_eff must be given together")
        if self.g_eff is not None:
            product = self.g_eff * self.t_eff
            target = 1.0 / self.r_th0
            if not math.isclose(product, target, rel_tol=1e-6):
                raise ValueError(
                    f"g_eff * t_eff = {product!r} inconsistent with "
                    f"1 / r_th0 = {target!r}"
                )


def threshold_current(geom: ThermalGeometry, t: float) -> float:
    """Threshold current (A) at base-plane temperature t (Celsius).

    I_TH = (1/2) sqrt(3 R_R / (R_R - 1)) sqrt(1 / rho_20)
           sqrt(A_c / R_th0) sqrt(A_cs / L_dev) (t_th - t)^(2/3)

    Valid for t <= t_th; exactly zero at t = t_th (no driving gap); raises
    for t above the threshold temperature.
    """
    gap = geom.t_th - t
    if gap < 0.0:
        raise ValueError(
            f"temperature {t!r} C above threshold temperature {geom.t_th!r} C"
        )
    if gap == 0.0:
        return 0.0
    return (
        0.5
        * math.sqrt(3.0 * geom.r_r / (geom.r_r - 1.0))
        * math.sqrt(1.0 / geom.rho_20)
        * math.sqrt(geom.a_c / geom.r_th0)
        * math.sqrt(geom.a_cs / geom.l_dev)
        * gap ** (2.0 / 3.0)
    )


def threshold_power(geom: ThermalGeometry, t: float) -> float:
    """Switching power (W) at base-plane temperature t (Celsius).

    P_TH = (A_c / (2 R_th0)) (R_R / (R_R - 1)) (t_th - t)^(4/3); zero at
    t = t_th, error above it.
    """
    gap = geom.t_th - t
    if gap < 0.0:
        raise ValueError(
            f"temperature {t!r} C above threshold temperature {geom.t_th!r} C"
        )
    if gap == 0.0:
        return 0.0
    return (
        (geom.a_c / (2.0 * geom.r_th0))
        * (geom.r_r / (geom.r_r - 1.0))
        * gap ** (4.0 / 3.0)
    )


def spike_temp_power_ratio(geom: ThermalGeometry, t: float) -> float:
    """Spike temperature rise per unit switching power (K/W).

    2 (R_th0 / A_c) (R_R - 1) (t_th - t)^(-1/3); diverges at t = t_th.
    Multiplied by threshold_power this reduces to R_R * (t_th - t), kelvin.
    """
    gap = geom.t_th - t
    if gap <= 0.0:
        raise ValueError(
            f"temperature {t!r} C must lie strictly below t_th={geom.t_th!r} C"
        )
    return 2.0 * (geom.r_th0 / geom.a_c) * (geom.r_r - 1.0) * gap ** (-1.0 / 3.0)


DEFAULT_GT = GtModel(g_i=2e-5, g_m=6e-4, t_imt=68.0, delta_t=5.0)
DEFAULT_GEOMETRY = ThermalGeometry()
