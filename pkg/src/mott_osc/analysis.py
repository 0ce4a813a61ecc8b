"""Measurement-style analysis of oscillator waveforms.

Everything here treats a waveform the way the bench instruments treat the
measured trace: cycles are delimited by hysteretic rising-trigger crossings,
per-phase exponentials are least-squares fitted to recover the circuit time
constants and asymptotes, and device parameters are aggregated per cycle by
medians so a single bad cycle cannot skew the extraction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .device import PARAM_FIELDS, MemristorParams
from .waveform import Waveform

log = logging.getLogger(__name__)


class FitError(ValueError):
    """Raised when a least-squares fit fails to produce a usable result."""


# ---------------------------------------------------------------------------
# Cycle segmentation


@dataclass(frozen=True)
class Cycle:
    """One oscillation cycle between consecutive rising trigger crossings.

    t_start/t_end are interpolated crossing times (s); i0/i1 the half-open
    sample index range covering the cycle; v_max/v_min the cycle extrema (V);
    energy the bias energy over the cycle (J) when a bias current was given.
    """

    t_start: float
    t_end: float
    period: float
    frequency: float
    v_max: float
    v_min: float
    i0: int
    i1: int
    energy: float | None = None


def _trigger_levels(
    samples: np.ndarray, trigger: float | None, hysteresis: float | None
) -> tuple[float, float]:
    v_lo = float(samples.min())
    v_hi = float(samples.max())
    swing = v_hi - v_lo
    if trigger is None:
        trigger = v_lo + 0.5 * swing
    if hysteresis is None:
        hysteresis = 0.1 * swing
    if not v_lo <= trigger <= v_hi:
        raise ValueError(
            f"trigger {trigger!r} V outside waveform range [{v_lo!r}, {v_hi!r}] V"
        )
    if hysteresis < 0.0:
        raise ValueError("hysteresis must be >= 0")
    return trigger, hysteresis


def rising_crossings(
    w: Waveform,
    trigger: float | None = None,
    hysteresis: float | None = None,
) -> np.ndarray:
    """Interpolated times of hysteretic rising crossings of the trigger level.

    A crossing fires when the signal passes up through the trigger, and the
    detector re-arms only after the signal has dropped below
    trigger - hysteresis.  Defaults: mid-swing trigger, hysteresis 10% of
    the swing.
    """
    v = w.samples
    trigger, hysteresis = _trigger_levels(v, trigger, hysteresis)
    low = trigger - hysteresis

    up = np.flatnonzero((v[:-1] < trigger) & (v[1:] >= trigger))
    if up.size == 0:
        return np.empty(0)
    below = np.flatnonzero(v <= low)

    times = []
    armed = bool(v[0] <= low)
    last_fire = -1
    for k in up:
        if not armed:
            # Re-arm only if some sample since the last firing dipped below.
            j = np.searchsorted(below, last_fire, side="right")
            if j >= below.size or below[j] > k:
                continue
            armed = True
        frac = (trigger - v[k]) / (v[k + 1] - v[k])
        times.append(w.t0 + (k + frac) * w.dt)
        armed = False
        last_fire = k
    return np.asarray(times)


def segment_cycles(
    w: Waveform,
    trigger: float | None = None,
    hysteresis: float | None = None,
    i_bias: float | None = None,
) -> list[Cycle]:
    """Split a waveform into cycles at rising trigger crossings.

    Returns an empty list (with a log diagnostic) when fewer than two
    crossings exist.  Cycle energy is filled in when i_bias is given, as the
    trapezoidal integral of v * i_bias over the cycle's samples.
    """
    crossings = rising_crossings(w, trigger, hysteresis)
    if crossings.size < 2:
        log.debug(
            "segment_cycles: %d rising crossing(s); no complete cycle",
            crossings.size,
        )
        return []
    cycles = []
    for t_start, t_end in zip(crossings[:-1], crossings[1:]):
        i0 = int(math.ceil((t_start - w.t0) / w.dt))
        i1 = int(math.ceil((t_end - w.t0) / w.dt))
        seg = w.samples[i0:i1]
        period = t_end - t_start
        energy = None
        if i_bias is not None:
            energy = i_bias * float(np.trapezoid(seg, dx=w.dt))
        cycles.append(
            Cycle(
                t_start=float(t_start),
                t_end=float(t_end),
                period=float(period),
                frequency=1.0 / float(period),
                v_max=float(seg.max()),
                v_min=float(seg.min()),
                i0=i0,
                i1=i1,
                energy=energy,
            )
        )
    return cycles


# ---------------------------------------------------------------------------
# Exponential segment fit


@dataclass(frozen=True)
class ExpFit:
    """Least-squares fit of v(t) = v_a + (v0 - v_a) exp(-(t - t0)/tau)."""

    v0: float
    v_a: float
    tau: float
    t0: float
    rms_residual: float

    def predict(self, t: np.ndarray) -> np.ndarray:
        return self.v_a + (self.v0 - self.v_a) * np.exp(-(np.asarray(t) - self.t0)
                                                        / self.tau)


def fit_exponential(w: Waveform, t_from: float, t_to: float) -> ExpFit:
    """Fit a single exponential relaxation over waveform samples in
    [t_from, t_to].

    Initial guesses: the asymptote is extrapolated slightly past the last
    sample, the time constant from a log-linearization.  The refinement is
    bounded and converges on relative steps below 1e-10; noise-free
    synthetic segments are recovered to ~1e-6 relative.
    """
    if not t_to > t_from:
        raise ValueError(f"need t_to > t_from, got [{t_from!r}, {t_to!r}]")
    times = w.times()
    mask = (times >= t_from - 1e-12) & (times <= t_to + 1e-12)
    t = times[mask]
    v = w.samples[mask]
    if t.size < 4:
        raise FitError(
            f"only {t.size} samples in [{t_from!r}, {t_to!r}]; need >= 4"
        )
    t0 = float(t[0])
    tl = t - t0

    # Asymptote guess: push past the last sample in the direction of travel
    # so the log-linearization sees a single-signed residual.
    travel = v[-1] - v[0]
    if travel == 0.0:
        raise FitError("segment is flat; nothing to fit")
    va0 = v[-1] + 0.1 * travel
    d = np.abs(v - va0)
    floor = 1e-15 * max(1.0, float(np.max(d)))
    good = d > floor
    if np.count_nonzero(good) >= 2:
        slope = np.polyfit(tl[good], np.log(d[good]), 1)[0]
        tau0 = -1.0 / slope if slope < 0.0 else (tl[-1] - tl[0])
    else:
        tau0 = (tl[-1] - tl[0]) / 3.0

    def residuals(p: np.ndarray) -> np.ndarray:
        v0, va, tau = p
        return va + (v0 - va) * np.exp(-tl / tau) - v

    p0 = np.array([v[0], va0, max(tau0, 1e-18)])
    res = optimize.least_squares(
        residuals, p0, xtol=1e-10, ftol=1e-14, gtol=1e-14, max_nfev=200 * 4
    )
    v0_f, va_f, tau_f = res.x
    if not (np.all(np.isfinite(res.x)) and tau_f > 0.0):
        raise FitError(f"exponential fit did not converge: x={res.x!r}")
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return ExpFit(v0=float(v0_f), v_a=float(va_f), tau=float(tau_f), t0=t0,
                  rms_residual=rms)


# ---------------------------------------------------------------------------
# Device parameter extraction


@dataclass(frozen=True)
class ExtractionSpread:
    """Per-parameter (q1, median, q3) quartiles across cycles, plus counts."""

    quartiles: dict
    n_cycles: int
    n_rise_fits: int
    n_fall_fits: int


def _band_indices(
    v: np.ndarray, i_from: int, i_to: int, v_min: float, v_max: float
) -> tuple[int, int]:
    """Trim [i_from, i_to] to samples inside the 5%-95% swing band, dropping
    the switching discontinuity at the segment ends."""
    swing = v_max - v_min
    lo_level = v_min + 0.05 * swing
    hi_level = v_min + 0.95 * swing
    seg = v[i_from: i_to + 1]
    inside = np.flatnonzero((seg >= lo_level) & (seg <= hi_level))
    if inside.size < 4:
        return i_from, i_from  # signal "too short" to the caller
    return i_from + int(inside[0]), i_from + int(inside[-1])


def extract_model_params(
    w: Waveform,
    c_l: float,
    i_bias: float,
    trigger: float | None = None,
) -> tuple[MemristorParams, ExtractionSpread]:
    """Recover the device parameters from an oscillation waveform.

    Per cycle: the extrema give the dynamic threshold/holding voltages; the
    falling and rising exponential fits give tau_f and tau_r, hence
    r = tau / c_l and the branch offsets v_o = v_asymptote - i_bias * r.
    Per-parameter medians across cycles are returned together with the
    quartile spread.  Needs at least 5 complete cycles.
    """
    if not c_l > 0.0:
        raise ValueError(f"c_l must be > 0, got {c_l!r}")
    cycles = segment_cycles(w, trigger)
    if len(cycles) < 5:
        raise ValueError(
            f"waveform contains {len(cycles)} complete cycles; need >= 5"
        )
    v = w.samples
    times = w.times()

    peaks = []
    troughs = []
    for c in cycles:
        seg = v[c.i0: c.i1]
        p_rel = int(np.argmax(seg))
        t_rel = p_rel + int(np.argmin(seg[p_rel:]))
        peaks.append(c.i0 + p_rel)
        troughs.append(c.i0 + t_rel)

    est = {name: [] for name in PARAM_FIELDS}
    n_fall = n_rise = 0
    for ci, c in enumerate(cycles):
        est["v_th"].append(c.v_max)
        est["v_hl"].append(c.v_min)

        # Falling branch: peak -> trough inside this cycle.
        j0, j1 = _band_indices(v, peaks[ci], troughs[ci], c.v_min, c.v_max)
        if j1 - j0 >= 3:
            try:
                fit = fit_exponential(w, times[j0], times[j1])
            except FitError:
                fit = None
            if fit is not None:
                r_m = fit.tau / c_l
                est["r_m"].append(r_m)
                est["v_om"].append(fit.v_a - i_bias * r_m)
                n_fall += 1

        # Rising branch: this trough -> next cycle's peak.
        if ci + 1 < len(cycles):
            j0, j1 = _band_indices(v, troughs[ci], peaks[ci + 1], c.v_min, c.v_max)
            if j1 - j0 >= 3:
                try:
                    fit = fit_exponential(w, times[j0], times[j1])
                except FitError:
                    fit = None
                if fit is not None:
                    r_i = fit.tau / c_l
                    est["r_i"].append(r_i)
                    est["v_oi"].append(fit.v_a - i_bias * r_i)
                    n_rise += 1

    if n_fall < 3 or n_rise < 3:
        raise FitError(
            f"too few usable per-cycle fits (rising {n_rise}, falling {n_fall})"
        )
    medians = {name: float(np.median(est[name])) for name in PARAM_FIELDS}
    quartiles = {
        name: tuple(float(q) for q in np.percentile(est[name], [25, 50, 75]))
        for name in PARAM_FIELDS
    }
    try:
        params = MemristorParams(**medians)
    except ValueError as exc:
        raise FitError(f"extracted parameters violate model invariants: {exc}")
    spread = ExtractionSpread(
        quartiles=quartiles,
        n_cycles=len(cycles),
        n_rise_fits=n_rise,
        n_fall_fits=n_fall,
    )
    return params, spread


# ---------------------------------------------------------------------------
# Jitter and frequency statistics


@dataclass(frozen=True)
class JitterTrace:
    """Per-spike delays between two records.

    pairs: (index of the spike in record A, delay t_b - t_a in seconds),
    from order-preserving nearest-neighbor pairing of rising edges.
    """

    pairs: list

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for _, d in self.pairs])

    def sigma(self) -> float:
        d = self.delays
        return float(d.std()) if d.size else math.nan


def compute_jitter(
    w_a: Waveform,
    w_b: Waveform,
    trigger: float | None = None,
    hysteresis: float | None = None,
) -> JitterTrace:
    """Pair rising edges of two records and report per-pair delays.

    Records whose edge counts differ by more than 10% cannot be paired
    meaningfully and raise ValueError.
    """
    ta = rising_crossings(w_a, trigger, hysteresis)
    tb = rising_crossings(w_b, trigger, hysteresis)
    if ta.size == 0 or tb.size == 0:
        raise ValueError("one of the records contains no rising edges")
    if abs(ta.size - tb.size) > 0.1 * max(ta.size, tb.size):
        raise ValueError(
            f"unpairable records: {ta.size} vs {tb.size} rising edges "
            f"(difference exceeds 10%)"
        )
    pairs = []
    j_prev = -1
    for i, t in enumerate(ta):
        j0 = int(np.searchsorted(tb, t))
        cands = [j for j in (j0 - 1, j0) if j_prev < j < tb.size]
        if not cands:
            continue
        j = min(cands, key=lambda jj: abs(tb[jj] - t))
        pairs.append((i, float(tb[j] - t)))
        j_prev = j
    return JitterTrace(pairs=pairs)


@dataclass(frozen=True)
class FrequencyStats:
    mean: float
    median: float
    sigma: float
    bin_edges: np.ndarray
    counts: np.ndarray


def frequency_stats(cycles: list[Cycle], bin_width: float | None = None
                    ) -> FrequencyStats:
    """Mean / median / standard deviation of per-cycle frequency plus a
    histogram (automatic binning unless bin_width is given in Hz)."""
    if not cycles:
        raise ValueError("no cycles to summarize")
    f = np.array([c.frequency for c in cycles])
    if bin_width is None:
        counts, edges = np.histogram(f, bins="auto")
    else:
        if not bin_width > 0.0:
            raise ValueError("bin_width must be > 0")
        lo = math.floor(f.min() / bin_width) * bin_width
        nbins = max(1, int(math.ceil((f.max() - lo) / bin_width + 1e-9)))
        edges = lo + bin_width * np.arange(nbins + 1)
        counts, edges = np.histogram(f, bins=edges)
    return FrequencyStats(
        mean=float(f.mean()),
        median=float(np.median(f)),
        sigma=float(f.std()),
        bin_edges=edges,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# Transistor test structures


def extract_series_resistance(
    points: list[tuple[float, float]],
    delta_l: float = 0.0,
) -> tuple[float, float]:
    """Series resistance from total resistance vs channel length.

    Least-squares line through (length, resistance) pairs; returns
    (r_sd, slope) where r_sd is the line evaluated at the length offset
    delta_l (0 by default).  Needs at least two distinct lengths.
    """
    if len(points) < 2:
        raise ValueError("need at least 2 (length, resistance) points")
    lengths = np.array([p[0] for p in points], dtype=float)
    r_tot = np.array([p[1] for p in points], dtype=float)
    if np.ptp(lengths) == 0.0:
        raise ValueError("all lengths identical; the line is rank-deficient")
    slope, intercept = np.polyfit(lengths, r_tot, 1)
    return float(intercept + slope * delta_l), float(slope)


@dataclass(frozen=True)
class MobilityFit:
    """Y-function mobility extraction result.

    mu_eff  effective mobility from the low-gate-voltage slope, m^2/(V s)
    s1      slope of the low-V_G segment of Y(V_G)
    s2      slope of the high-V_G segment (reported, not converted)
    v_break gate voltage at the detected slope change
    """

    mu_eff: float
    s1: float
    s2: float
    v_break: float


def mobility_y_function(
    i_d: np.ndarray,
    g_m: np.ndarray,
    v_g: np.ndarray,
    w: float,
    l: float,
    c_ox: float,
    v_ds: float,
) -> MobilityFit:
    """Effective mobility via the Y-function, Y = I_D / sqrt(g_m).

    For a linear-region device the Y-function is linear in gate voltage with
    (dY/dV_G)^2 = (W/L) C_ox mu_eff V_DS, independent of the series
    resistance.  Two slope regimes are detected with a two-segment
    least-squares scan; the low-gate-voltage slope S1 (accumulation) sets
    mu_eff, the other slope is reported as-is.
    """
    i_d = np.abs(np.asarray(i_d, dtype=float))
    g_m = np.asarray(g_m, dtype=float)
    v_g = np.asarray(v_g, dtype=float)
    if not (i_d.shape == g_m.shape == v_g.shape) or i_d.ndim != 1:
        raise ValueError("i_d, g_m, v_g must be 1-D arrays of equal length")
    if i_d.size < 6:
        raise ValueError("need at least 6 bias points")
    if np.any(g_m <= 0.0):
        raise ValueError("transconductance must be positive at every point")
    if v_ds == 0.0:
        raise ValueError("v_ds must be nonzero")
    if not (w > 0.0 and l > 0.0 and c_ox > 0.0):
        raise ValueError("w, l, c_ox must be > 0")

    order = np.argsort(v_g)
    v_g = v_g[order]
    y = i_d[order] / np.sqrt(g_m[order])

    def sse(x: np.ndarray, z: np.ndarray) -> tuple[float, float]:
        coef, res = np.polyfit(x, z, 1, full=True)[:2]
        total = float(res[0]) if res.size else 0.0
        return total, float(coef[0])

    n = v_g.size
    best = None
    for b in range(3, n - 2):
        e1, s1 = sse(v_g[:b], y[:b])
        e2, s2 = sse(v_g[b:], y[b:])
        key = e1 + e2
        if best is None or key < best[0]:
            best = (key, s1, s2, float(v_g[b]))
    _, s1, s2, v_break = best
    mu_eff = (s1 * s1) * l / (w * c_ox * abs(v_ds))
    return MobilityFit(mu_eff=float(mu_eff), s1=float(s1), s2=float(s2),
                       v_break=v_break)
