"""Waveform analysis: crossings, cycles, fits, parameter extraction."""

import math

import numpy as np
import pytest

from mott_osc.analysis import (FitError, compute_jitter,
                               extract_model_params,
                               extract_series_resistance, fit_exponential,
                               frequency_stats, mobility_y_function,
                               rising_crossings, segment_cycles)
from mott_osc.device import MemristorParams
from mott_osc.transient import CircuitConfig, ConstantCurrent, simulate_single
from mott_osc.waveform import Waveform

from conftest import C_L, I_BIAS, REF


def sawtooth(n_cycles: int = 5, period: float = 1e-6, dt: float = 1e-9,
             lo: float = 0.0, hi: float = 1.0) -> Waveform:
    """Rising ramp with an instant reset; crossings land mid-ramp."""
    per_cycle = round(period / dt)
    one = np.linspace(lo, hi, per_cycle, endpoint=False)
    return Waveform(dt, np.tile(one, n_cycles), t0=0.0)


# ---------------------------------------------------------------------------
# Crossings and cycles


def test_rising_crossings_interpolated_times():
    w = sawtooth()
    t = rising_crossings(w, trigger=0.5, hysteresis=0.2)
    assert t.size == 5
    # the ramp passes 0.5 exactly halfway through each cycle
    expected = 0.5e-6 + 1e-6 * np.arange(5)
    assert np.allclose(t, expected, atol=2e-9)


def test_rising_crossings_hysteresis_swallows_ripple():
    # a dip to just below trigger must not re-fire while still above the
    # re-arm level trigger - hysteresis
    dt = 1e-9
    v = np.concatenate([
        np.linspace(0.0, 0.6, 300),     # first crossing of 0.5
        np.linspace(0.6, 0.45, 100),    # dip below trigger, above 0.3
        np.linspace(0.45, 0.9, 300),    # would re-fire without hysteresis
        np.linspace(0.9, 0.0, 200),     # full reset
        np.linspace(0.0, 0.9, 300),     # genuine second crossing
    ])
    w = Waveform(dt, v, t0=0.0)
    assert rising_crossings(w, trigger=0.5, hysteresis=0.2).size == 2
    assert rising_crossings(w, trigger=0.5, hysteresis=0.01).size == 3


def test_rising_crossings_trigger_outside_range():
    w = sawtooth()
    with pytest.raises(ValueError, match="outside"):
        rising_crossings(w, trigger=2.0)


def test_segment_cycles_counts_and_extrema():
    w = sawtooth(n_cycles=6)
    cycles = segment_cycles(w, trigger=0.5, hysteresis=0.2)
    assert len(cycles) == 5            # fenceposts: 6 crossings span 5 cycles
    for c in cycles:
        assert c.period == pytest.approx(1e-6, rel=1e-3)
        assert c.frequency == pytest.approx(1e6, rel=1e-3)
        assert c.v_max == pytest.approx(1.0, abs=2e-3)
        assert c.v_min == pytest.approx(0.0, abs=2e-3)
        assert c.energy is None


def test_segment_cycles_energy_with_bias():
    w = sawtooth(n_cycles=4)
    cycles = segment_cycles(w, trigger=0.5, hysteresis=0.2, i_bias=1e-5)
    # mean ramp voltage is ~0.5, so each cycle burns ~ i * 0.5 * T
    for c in cycles:
        assert c.energy == pytest.approx(1e-5 * 0.5 * 1e-6, rel=0.05)


def test_segment_cycles_too_few_crossings_is_empty():
    w = Waveform(1e-9, np.linspace(0.0, 1.0, 1000), t0=0.0)
    assert segment_cycles(w, trigger=0.5) == []


def test_frequency_stats_summary():
    w = sawtooth(n_cycles=9)
    stats = frequency_stats(segment_cycles(w, trigger=0.5, hysteresis=0.2))
    assert stats.mean == pytest.approx(1e6, rel=1e-3)
    assert stats.median == pytest.approx(1e6, rel=1e-3)
    assert stats.sigma < 1e3
    assert stats.counts.sum() == 8


def test_frequency_stats_fixed_bin_width():
    w = sawtooth(n_cycles=9)
    stats = frequency_stats(segment_cycles(w, trigger=0.5, hysteresis=0.2),
                            bin_width=1e4)
    assert np.allclose(np.diff(stats.bin_edges), 1e4)
    with pytest.raises(ValueError):
        frequency_stats([], bin_width=1e4)


# ---------------------------------------------------------------------------
# Exponential fit


def test_fit_exponential_recovers_synthetic_segment():
    tau, v0, v_a = 3.7e-7, 0.6, 0.95
    t = np.arange(0, 1.2e-6, 2e-9)
    w = Waveform(2e-9, v_a + (v0 - v_a) * np.exp(-t / tau), t0=0.0)
    fit = fit_exponential(w, 0.0, 1.2e-6)
    assert fit.tau == pytest.approx(tau, rel=1e-6)
    assert fit.v_a == pytest.approx(v_a, rel=1e-6)
    assert fit.v0 == pytest.approx(v0, rel=1e-6)
    assert fit.rms_residual < 1e-9
    # predict() reproduces the samples it was fitted to
    assert np.allclose(fit.predict(t), w.samples, atol=1e-8)


def test_fit_exponential_rejects_flat_and_short():
    w = Waveform(1e-9, np.full(100, 0.5), t0=0.0)
    with pytest.raises(FitError, match="flat"):
        fit_exponential(w, 0.0, 9e-8)
    with pytest.raises(FitError, match="4"):
        fit_exponential(Waveform(1e-9, np.linspace(0, 1, 100), 0.0),
                        0.0, 2e-9)
    with pytest.raises(ValueError):
        fit_exponential(w, 5e-8, 1e-8)


# ---------------------------------------------------------------------------
# Model parameter extraction


def test_extract_round_trips_simulated_device(ref_params):
    cfg = CircuitConfig(drive=ConstantCurrent(I_BIAS), c_l=C_L, r_l=math.inf)
    wf, _ = simulate_single(ref_params, cfg, 30e-6, initial_v=REF["v_hl"])
    got, spread = extract_model_params(wf, C_L, I_BIAS)
    assert got.r_i == pytest.approx(REF["r_i"], rel=1e-6)
    assert got.r_m == pytest.approx(REF["r_m"], rel=1e-6)
    assert got.v_oi == pytest.approx(REF["v_oi"], rel=1e-6)
    assert got.v_om == pytest.approx(REF["v_om"], rel=1e-6)
    # switching levels are read off sampled extrema, so they carry one
    # sample step of quantization
    assert got.v_th == pytest.approx(REF["v_th"], abs=1e-3)
    assert got.v_hl == pytest.approx(REF["v_hl"], abs=1e-3)
    assert spread.n_cycles >= 10
    assert spread.n_rise_fits >= spread.n_cycles - 1
    assert set(spread.quartiles) == set(REF)
    q1, med, q3 = spread.quartiles["r_i"]
    assert q1 <= med <= q3


def test_extract_needs_oscillation(ref_params):
    cfg = CircuitConfig(drive=ConstantCurrent(5e-6), c_l=C_L, r_l=math.inf)
    wf, _ = simulate_single(ref_params, cfg, 10e-6, initial_v=0.3)
    with pytest.raises(ValueError):
        extract_model_params(wf, C_L, 5e-6)


# ---------------------------------------------------------------------------
# Jitter


def test_jitter_of_shifted_copy_is_the_shift(ref_params):
    cfg = CircuitConfig(drive=ConstantCurrent(I_BIAS), c_l=C_L, r_l=math.inf)
    wf, _ = simulate_single(ref_params, cfg, 30e-6, initial_v=REF["v_hl"])
    shifted = Waveform(wf.dt, wf.samples.copy(), t0=wf.t0 + 3e-9)
    jit = compute_jitter(wf, shifted)
    assert jit.delays.size >= 10
    assert float(np.mean(jit.delays)) == pytest.approx(3e-9, rel=1e-6)
    assert jit.sigma() < 1e-15


def test_jitter_rejects_unpairable_records(ref_params):
    cfg = CircuitConfig(drive=ConstantCurrent(I_BIAS), c_l=C_L, r_l=math.inf)
    wf, _ = simulate_single(ref_params, cfg, 30e-6, initial_v=REF["v_hl"])
    short, _ = simulate_single(ref_params, cfg, 10e-6, initial_v=REF["v_hl"])
    with pytest.raises(ValueError, match="pair"):
        compute_jitter(wf, short)


# ---------------------------------------------------------------------------
# Transistor test structures


def test_series_resistance_from_length_scaling():
    r_sd = 331e3
    slope = 2.2e10                      # channel resistance per meter
    lengths = np.array([1.0, 2.0, 3.0, 5.0, 8.0]) * 1e-6
    pts = [(float(l), float(r_sd + slope * l)) for l in lengths]
    got_r, got_slope = extract_series_resistance(pts)
    assert got_r == pytest.approx(r_sd, rel=1e-9)
    assert got_slope == pytest.approx(slope, rel=1e-9)
    # evaluating at a nonzero length offset moves along the same line
    shifted, _ = extract_series_resistance(pts, delta_l=1e-6)
    assert shifted == pytest.approx(r_sd + slope * 1e-6, rel=1e-9)


def test_series_resistance_validation():
    with pytest.raises(ValueError):
        extract_series_resistance([(1e-6, 4e5)])
    with pytest.raises(ValueError, match="identical"):
        extract_series_resistance([(1e-6, 4e5), (1e-6, 5e5)])


def _square_law_sweep(mu: float, r_sd: float, w: float, l: float,
                      c_ox: float, v_ds: float, v_t: float,
                      v_g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear-region drain current and transconductance with source/drain
    degeneration; the Y-function of this family is exactly linear."""
    beta = (w / l) * c_ox * mu
    v_ov = v_g - v_t
    i_d = beta * v_ov * v_ds / (1.0 + beta * r_sd * v_ov)
    g_m = beta * v_ds / (1.0 + beta * r_sd * v_ov) ** 2
    return i_d, g_m


def test_mobility_y_function_immune_to_series_resistance():
    mu = 49.7e-4                        # m^2 / (V s)
    w, l, c_ox, v_ds, v_t = 10e-6, 1e-6, 3.45e-3, 0.05, 0.4
    v_g = np.linspace(0.8, 2.4, 33)
    for r_sd in (0.0, 1e5, 5e5):
        i_d, g_m = _square_law_sweep(mu, r_sd, w, l, c_ox, v_ds, v_t, v_g)
        fit = mobility_y_function(i_d, g_m, v_g, w, l, c_ox, v_ds)
        assert fit.mu_eff == pytest.approx(mu, rel=0.01), r_sd
        # single-regime data: both detected slopes coincide
        assert fit.s2 == pytest.approx(fit.s1, rel=0.02)


def test_mobility_y_function_detects_slope_break():
    w, l, c_ox, v_ds, v_t = 10e-6, 1e-6, 3.45e-3, 0.05, 0.4
    v_g = np.linspace(0.8, 2.4, 41)
    i1, g1 = _square_law_sweep(60e-4, 2e5, w, l, c_ox, v_ds, v_t, v_g)
    i2, g2 = _square_law_sweep(20e-4, 2e5, w, l, c_ox, v_ds, v_t, v_g)
    v_break = 1.6
    hi = v_g >= v_break
    # graft the low-mobility family above the break (discontinuity in g_m
    # is fine; the detector keys on the Y-function slope change)
    i_d = np.where(hi, i2, i1)
    g_m = np.where(hi, g2, g1)
    fit = mobility_y_function(i_d, g_m, v_g, w, l, c_ox, v_ds)
    assert fit.mu_eff == pytest.approx(60e-4, rel=0.05)
    assert abs(fit.v_break - v_break) < 0.2
    assert fit.s2 < fit.s1


def test_mobility_y_function_validation():
    v = np.linspace(1.0, 2.0, 10)
    with pytest.raises(ValueError):
        mobility_y_function(v, -v, v, 1e-6, 1e-6, 1e-3, 0.05)
    with pytest.raises(ValueError):
        mobility_y_function(v, v, v, 1e-6, 1e-6, 1e-3, 0.0)
    with pytest.raises(ValueError):
        mobility_y_function(v[:4], v[:4], v[:4], 1e-6, 1e-6, 1e-3, 0.05)
