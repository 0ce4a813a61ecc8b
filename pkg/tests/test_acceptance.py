"""Release acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail line
per criterion.  Each test pins its tolerances inline and asserts its own
runtime budget, so a regression in either accuracy or speed fails loudly.
"""
import json
import math
import time
from pathlib import Path

import numpy as np

import mott_osc
from mott_osc.analysis import (compute_jitter, extract_model_params,
                               rising_crossings, segment_cycles)
from mott_osc.analytic import (energy_per_spike, oscillation_current_window,
                               period)
from mott_osc.device import (MemristorParams, ParamSlopes, TemperatureModel,
                             params_at_temperature)
from mott_osc.stochastic import (DistributionFamily, NoiseConfig,
                                 escape_time_vs_margin, fit_distribution,
                                 fit_margin_offset, generate_pink_noise,
                                 monte_carlo_falling_escape)
from mott_osc.thermal import (GtModel, ThermalGeometry, conductance, fit_gt,
                              threshold_current, threshold_power)
from mott_osc.transient import (CircuitConfig, ConstantCurrent, ConstantGate,
                                CoupledConfig, JlfetModel, SquareGate,
                                TransistorDrive, simulate_coupled,
                                simulate_single, simulate_vco)

FIXTURES = Path(mott_osc.__file__).parent / "fixtures"

C_L = 70e-12
PARAM_NAMES = ("v_th", "v_hl", "r_i", "r_m", "v_oi", "v_om")


def _fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text())


def _draw_oscillating(rng: np.random.Generator) -> tuple[MemristorParams, float]:
    # rejection-sample until the bias window is nonempty, then bias mid-window
    while True:
        v_hl = rng.uniform(0.35, 0.70)
        p = MemristorParams(
            v_th=v_hl + rng.uniform(0.10, 0.50),
            v_hl=v_hl,
            r_i=(r_i := rng.uniform(8e3, 40e3)),
            r_m=r_i * rng.uniform(0.15, 0.60),
            v_oi=rng.uniform(0.40, 1.00),
            v_om=rng.uniform(0.15, v_hl - 0.10),
        )
        lo, hi = oscillation_current_window(p)
        if lo < hi:
            return p, lo + 0.45 * (hi - lo)


def _build_jlfet(doc: dict) -> JlfetModel:
    return JlfetModel(k=doc["k"], v_t=doc["v_t"], r_sd=doc["r_sd"],
                      lam=doc["lambda"])


def test_01_transient_period_matches_closed_form():
    rng = np.random.default_rng(20240814)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(50):
        p, i = _draw_oscillating(rng)
        bd = period(p, i, C_L)
        circuit = CircuitConfig(drive=ConstantCurrent(i), c_l=C_L,
                                r_l=math.inf)
        _, events = simulate_single(p, circuit, duration=8 * bd.period,
                                    initial_v=p.v_hl)
        rises = [e.time for e in events if e.direction == 1]
        assert len(rises) >= 4
        measured = float(np.median(np.diff(rises)))
        worst = max(worst, abs(measured - bd.period) / bd.period)
    elapsed = time.monotonic() - t0
    assert worst < 1e-3, f"worst period mismatch {worst:.3e}"
    assert elapsed < 10.0, f"{elapsed:.1f} s over the 10 s budget"
    print(f"PASS 50 random operating points, worst rel err {worst:.2e}, "
          f"{elapsed:.2f} s")


def test_02_extraction_round_trip_recovers_parameters():
    rng = np.random.default_rng(77)
    t0 = time.monotonic()
    worst = {name: 0.0 for name in PARAM_NAMES}
    for _ in range(20):
        p, i = _draw_oscillating(rng)
        bd = period(p, i, C_L)
        circuit = CircuitConfig(drive=ConstantCurrent(i), c_l=C_L,
                                r_l=1e4 * p.r_i)
        w, _ = simulate_single(p, circuit, duration=16 * bd.period,
                               initial_v=p.v_hl)
        recovered, _ = extract_model_params(w, C_L, i)
        for name in PARAM_NAMES:
            err = abs(getattr(recovered, name) - getattr(p, name))
            worst[name] = max(worst[name], err / abs(getattr(p, name)))
    elapsed = time.monotonic() - t0
    for name, err in worst.items():
        assert err < 0.01, f"{name} off by {err:.3e} rel"
    assert elapsed < 30.0, f"{elapsed:.1f} s over the 30 s budget"
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    print(f"PASS 20 round trips, worst rel err per field: {detail}, "
          f"{elapsed:.2f} s")


def test_03_calibrated_point_hits_published_observables():
    cfg = _fixture("fig3_calibrated.json")
    p = MemristorParams.from_json_dict(cfg["device"]["params"])
    i = cfg["circuit"]["drive"]["i"]
    circuit = CircuitConfig(drive=ConstantCurrent(i), c_l=cfg["circuit"]["c_l"],
                            r_l=math.inf)
    w, _ = simulate_single(p, circuit, duration=cfg["simulate"]["duration"],
                           initial_v=cfg["simulate"]["initial_v"])
    cycles = segment_cycles(w, i_bias=i)
    assert len(cycles) >= 10
    f_med = float(np.median([c.frequency for c in cycles]))
    v_pp = float(np.median([c.v_max - c.v_min for c in cycles]))
    energies = [energy_per_spike(w.slice(c.i0, c.i1), i) for c in cycles]
    e_med = float(np.median(energies))
    assert abs(f_med - 410e3) <= 0.01 * 410e3, f"frequency {f_med:.0f} Hz"
    assert abs(v_pp - 0.300) <= 0.030, f"swing {v_pp:.4f} V"
    assert 17e-12 <= e_med <= 21e-12, f"energy {e_med*1e12:.2f} pJ"
    print(f"PASS {f_med:.0f} Hz, {v_pp*1e3:.1f} mV swing, "
          f"{e_med*1e12:.2f} pJ per spike")


def test_04_frequency_peaks_inside_bias_window():
    cfg = _fixture("fig4_sweep.json")
    base = MemristorParams.from_json_dict(cfg["device"]["params"])
    tdoc = cfg["device"]["temperature_model"]
    model = TemperatureModel(base=base, t_ref=tdoc["t_ref"],
                             slopes=ParamSlopes(**tdoc["slopes"]),
                             t_min=tdoc["t_min"], t_max=tdoc["t_max"])
    c_l = cfg["circuit"]["c_l"]
    eps = cfg["edge_window_fraction"]
    frac = np.linspace(eps, 1.0 - eps, 201)
    t0 = time.monotonic()
    report = []
    for t in (25.0, 35.0, 45.0):
        p = params_at_temperature(model, t)
        lo, hi = oscillation_current_window(p)
        f = np.array([period(p, lo + x * (hi - lo), c_l).frequency
                      for x in frac])
        k = int(np.argmax(f))
        assert 0 < k < len(f) - 1, f"maximum sits on the window edge at {t} C"
        assert f[0] < 0.5 * f[k], f"low edge {f[0]:.0f} vs peak {f[k]:.0f}"
        assert f[-1] < 0.5 * f[k], f"high edge {f[-1]:.0f} vs peak {f[k]:.0f}"
        report.append(f"{t:.0f}C peak {f[k]/1e3:.0f} kHz "
                      f"edges {f[0]/f[k]:.2f}/{f[-1]/f[k]:.2f}")
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0, f"{elapsed:.1f} s over the 5 s budget"
    print("PASS " + "; ".join(report))


def test_05_escape_family_morphs_across_margins():
    cfg = _fixture("fig5_margins.json")
    p = MemristorParams.from_json_dict(cfg["device"]["params"])
    noise = NoiseConfig(**cfg["noise"])
    mc = cfg["montecarlo"]
    expected = (DistributionFamily.GAUSSIAN, DistributionFamily.GAMMA,
                DistributionFamily.EXPONENTIAL)
    t0 = time.monotonic()
    seen = []
    for margin, timeout in zip(mc["margins"], mc["timeouts"]):
        i_bias = (noise.v_hl_mu + margin - p.v_om) / p.r_m
        run = monte_carlo_falling_escape(p, i_bias, C_L, noise,
                                         iterations=mc["iterations"],
                                         timeout=timeout)
        survivors = run.times[np.isfinite(run.times)]
        seen.append(fit_distribution(survivors).family)
    assert tuple(seen) == expected, f"family sequence {seen}"
    # median escape time must grow monotonically toward positive margin
    grid = list(np.linspace(mc["margins"][0], mc["margins"][-1], 10))
    points = escape_time_vs_margin(p, C_L, noise, grid, iterations=400,
                                   min_survivors=50, timeout=4e-4)
    medians = [pt.median for pt in points]
    assert all(a < b for a, b in zip(medians, medians[1:])), medians
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"{elapsed:.1f} s over the 60 s budget"
    names = [f.name.lower() for f in seen]
    print(f"PASS families {names}, medians monotone over 10 margins, "
          f"{elapsed:.1f} s")


def test_06_median_escape_curve_offset_near_ten_millivolts():
    p = MemristorParams.from_json_dict(
        _fixture("fig3_calibrated.json")["device"]["params"])
    noise = NoiseConfig(v_hl_mu=p.v_hl, seed=0)   # stock amplitudes
    margins = list(np.linspace(-0.040, 0.005, 10))
    t0 = time.monotonic()
    points = escape_time_vs_margin(p, C_L, noise, margins, iterations=1000,
                                   min_survivors=100, timeout=2e-4)
    offset = fit_margin_offset(points, p.r_m * C_L)
    elapsed = time.monotonic() - t0
    assert abs(offset - 0.010) <= 0.005, f"offset {offset*1e3:.2f} mV"
    assert elapsed < 120.0, f"{elapsed:.1f} s over the 120 s budget"
    print(f"PASS fitted offset {offset*1e3:.2f} mV, {elapsed:.1f} s")


def test_07_mismatched_pair_locks_and_decouples():
    cfg = _fixture("fig7_coupled.json")
    p_a = MemristorParams.from_json_dict(cfg["device"]["params"])
    p_b = MemristorParams.from_json_dict(cfg["device_b"]["params"])

    def node(section: dict) -> CircuitConfig:
        d = section["drive"]
        drive = TransistorDrive(model=_build_jlfet(d["jlfet"]),
                                gate=ConstantGate(d["gate"]["v"]),
                                v_ss=d["v_ss"])
        return CircuitConfig(drive=drive, c_l=section["c_l"],
                             r_l=section["r_l"])

    c_a, c_b = node(cfg["circuit"]), node(cfg["circuit_b"])
    coupling = cfg["coupling"]
    sim = cfg["simulate"]
    t0 = time.monotonic()
    w_a, w_b = simulate_coupled(
        p_a, p_b,
        CoupledConfig(node_a=c_a, node_b=c_b, r_c=coupling["r_c"],
                      v_ss_a=coupling["v_ss_a"], v_ss_b=coupling["v_ss_b"]),
        duration=sim["duration"], initial_v_a=sim["initial_v"],
        initial_v_b=sim["initial_v_b"])
    drop = int(cfg["analysis"]["drop_fraction"] * len(w_a))
    w_a, w_b = w_a.slice(drop, len(w_a)), w_b.slice(drop, len(w_b))
    f_a = float(np.median([c.frequency for c in segment_cycles(w_a)]))
    f_b = float(np.median([c.frequency for c in segment_cycles(w_b)]))
    mean_f = 0.5 * (f_a + f_b)
    diff = abs(f_a - f_b) / mean_f
    jitter = compute_jitter(w_a, w_b).sigma() * mean_f
    assert diff < 1e-3, f"locked frequencies differ by {diff:.2e}"
    assert jitter < 0.20, f"jitter sigma {jitter:.3f} of a period"

    # open the coupling: node a must reproduce a lone run of itself
    w_open, _ = simulate_coupled(
        p_a, p_b,
        CoupledConfig(node_a=c_a, node_b=c_b, r_c=1e12,
                      v_ss_a=coupling["v_ss_a"], v_ss_b=coupling["v_ss_b"]),
        duration=1e-4, initial_v_a=sim["initial_v"],
        initial_v_b=sim["initial_v_b"])
    w_solo, _ = simulate_single(p_a, c_a, duration=1e-4,
                                initial_v=sim["initial_v"])
    n = min(len(w_open), len(w_solo))
    rms = float(np.sqrt(np.mean((w_open.samples[:n] - w_solo.samples[:n]) ** 2)))
    elapsed = time.monotonic() - t0
    assert rms < 1e-6, f"decoupled rms {rms:.2e} V"
    assert elapsed < 60.0, f"{elapsed:.1f} s over the 60 s budget"
    print(f"PASS lock diff {diff:.2e}, jitter {jitter:.1e} of a period, "
          f"decoupled rms {rms:.1e} V, {elapsed:.1f} s")


def test_08_spike_count_tracks_gate_rate():
    cfg = _fixture("fig3_calibrated.json")
    p = MemristorParams.from_json_dict(cfg["device"]["params"])
    vco = cfg["vco"]
    jl = _build_jlfet(vco["jlfet"])
    gate = vco["gate"]
    t0 = time.monotonic()
    per_freq = {}
    for freq in vco["freqs"]:
        g = SquareGate(v_low=gate["v_low"], v_high=gate["v_high"],
                       freq=freq, duty=gate["duty"])
        circuit = CircuitConfig(
            drive=TransistorDrive(model=jl, gate=g, v_ss=vco["v_ss"]),
            c_l=cfg["circuit"]["c_l"], r_l=vco["r_l"])
        w = simulate_vco(p, circuit, duration=vco["cycles"] / freq)
        t_cross = rising_crossings(w, trigger=vco["trigger"],
                                   hysteresis=vco["hysteresis"])
        # the transistor conducts in the low-gate half, so the burst
        # occupies the back half of every gate cycle
        t_gate = 1.0 / freq
        counts = []
        for b in range(vco["cycles"]):
            lo, hi = (b + gate["duty"]) * t_gate, (b + 1) * t_gate
            counts.append(int(np.sum((t_cross >= lo) & (t_cross < hi))))
        assert min(counts) > 5, f"{freq:.0f} Hz bursts too sparse: {counts}"
        per_freq[freq] = counts
    m_slow = float(np.median(per_freq[vco["freqs"][0]]))
    m_fast = float(np.median(per_freq[vco["freqs"][1]]))
    elapsed = time.monotonic() - t0
    assert abs(m_slow - 2.0 * m_fast) <= 1.0, (m_slow, m_fast)
    assert elapsed < 30.0, f"{elapsed:.1f} s over the 30 s budget"
    print(f"PASS per-burst counts {per_freq}, halving within one spike, "
          f"{elapsed:.1f} s")


def test_09_pink_noise_periodogram_slope():
    n, dt = 2 ** 16, 1e-8
    cfg = NoiseConfig(v_hl_mu=0.0, seed=0)
    t0 = time.monotonic()
    w = generate_pink_noise(n, dt, cfg)
    spectrum = np.abs(np.fft.rfft(w.samples)) ** 2
    f = np.fft.rfftfreq(n, dt)
    band = (f >= cfg.f_low * 1.5) & (f <= cfg.f_high / 1.5)
    slope = float(np.polyfit(np.log(f[band]), np.log(spectrum[band]), 1)[0])
    elapsed = time.monotonic() - t0
    assert abs(slope + 1.0) <= 0.2, f"in-band slope {slope:.3f}"
    assert elapsed < 5.0, f"{elapsed:.1f} s over the 5 s budget"
    print(f"PASS in-band slope {slope:.3f}, {elapsed:.2f} s")


def test_10_thermal_threshold_formulas():
    geom = ThermalGeometry()
    t0 = time.monotonic()
    gaps = np.geomspace(0.5, 40.0, 30)
    currents = [threshold_current(geom, geom.t_th - g) for g in gaps]
    slope = float(np.polyfit(np.log(gaps), np.log(currents), 1)[0])
    assert abs(slope - 2.0 / 3.0) <= 1e-9, f"current exponent {slope!r}"
    p20 = threshold_power(geom, 20.0)
    i20 = threshold_current(geom, 20.0)
    assert 5e-6 <= p20 <= 50e-6, f"threshold power {p20*1e6:.1f} uW"
    assert i20 < 30e-6, f"threshold current {i20*1e6:.1f} uA"
    truth = GtModel(**_fixture("si_thermal.json")["thermal"]["gt"])
    samples = [(float(t), float(conductance(truth, t)))
               for t in np.linspace(40.0, 95.0, 23)]
    fitted = fit_gt(samples)
    for name in ("g_i", "g_m", "t_imt", "delta_t"):
        rel = abs(getattr(fitted, name) - getattr(truth, name))
        rel /= abs(getattr(truth, name))
        assert rel < 0.01, f"{name} recovered with rel err {rel:.2e}"
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0, f"{elapsed:.1f} s over the 5 s budget"
    print(f"PASS exponent {slope:.12f}, p20 {p20*1e6:.1f} uW, "
          f"i20 {i20*1e6:.1f} uA, conductance fit within 1%, {elapsed:.2f} s")
