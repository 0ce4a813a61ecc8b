"""Config-driven batch runner for the oscillator toolkit.

One JSON document describes an experiment; each subcommand binds the relevant
sections to a module operation and writes its artifacts plus a manifest:

    mott-osc <simulate|montecarlo|couple|vco|extract|thermal>
             --config FILE [--out DIR] [--seed N] [--jobs N]

All physical quantities in configs are SI base units; `units_version` is
mandatory.  Exit codes: 0 success, 2 config error, 3 every point failed,
4 partial sweep.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import analysis, analytic, stochastic, thermal, transient
from .device import (MemristorParams, ParamSlopes, Phase, TemperatureModel,
                     params_at_temperature)
from .stochastic import NoiseConfig
from .transient import (CircuitConfig, ConstantCurrent, ConstantGate,
                        CoupledConfig, JlfetModel, RampGate, SineGate,
                        SquareGate, TransistorDrive)
from .waveform import (atomic_write_text, load_waveform, waveform_to_csv,
                       waveform_to_json)

UNITS_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED = 3
EXIT_PARTIAL = 4


class ConfigError(ValueError):
    """Invalid experiment config; message carries the JSON path."""


# ---------------------------------------------------------------------------
# Config readers.  Every accessor threads a dotted path so error messages
# point at the offending key.


def _require(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in doc:
        raise ConfigError(f"{path}.{key}: required key is missing")
    return doc[key]


def _number(value, path: str, allow_none: bool = False) -> float | None:
    if value is None:
        if allow_none:
            return None
        raise ConfigError(f"{path}: must be a number, got null")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: must be a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: must be an integer, got {value!r}")
    return value


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = _require(doc, "units_version", "config")
    if version != UNITS_VERSION:
        raise ConfigError(
            f"config.units_version: expected {UNITS_VERSION}, got {version!r}"
        )
    return doc


def _build_params(doc: dict, path: str) -> MemristorParams:
    block = _require(doc, "params", path)
    if not isinstance(block, dict):
        raise ConfigError(f"{path}.params: expected an object")
    try:
        return MemristorParams.from_json_dict(block)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}.params: {exc}")


def _build_device(doc: dict, path: str) -> tuple[MemristorParams,
                                                 TemperatureModel | None]:
    params = _build_params(doc, path)
    tm_doc = doc.get("temperature_model")
    if tm_doc is None:
        return params, None
    slopes_doc = tm_doc.get("slopes", {})
    try:
        slopes = ParamSlopes(**{k: float(v) for k, v in slopes_doc.items()})
        model = TemperatureModel(
            base=params,
            t_ref=float(tm_doc.get("t_ref", 25.0)),
            slopes=slopes,
            t_min=float(tm_doc.get("t_min", 20.0)),
            t_max=float(tm_doc.get("t_max", 50.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.temperature_model: {exc}")
    return params, model


def _build_gate(doc: dict, path: str):
    kind = _require(doc, "type", path)
    try:
        if kind == "constant":
            return ConstantGate(_number(_require(doc, "v", path), f"{path}.v"))
        if kind == "ramp":
            return RampGate(
                _number(_require(doc, "v0", path), f"{path}.v0"),
                _number(_require(doc, "v1", path), f"{path}.v1"),
                _number(_require(doc, "t_total", path), f"{path}.t_total"),
            )
        if kind == "sine":
            return SineGate(
                _number(_require(doc, "v_mid", path), f"{path}.v_mid"),
                _number(_require(doc, "v_amp", path), f"{path}.v_amp"),
                _number(_require(doc, "freq", path), f"{path}.freq"),
            )
        if kind == "square":
            return SquareGate(
                _number(_require(doc, "v_low", path), f"{path}.v_low"),
                _number(_require(doc, "v_high", path), f"{path}.v_high"),
                _number(_require(doc, "freq", path), f"{path}.freq"),
                _number(doc.get("duty", 0.5), f"{path}.duty"),
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")
    raise ConfigError(f"{path}.type: unknown gate type {kind!r}")


def _build_jlfet(doc: dict, path: str) -> JlfetModel:
    try:
        return JlfetModel(
            k=_number(_require(doc, "k", path), f"{path}.k"),
            v_t=_number(_require(doc, "v_t", path), f"{path}.v_t"),
            r_sd=_number(doc.get("r_sd", 343e3), f"{path}.r_sd"),
            lam=_number(doc.get("lambda", 0.0), f"{path}.lambda"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def _build_drive(doc: dict, path: str):
    kind = _require(doc, "type", path)
    try:
        if kind == "constant_current":
            return ConstantCurrent(_number(_require(doc, "i", path), f"{path}.i"))
        if kind == "transistor":
            return TransistorDrive(
                _build_jlfet(_require(doc, "jlfet", path), f"{path}.jlfet"),
                _build_gate(_require(doc, "gate", path), f"{path}.gate"),
                _number(_require(doc, "v_ss", path), f"{path}.v_ss"),
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")
    raise ConfigError(f"{path}.type: unknown drive type {kind!r}")


def _build_circuit(doc: dict, path: str) -> CircuitConfig:
    r_l = _number(doc.get("r_l", 1e6), f"{path}.r_l", allow_none=True)
    try:
        return CircuitConfig(
            drive=_build_drive(_require(doc, "drive", path), f"{path}.drive"),
            c_l=_number(doc.get("c_l", 70e-12), f"{path}.c_l"),
            r_l=math.inf if r_l is None else r_l,
            temperature=_number(doc.get("temperature", 25.0),
                                f"{path}.temperature"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def _build_noise(doc: dict, path: str, fallback_mu: float | None,
                 seed_override: int | None) -> NoiseConfig:
    known = {"v_hl_mu", "v_hl_sigma", "pink_amplitude", "f_low", "f_high",
             "tau_thermal", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    mu = doc.get("v_hl_mu", fallback_mu)
    if mu is None:
        raise ConfigError(f"{path}.v_hl_mu: required (no device fallback)")
    kwargs = {"v_hl_mu": _number(mu, f"{path}.v_hl_mu")}
    for key in ("v_hl_sigma", "pink_amplitude", "f_low", "f_high",
                "tau_thermal"):
        if key in doc:
            kwargs[key] = _number(doc[key], f"{path}.{key}")
    if seed_override is not None:
        kwargs["seed"] = seed_override
    elif "seed" in doc:
        kwargs["seed"] = _integer(doc["seed"], f"{path}.seed")
    try:
        return NoiseConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def _initial_phase(spec: dict, path: str) -> Phase:
    name = spec.get("initial_phase", "insulating")
    try:
        return Phase[str(name).upper()]
    except KeyError:
        raise ConfigError(f"{path}.initial_phase: unknown phase {name!r}")


# ---------------------------------------------------------------------------
# Output plumbing


def _write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cycles_to_csv(cycles: list, path: str) -> None:
    buf = io.StringIO()
    buf.write("t_start,t_end,period_s,frequency_hz,v_max,v_min,energy_j\n")
    for c in cycles:
        energy = "" if c.energy is None else repr(c.energy)
        buf.write(f"{c.t_start!r},{c.t_end!r},{c.period!r},{c.frequency!r},"
                  f"{c.v_max!r},{c.v_min!r},{energy}\n")
    atomic_write_text(path, buf.getvalue())


def _fit_to_dict(fit: stochastic.DistributionFit) -> dict:
    return {
        "family": fit.family.name.lower(),
        "params": fit.params,
        "loglik": fit.loglik,
        "n": fit.n,
        "degenerate": fit.degenerate,
        "candidates": dict(fit.candidates),
    }


def _median_frequency(w, trigger=None, hysteresis=None) -> tuple[float, int]:
    cycles = analysis.segment_cycles(w, trigger, hysteresis)
    if not cycles:
        return math.nan, 0
    return float(np.median([c.frequency for c in cycles])), len(cycles)


class _Manifest:
    """Collects outputs and per-point statuses; written once, last."""

    def __init__(self, command: str, config_path: str, doc: dict,
                 out_dir: str, seed: int | None):
        self.data = {
            "command": command,
            "config_path": os.path.abspath(config_path),
            "config": doc,
            "seed_override": seed,
            "outputs": [],
            "points": [],
        }
        self.out_dir = out_dir

    def add_output(self, name: str) -> str:
        self.data["outputs"].append(name)
        return os.path.join(self.out_dir, name)

    def add_point(self, **fields) -> None:
        self.data["points"].append(fields)

    def finish(self) -> int:
        points = self.data["points"]
        failed = [p for p in points if p.get("status") != "ok"]
        if points and len(failed) == len(points):
            status, code = "failed", EXIT_FAILED
        elif failed:
            status, code = "partial", EXIT_PARTIAL
        else:
            status, code = "ok", EXIT_OK
        self.data["status"] = status
        _write_json(os.path.join(self.out_dir, "manifest.json"), self.data)
        return code


# ---------------------------------------------------------------------------
# simulate


def _sweep_points(doc: dict) -> list[dict]:
    """Materialize the sweep grid; a missing sweep section is one point."""
    sweep = doc.get("sweep")
    if sweep is None:
        return [{"index": 0, "temperature": None, "i_bias": None}]
    points: list[dict] = []
    if "points" in sweep:
        for j, entry in enumerate(sweep["points"]):
            temp = _number(_require(entry, "temperature", f"sweep.points[{j}]"),
                           f"sweep.points[{j}].temperature")
            currents = _require(entry, "currents", f"sweep.points[{j}]")
            for i in currents:
                points.append({
                    "index": len(points), "temperature": temp,
                    "i_bias": _number(i, f"sweep.points[{j}].currents"),
                })
        return points
    currents = sweep.get("current")
    temps = sweep.get("temperature")
    if currents is None and temps is None:
        raise ConfigError("sweep: needs 'current', 'temperature', or 'points'")
    currents = [None] if currents is None else [
        _number(i, "sweep.current") for i in currents]
    temps = [None] if temps is None else [
        _number(t, "sweep.temperature") for t in temps]
    for t in temps:
        for i in currents:
            points.append({"index": len(points), "temperature": t, "i_bias": i})
    return points


def _simulate_point(doc: dict, point: dict, out_dir: str) -> dict:
    """Run one sweep point and write its artifacts; returns the summary row.

    Top-level so a process pool can dispatch it.
    """
    base_params, temp_model = _build_device(_require(doc, "device", "config"),
                                            "config.device")
    circuit = _build_circuit(_require(doc, "circuit", "config"),
                             "config.circuit")
    spec = _require(doc, "simulate", "config")
    duration = _number(_require(spec, "duration", "config.simulate"),
                       "config.simulate.duration")
    dt = _number(spec.get("dt"), "config.simulate.dt", allow_none=True)
    initial_v = _number(spec.get("initial_v", 0.0), "config.simulate.initial_v")
    phase0 = _initial_phase(spec, "config.simulate")

    idx = point["index"]
    row = {"index": idx, "temperature": point["temperature"],
           "i_bias": point["i_bias"], "status": "ok", "error": ""}
    try:
        params = base_params
        if point["temperature"] is not None:
            if temp_model is None:
                raise ConfigError(
                    "sweep.temperature: config.device.temperature_model missing")
            params = params_at_temperature(temp_model, point["temperature"])
            circuit = replace(circuit, temperature=point["temperature"])
        if point["i_bias"] is not None:
            if not isinstance(circuit.drive, ConstantCurrent):
                raise ConfigError(
                    "sweep.current: requires a constant_current drive")
            circuit = replace(circuit, drive=ConstantCurrent(point["i_bias"]))
            row["i_bias"] = point["i_bias"]
        elif isinstance(circuit.drive, ConstantCurrent):
            row["i_bias"] = circuit.drive.i

        wf, events = transient.simulate_single(
            params, circuit, duration, dt, initial_v, phase0)
        waveform_to_csv(wf, os.path.join(out_dir, f"waveform_{idx:04d}.csv"))
        waveform_to_json(wf, os.path.join(out_dir, f"waveform_{idx:04d}.json"))
        transient.events_to_csv(
            events, os.path.join(out_dir, f"events_{idx:04d}.csv"))
        f_med, n_cycles = _median_frequency(wf)
        row.update(frequency_hz=f_med, n_cycles=n_cycles, n_events=len(events),
                   v_pp=float(wf.samples.max() - wf.samples.min()))
    except (ValueError, RuntimeError) as exc:
        row.update(status="error", error=str(exc), frequency_hz=math.nan,
                   n_cycles=0, n_events=0, v_pp=math.nan)
    return row


def cmd_simulate(doc: dict, config_path: str, out_dir: str,
                 seed: int | None, jobs: int) -> int:
    points = _sweep_points(doc)
    manifest = _Manifest("simulate", config_path, doc, out_dir, seed)

    if jobs > 1 and len(points) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_simulate_point, [doc] * len(points), points,
                                 [out_dir] * len(points)))
    else:
        rows = [_simulate_point(doc, point, out_dir) for point in points]

    rows.sort(key=lambda r: r["index"])
    buf = io.StringIO()
    buf.write("index,temperature_c,i_bias_a,frequency_hz,n_cycles,n_events,"
              "v_pp,status,error\n")
    for row in rows:
        temp = "" if row["temperature"] is None else repr(row["temperature"])
        i_b = "" if row["i_bias"] is None else repr(row["i_bias"])
        buf.write(f"{row['index']},{temp},{i_b},{row['frequency_hz']!r},"
                  f"{row['n_cycles']},{row['n_events']},{row['v_pp']!r},"
                  f"{row['status']},\"{row['error']}\"\n")
        manifest.add_point(**row)
        if row["status"] == "ok":
            for stem in ("waveform_{:04d}.csv", "waveform_{:04d}.json",
                         "events_{:04d}.csv"):
                manifest.data["outputs"].append(stem.format(row["index"]))
    atomic_write_text(os.path.join(out_dir, "summary.csv"), buf.getvalue())
    manifest.data["outputs"].append("summary.csv")
    return manifest.finish()


# ---------------------------------------------------------------------------
# montecarlo


def _montecarlo_point(doc: dict, k: int, seed: int | None,
                      out_dir: str) -> dict:
    device = _build_device(_require(doc, "device", "config"), "config.device")[0]
    circuit_doc = _require(doc, "circuit", "config")
    c_l = _number(circuit_doc.get("c_l", 70e-12), "config.circuit.c_l")
    mc = _require(doc, "montecarlo", "config")
    margins = _require(mc, "margins", "config.montecarlo")
    margin = _number(margins[k], f"config.montecarlo.margins[{k}]")
    iterations = _integer(mc.get("iterations", 10000),
                          "config.montecarlo.iterations")
    orientation = mc.get("orientation", "falling")
    timeouts = mc.get("timeouts")
    timeout = None
    if timeouts is not None:
        timeout = _number(timeouts[k], f"config.montecarlo.timeouts[{k}]",
                          allow_none=True)
    bins = _integer(mc.get("histogram_bins", 50),
                    "config.montecarlo.histogram_bins")
    noise = _build_noise(_require(doc, "noise", "config"), "config.noise",
                         device.v_hl, seed)

    row = {"index": k, "margin": margin, "status": "ok", "error": ""}
    try:
        if orientation == "falling":
            i_bias = (noise.v_hl_mu + margin - device.v_om) / device.r_m
            run = stochastic.monte_carlo_falling_escape(
                device, i_bias, c_l, noise, iterations, timeout)
        elif orientation == "rising":
            i_bias = (noise.v_hl_mu - margin - device.v_oi) / device.r_i
            run = stochastic.monte_carlo_rising_escape(
                device, i_bias, c_l, noise, iterations, timeout)
        else:
            raise ConfigError(
                f"config.montecarlo.orientation: unknown {orientation!r}")
        stochastic.escape_run_to_csv(
            run, os.path.join(out_dir, f"escape_{k}.csv"))
        samples = run.samples
        if samples.size:
            stochastic.histogram_to_csv(
                samples, os.path.join(out_dir, f"histogram_{k}.csv"), bins)
        fit_doc = None
        if samples.size >= 100:
            fit_doc = _fit_to_dict(stochastic.fit_distribution(list(samples)))
        _write_json(os.path.join(out_dir, f"fit_{k}.json"), {
            "margin": margin, "i_bias": i_bias, "orientation": orientation,
            "iterations": iterations, "censored": run.censored,
            "median_s": run.median(), "fit": fit_doc,
        })
        row.update(i_bias=i_bias, median_s=run.median(),
                   censored=run.censored, survivors=int(samples.size),
                   family="" if fit_doc is None else fit_doc["family"])
    except (ValueError, RuntimeError) as exc:
        row.update(status="error", error=str(exc), median_s=math.nan,
                   censored=iterations, survivors=0, family="")
    return row


def cmd_montecarlo(doc: dict, config_path: str, out_dir: str,
                   seed: int | None, jobs: int) -> int:
    mc = _require(doc, "montecarlo", "config")
    margins = _require(mc, "margins", "config.montecarlo")
    if not isinstance(margins, list) or not margins:
        raise ConfigError("config.montecarlo.margins: need a nonempty list")
    timeouts = mc.get("timeouts")
    if timeouts is not None and len(timeouts) != len(margins):
        raise ConfigError(
            "config.montecarlo.timeouts: length must match margins")
    manifest = _Manifest("montecarlo", config_path, doc, out_dir, seed)

    ks = list(range(len(margins)))
    if jobs > 1 and len(ks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_montecarlo_point, [doc] * len(ks), ks,
                                 [seed] * len(ks), [out_dir] * len(ks)))
    else:
        rows = [_montecarlo_point(doc, k, seed, out_dir) for k in ks]

    buf = io.StringIO()
    buf.write("index,margin_v,i_bias_a,median_s,survivors,censored,family,"
              "status,error\n")
    for row in sorted(rows, key=lambda r: r["index"]):
        buf.write(f"{row['index']},{row['margin']!r},"
                  f"{row.get('i_bias', math.nan)!r},{row['median_s']!r},"
                  f"{row['survivors']},{row['censored']},{row['family']},"
                  f"{row['status']},\"{row['error']}\"\n")
        manifest.add_point(**row)
        if row["status"] == "ok":
            manifest.data["outputs"] += [f"escape_{row['index']}.csv",
                                         f"fit_{row['index']}.json"]
    atomic_write_text(os.path.join(out_dir, "summary.csv"), buf.getvalue())
    manifest.data["outputs"].append("summary.csv")
    return manifest.finish()


# ---------------------------------------------------------------------------
# couple


def cmd_couple(doc: dict, config_path: str, out_dir: str,
               seed: int | None, jobs: int) -> int:
    params_a = _build_device(_require(doc, "device", "config"),
                             "config.device")[0]
    params_b = _build_device(_require(doc, "device_b", "config"),
                             "config.device_b")[0]
    node_a = _build_circuit(_require(doc, "circuit", "config"),
                            "config.circuit")
    node_b = _build_circuit(_require(doc, "circuit_b", "config"),
                            "config.circuit_b")
    cpl = _require(doc, "coupling", "config")
    spec = _require(doc, "simulate", "config")
    duration = _number(_require(spec, "duration", "config.simulate"),
                       "config.simulate.duration")
    dt = _number(spec.get("dt"), "config.simulate.dt", allow_none=True)
    v0_a = _number(spec.get("initial_v", 0.0), "config.simulate.initial_v")
    v0_b = _number(spec.get("initial_v_b", 0.0), "config.simulate.initial_v_b")
    drop = _number(doc.get("analysis", {}).get("drop_fraction", 0.25),
                   "config.analysis.drop_fraction")
    if not 0.0 <= drop < 1.0:
        raise ConfigError("config.analysis.drop_fraction: must lie in [0, 1)")

    try:
        config = CoupledConfig(
            node_a=node_a, node_b=node_b,
            r_c=_number(cpl.get("r_c", 343e3), "config.coupling.r_c"),
            v_ss_a=_number(cpl.get("v_ss_a"), "config.coupling.v_ss_a",
                           allow_none=True),
            v_ss_b=_number(cpl.get("v_ss_b"), "config.coupling.v_ss_b",
                           allow_none=True),
        )
    except ValueError as exc:
        raise ConfigError(f"config.coupling: {exc}")

    manifest = _Manifest("couple", config_path, doc, out_dir, seed)
    row = {"index": 0, "status": "ok", "error": ""}
    try:
        wf_a, wf_b = transient.simulate_coupled(
            params_a, params_b, config, duration, dt, v0_a, v0_b)
        waveform_to_csv(wf_a, os.path.join(out_dir, "waveform_a.csv"))
        waveform_to_csv(wf_b, os.path.join(out_dir, "waveform_b.csv"))
        i0 = int(drop * wf_a.samples.size)
        tail_a = wf_a.slice(i0, wf_a.samples.size)
        tail_b = wf_b.slice(i0, wf_b.samples.size)
        ca = analysis.segment_cycles(tail_a)
        cb = analysis.segment_cycles(tail_b)
        f_a = float(np.mean([c.frequency for c in ca])) if ca else math.nan
        f_b = float(np.mean([c.frequency for c in cb])) if cb else math.nan
        jitter = analysis.compute_jitter(tail_a, tail_b)
        mean_f = 0.5 * (f_a + f_b)
        summary = {
            "r_c": config.r_c,
            "frequency_a_hz": f_a,
            "frequency_b_hz": f_b,
            "mean_difference": abs(f_a - f_b) / mean_f if mean_f else math.nan,
            "jitter_sigma_s": jitter.sigma(),
            "n_cycles_a": len(ca),
            "n_cycles_b": len(cb),
            "dropped_fraction": drop,
        }
        _write_json(os.path.join(out_dir, "summary.json"), summary)
        row.update(summary)
        manifest.data["outputs"] += ["waveform_a.csv", "waveform_b.csv",
                                     "summary.json"]
    except (ValueError, RuntimeError) as exc:
        row.update(status="error", error=str(exc))
    manifest.add_point(**row)
    return manifest.finish()


# ---------------------------------------------------------------------------
# vco


def cmd_vco(doc: dict, config_path: str, out_dir: str,
            seed: int | None, jobs: int) -> int:
    params = _build_device(_require(doc, "device", "config"),
                           "config.device")[0]
    vco = _require(doc, "vco", "config")
    jlfet = _build_jlfet(_require(vco, "jlfet", "config.vco"),
                         "config.vco.jlfet")
    gate = _build_gate(_require(vco, "gate", "config.vco"), "config.vco.gate")
    v_ss = _number(_require(vco, "v_ss", "config.vco"), "config.vco.v_ss")
    c_l = _number(vco.get("c_l", 70e-12), "config.vco.c_l")
    r_l = _number(vco.get("r_l", 1e6), "config.vco.r_l", allow_none=True)
    r_l = math.inf if r_l is None else r_l
    trigger = _number(vco.get("trigger"), "config.vco.trigger",
                      allow_none=True)
    hysteresis = _number(vco.get("hysteresis"), "config.vco.hysteresis",
                         allow_none=True)

    freqs = vco.get("freqs")
    if freqs is not None:
        if not isinstance(gate, (SquareGate, SineGate)):
            raise ConfigError("config.vco.freqs: gate has no frequency to vary")
        freqs = [_number(f, "config.vco.freqs") for f in freqs]
    else:
        freqs = [None]

    manifest = _Manifest("vco", config_path, doc, out_dir, seed)
    for k, freq in enumerate(freqs):
        g = gate if freq is None else replace(gate, freq=freq)
        row = {"index": k, "gate_freq": g.freq if hasattr(g, "freq") else None,
               "status": "ok", "error": ""}
        try:
            if "duration" in vco:
                duration = _number(vco["duration"], "config.vco.duration")
            elif g.period is not None:
                duration = g.period * _integer(vco.get("cycles", 3),
                                               "config.vco.cycles")
            else:
                raise ConfigError(
                    "config.vco.duration: required for aperiodic gates")
            circuit = CircuitConfig(drive=TransistorDrive(jlfet, g, v_ss),
                                    c_l=c_l, r_l=r_l)
            wf = transient.simulate_vco(params, circuit, duration,
                                        _number(vco.get("dt"), "config.vco.dt",
                                                allow_none=True))
            waveform_to_csv(wf, os.path.join(out_dir, f"waveform_{k}.csv"))
            cycles = analysis.segment_cycles(wf, trigger, hysteresis)
            _cycles_to_csv(cycles, os.path.join(out_dir, f"cycles_{k}.csv"))
            crossings = analysis.rising_crossings(wf, trigger, hysteresis)
            counts = []
            if isinstance(g, SquareGate):
                # Spikes per low-gate burst (the low gate level is the
                # conducting half for the p-type depletion device).
                t_period = g.period
                n_bursts = int(duration / t_period)
                buf = io.StringIO()
                buf.write("burst,t_on_start,t_on_end,spikes\n")
                for b in range(n_bursts):
                    on0 = (b + g.duty) * t_period
                    on1 = (b + 1.0) * t_period
                    n = int(np.sum((crossings >= on0) & (crossings < on1)))
                    counts.append(n)
                    buf.write(f"{b},{on0!r},{on1!r},{n}\n")
                atomic_write_text(
                    os.path.join(out_dir, f"burst_counts_{k}.csv"),
                    buf.getvalue())
                manifest.data["outputs"].append(f"burst_counts_{k}.csv")
            row.update(n_cycles=len(cycles), n_crossings=int(crossings.size),
                       burst_counts=counts)
            manifest.data["outputs"] += [f"waveform_{k}.csv", f"cycles_{k}.csv"]
        except (ValueError, RuntimeError) as exc:
            row.update(status="error", error=str(exc))
        manifest.add_point(**row)
    return manifest.finish()


# ---------------------------------------------------------------------------
# extract


def cmd_extract(doc: dict, config_path: str, out_dir: str,
                seed: int | None, jobs: int) -> int:
    ext = _require(doc, "extract", "config")
    input_path = _require(ext, "input", "config.extract")
    if not os.path.isabs(input_path):
        input_path = os.path.join(os.path.dirname(os.path.abspath(config_path)),
                                  input_path)
    c_l = _number(_require(ext, "c_l", "config.extract"), "config.extract.c_l")
    i_bias = _number(_require(ext, "i_bias", "config.extract"),
                     "config.extract.i_bias")
    trigger = _number(ext.get("trigger"), "config.extract.trigger",
                      allow_none=True)

    manifest = _Manifest("extract", config_path, doc, out_dir, seed)
    row = {"index": 0, "status": "ok", "error": ""}
    try:
        wf = load_waveform(input_path)
        params, spread = analysis.extract_model_params(wf, c_l, i_bias, trigger)
        cycles = analysis.segment_cycles(wf, trigger, i_bias=i_bias)
        result = {
            "params": params.to_json_dict(),
            "quartiles": spread.quartiles,
            "n_cycles": spread.n_cycles,
            "n_rise_fits": spread.n_rise_fits,
            "n_fall_fits": spread.n_fall_fits,
        }
        if "device" in doc:
            reference = _build_device(doc["device"], "config.device")[0]
            result["reference_relative_error"] = {
                name: (getattr(params, name) - getattr(reference, name))
                / getattr(reference, name)
                for name in ("v_th", "v_hl", "r_i", "r_m", "v_oi", "v_om")
            }
        _write_json(os.path.join(out_dir, "extracted_params.json"), result)
        _cycles_to_csv(cycles, os.path.join(out_dir, "cycles.csv"))
        manifest.data["outputs"] += ["extracted_params.json", "cycles.csv"]
        row.update(n_cycles=spread.n_cycles)
    except (OSError, ValueError, RuntimeError) as exc:
        row.update(status="error", error=str(exc))
    manifest.add_point(**row)
    return manifest.finish()


# ---------------------------------------------------------------------------
# thermal


def cmd_thermal(doc: dict, config_path: str, out_dir: str,
                seed: int | None, jobs: int) -> int:
    th = _require(doc, "thermal", "config")
    geom_doc = th.get("geometry", {})
    try:
        geom = thermal.ThermalGeometry(**{
            k: _number(v, f"config.thermal.geometry.{k}")
            for k, v in geom_doc.items()})
    except TypeError as exc:
        raise ConfigError(f"config.thermal.geometry: {exc}")
    except ValueError as exc:
        raise ConfigError(f"config.thermal.geometry: {exc}")
    gt_doc = th.get("gt")
    if gt_doc is None:
        gt = thermal.DEFAULT_GT
    else:
        try:
            gt = thermal.GtModel(**{k: _number(v, f"config.thermal.gt.{k}")
                                    for k, v in gt_doc.items()})
        except TypeError as exc:
            raise ConfigError(f"config.thermal.gt: {exc}")
        except ValueError as exc:
            raise ConfigError(f"config.thermal.gt: {exc}")
    t_min = _number(_require(th, "t_min", "config.thermal"),
                    "config.thermal.t_min")
    t_max = _number(_require(th, "t_max", "config.thermal"),
                    "config.thermal.t_max")
    count = _integer(th.get("count", 41), "config.thermal.count")
    if count < 2 or not t_max > t_min:
        raise ConfigError("config.thermal: need t_max > t_min and count >= 2")

    manifest = _Manifest("thermal", config_path, doc, out_dir, seed)
    buf = io.StringIO()
    buf.write("t_c,i_th_a,p_th_w,ratio_k_per_w,g_s,status,error\n")
    grid = np.linspace(t_min, t_max, count)
    for k, t in enumerate(grid):
        t = float(t)
        row = {"index": k, "t": t, "status": "ok", "error": ""}
        try:
            i_th = thermal.threshold_current(geom, t)
            p_th = thermal.threshold_power(geom, t)
            ratio = thermal.spike_temp_power_ratio(geom, t)
            g = float(thermal.conductance(gt, t))
            buf.write(f"{t!r},{i_th!r},{p_th!r},{ratio!r},{g!r},ok,\n")
        except ValueError as exc:
            buf.write(f"{t!r},nan,nan,nan,nan,error,\"{exc}\"\n")
            row.update(status="error", error=str(exc))
        manifest.add_point(**row)
    atomic_write_text(os.path.join(out_dir, "thermal.csv"), buf.getvalue())
    summary = {
        "t_th_c": geom.t_th,
        "i_th_20c_a": thermal.threshold_current(geom, 20.0),
        "p_th_20c_w": thermal.threshold_power(geom, 20.0),
        "gt": {"g_i": gt.g_i, "g_m": gt.g_m, "t_imt": gt.t_imt,
               "delta_t": gt.delta_t},
    }
    _write_json(os.path.join(out_dir, "thermal_summary.json"), summary)
    manifest.data["outputs"] += ["thermal.csv", "thermal_summary.json"]
    return manifest.finish()


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "couple": cmd_couple,
    "vco": cmd_vco,
    "extract": cmd_extract,
    "thermal": cmd_thermal,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mott-osc",
        description="Config-driven oscillator experiments; see the package "
                    "README for the config schema.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's noise seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for sweep points")
    args = parser.parse_args(argv)

    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        doc = _load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](doc, args.config, args.out,
                                       args.seed, args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
