"""Uniformly sampled voltage traces and their on-disk formats.

A :class:`Waveform` is the exchange format between the simulators and the
analysis routines: a 1-D array of node voltages sampled every ``dt`` seconds
starting at ``t0``.  Two file encodings are supported:

* CSV with columns ``t_seconds,v_volts`` (absolute sample times), or the
  compact variant with a ``# dt=... t0=...`` comment line followed by a
  single ``v_volts`` column;
* JSON ``{"dt": ..., "t0": ..., "samples": [...]}``.
"""
from __future__ import annotations

import io
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Waveform:
    """Uniform voltage time series.

    dt      sample interval, seconds (> 0)
    samples node voltage, volts
    t0      time of the first sample, seconds
    """

    dt: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if not (self.dt > 0.0):
            raise ValueError("Waveform dt must be > 0")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("Waveform samples must be a nonempty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Waveform samples must all be finite")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        """Time spanned from the first to the last sample, seconds."""
        return (len(self) - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def slice(self, i0: int, i1: int) -> "Waveform":
        """Sub-waveform over the half-open sample range [i0, i1)."""
        if not (0 <= i0 < i1 <= len(self)):
            raise ValueError(f"invalid slice [{i0}, {i1}) for {len(self)} samples")
        return Waveform(self.dt, self.samples[i0:i1].copy(), self.t0 + i0 * self.dt)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write text via a temp file plus rename so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def waveform_to_csv(w: Waveform, path: str | os.PathLike) -> None:
    buf = io.StringIO()
    buf.write("t_seconds,v_volts\n")
    t = w.times()
    for k in range(len(w)):
        # plain Python floats: numpy scalar reprs are not valid CSV numbers
        buf.write(f"{float(t[k])!r},{float(w.samples[k])!r}\n")
    atomic_write_text(path, buf.getvalue())


def waveform_from_csv(path: str | os.PathLike) -> Waveform:
    dt_header = None
    t0_header = 0.0
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].replace(",", " ").split():
                    if token.startswith("dt="):
                        dt_header = float(token[3:])
                    elif token.startswith("t0="):
                        t0_header = float(token[3:])
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: no waveform samples found")
    data = np.asarray(rows, dtype=float)
    if header == ["t_seconds", "v_volts"]:
        t, v = data[:, 0], data[:, 1]
        if len(t) < 2:
            raise ValueError(f"{path}: need at least 2 samples to infer dt")
        dt = (t[-1] - t[0]) / (len(t) - 1)
        steps = np.diff(t)
        if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6 * dt + 1e-18):
            raise ValueError(f"{path}: sample times are not uniform")
        return Waveform(dt, v, t0=t[0])
    if header == ["v_volts"]:
        if dt_header is None:
            raise ValueError(f"{path}: v_volts-only CSV requires a '# dt=...' line")
        return Waveform(dt_header, data[:, 0], t0=t0_header)
    raise ValueError(f"{path}: unrecognized waveform CSV header {header}")


def waveform_to_json(w: Waveform, path: str | os.PathLike) -> None:
    doc = {"dt": w.dt, "t0": w.t0, "samples": w.samples.tolist()}
    atomic_write_text(path, json.dumps(doc))


def waveform_from_json(path: str | os.PathLike) -> Waveform:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return Waveform(float(doc["dt"]), np.asarray(doc["samples"], dtype=float),
                        t0=float(doc.get("t0", 0.0)))
    except KeyError as exc:
        raise ValueError(f"{path}: missing waveform field {exc}") from exc


def load_waveform(path: str | os.PathLike) -> Waveform:
    """Dispatch on extension: .json or .csv."""
    name = os.fspath(path)
    if name.endswith(".json"):
        return waveform_from_json(path)
    return waveform_from_csv(path)
