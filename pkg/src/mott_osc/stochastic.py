"""Noise-driven switching statistics of the relaxation oscillator.

The deterministic oscillator crosses its switching levels at fixed times;
the measured cycle-to-cycle spread comes from voltage noise riding on the
capacitor trace plus cycle-to-cycle variation of the switching level itself.
This module reproduces those statistics with an escape-time Monte Carlo:

* the noise-free relaxation is started 50 mV away from the branch asymptote
  (the falling trace starts at V = v_af + 50 mV at t = 0);
* a fresh band-limited 1/f noise record is superimposed per iteration;
* the switching level is drawn per iteration from a normal distribution and
  relaxes from a post-switching start value with a thermal RC time constant;
* the escape time is the first instant the trace reaches the instantaneous
  level; runs that never cross within the timeout are censored.

Margins are reported as (branch asymptote - median switching level), so a
negative margin means the deterministic oscillator would cross on its own
and a positive margin means only noise can produce the crossing.
"""
from __future__ import annotations

import enum
import io
import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, stats

from . import analytic
from .device import MemristorParams
from .waveform import Waveform, atomic_write_text

# Start of every escape run: 50 mV between the trace and the branch asymptote.
ESCAPE_START_OFFSET = 0.05
# Raw log-likelihood differences below this are ties.  Gamma nests the
# exponential family, so its fitted likelihood is never lower; half the 95%
# chi-square quantile (1 dof) separates real shape evidence from that
# built-in advantage.
_LOGLIK_TIE = 1.92


@dataclass(frozen=True)
class NoiseConfig:
    """Noise environment of one escape-time experiment.

    v_hl_mu        median switching level, V (the holding voltage for the
                   falling engine, the threshold voltage for the rising one)
    v_hl_sigma     cycle-to-cycle level spread, V
    pink_amplitude RMS of the band-limited 1/f voltage noise, V
    f_low, f_high  shaping band, Hz (flat below f_low, zero above f_high)
    tau_thermal    thermal RC constant of the post-switching level
                   relaxation, s (0 disables the transient)
    seed           master seed; per-iteration streams are spawned from it
    """

    # The default amplitude is calibrated so the margin-offset fit of a
    # median-escape sweep lands near 10 mV, the setup-noise scale the
    # escape-time measurements are consistent with.
    v_hl_mu: float
    v_hl_sigma: float = 0.003
    pink_amplitude: float = 0.015
    f_low: float = 30e3
    f_high: float = 10e6
    tau_thermal: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.v_hl_sigma < 0.0 or self.pink_amplitude < 0.0:
            raise ValueError("v_hl_sigma and pink_amplitude must be >= 0")
        if not 0.0 < self.f_low < self.f_high:
            raise ValueError(
                f"need 0 < f_low < f_high, got [{self.f_low!r}, {self.f_high!r}]"
            )
        if self.tau_thermal < 0.0:
            raise ValueError("tau_thermal must be >= 0")


def generate_pink_noise(
    n: int,
    dt: float,
    config: NoiseConfig,
    rng: np.random.Generator | None = None,
) -> Waveform:
    """Band-limited 1/f voltage noise record of n samples.

    Frequency-domain synthesis: a complex white Gaussian spectrum is shaped
    by 1/sqrt(f) inside [f_low, f_high], held flat below f_low and zeroed
    above f_high, then transformed back and scaled to the exact RMS
    ``pink_amplitude``.  The record is exactly zero-mean (no DC component).
    Deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n!r}")
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    f_min = 1.0 / (n * dt)
    if f_min > config.f_low:
        raise ValueError(
            f"record of {n} x {dt!r} s resolves nothing below {f_min!r} Hz; "
            f"cannot represent f_low={config.f_low!r} Hz"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    samples = _pink_rows(n, dt, config, [rng])[0]
    return Waveform(dt, samples, t0=0.0)


def _pink_shape(n: int, dt: float, config: NoiseConfig) -> np.ndarray:
    """Spectral amplitude profile over the rfft bins (DC bin zeroed)."""
    f = np.fft.rfftfreq(n, dt)
    shape = np.zeros_like(f)
    band = (f >= config.f_low) & (f <= config.f_high)
    shape[band] = 1.0 / np.sqrt(f[band])
    low = (f > 0.0) & (f < config.f_low)
    shape[low] = 1.0 / math.sqrt(config.f_low)
    return shape


def _pink_rows(
    n: int,
    dt: float,
    config: NoiseConfig,
    rngs: list[np.random.Generator],
    shape: np.ndarray | None = None,
) -> np.ndarray:
    """One pink-noise record per generator, as rows of a (len(rngs), n) array.

    Row i is identical to what generate_pink_noise would return for rngs[i]:
    both paths draw the same spectrum from the same stream.
    """
    if shape is None:
        shape = _pink_shape(n, dt, config)
    nb = shape.size
    spec = np.empty((len(rngs), nb), dtype=complex)
    for row, rng in enumerate(rngs):
        spec[row] = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
    spec *= shape
    if n % 2 == 0:
        spec[:, -1] = spec[:, -1].real
    x = np.fft.irfft(spec, n, axis=-1)
    if config.pink_amplitude == 0.0:
        return np.zeros_like(x)
    rms = x.std(axis=-1, keepdims=True)
    rms[rms == 0.0] = 1.0
    return x * (config.pink_amplitude / rms)


def holding_voltage_trace(
    v_hl_drawn: float,
    v_hl_start: float,
    tau_thermal: float,
    times: np.ndarray,
) -> np.ndarray:
    """Instantaneous switching level relaxing from the post-switching start
    value toward the drawn asymptote; constant when tau_thermal is 0."""
    times = np.asarray(times, dtype=float)
    if tau_thermal < 0.0:
        raise ValueError("tau_thermal must be >= 0")
    if tau_thermal == 0.0:
        return np.full(times.shape, v_hl_drawn)
    return v_hl_drawn + (v_hl_start - v_hl_drawn) * np.exp(-times / tau_thermal)


@dataclass(frozen=True)
class EscapeRun:
    """Result of one escape-time Monte Carlo.

    times     per-iteration escape times, s (NaN marks a censored iteration)
    tau       relaxation time constant of the noise-free trace, s
    v_asymptote  branch asymptote voltage, V
    margin    v_asymptote - level mean, V (sign convention of the module)
    timeout   censoring horizon, s
    seed      master seed used
    """

    times: np.ndarray
    tau: float
    v_asymptote: float
    margin: float
    timeout: float
    seed: int

    @property
    def iterations(self) -> int:
        return int(self.times.size)

    @property
    def censored(self) -> int:
        return int(np.count_nonzero(np.isnan(self.times)))

    @property
    def samples(self) -> np.ndarray:
        """Uncensored escape times, sorted ascending."""
        finite = self.times[~np.isnan(self.times)]
        return np.sort(finite)

    def median(self) -> float:
        s = self.samples
        return float(np.median(s)) if s.size else math.nan


def _escape_times(
    v_a: float,
    tau: float,
    level_mu: float,
    level_sigma: float,
    level_start: float,
    noise: NoiseConfig,
    iterations: int,
    timeout: float,
    chunk: int,
) -> np.ndarray:
    """Falling-orientation escape engine on generic voltages.

    The trace falls from v_a + ESCAPE_START_OFFSET toward v_a; escape is the
    first time it reaches the instantaneous level.  Rising problems are
    mapped onto this by negating all voltages.
    """
    seq = np.random.SeedSequence(noise.seed)
    children = seq.spawn(iterations)
    v0 = v_a + ESCAPE_START_OFFSET
    tau_th = noise.tau_thermal
    out = np.full(iterations, math.nan)

    if noise.pink_amplitude == 0.0 and tau_th == 0.0:
        # Deterministic relaxation against a constant drawn level: closed form.
        for idx, child in enumerate(children):
            rng = np.random.default_rng(child)
            drawn = rng.normal(level_mu, level_sigma)
            if drawn >= v0:
                out[idx] = 0.0
            elif drawn > v_a:
                t = analytic.segment_time(v0, drawn, v_a, tau)
                if t <= timeout:
                    out[idx] = t
        return out

    # The deterministic trace and the thermal level are evaluated in closed
    # form and crossings are refined by brentq, so the grid only has to
    # resolve the noise band and coarsely track the exponentials.
    base = tau if tau_th == 0.0 else min(tau, tau_th)
    if noise.pink_amplitude > 0.0:
        dt = min(base / 10.0, 0.25 / noise.f_high)
        horizon = max(timeout, 1.0 / noise.f_low)
    else:
        dt = base / 10.0
        horizon = timeout
    n = int(math.ceil(horizon / dt)) + 1
    # Cap the chunk so the (chunk, n) work arrays stay around tens of MB
    # even for long censoring horizons.
    chunk = max(16, min(chunk, int(4e6 / n) + 1))
    t_grid = dt * np.arange(n)
    det = v_a + ESCAPE_START_OFFSET * np.exp(-t_grid / tau)
    decay = np.exp(-t_grid / tau_th) if tau_th > 0.0 else None
    limit = min(int(math.floor(timeout / dt)), n - 1)
    shape = _pink_shape(n, dt, noise) if noise.pink_amplitude > 0.0 else None

    for lo in range(0, iterations, chunk):
        batch = children[lo:lo + chunk]
        rngs = [np.random.default_rng(c) for c in batch]
        if shape is not None:
            noise_rows = _pink_rows(n, dt, noise, rngs, shape)
        else:
            noise_rows = np.zeros((len(rngs), n))
        drawn = np.array([r.normal(level_mu, level_sigma) for r in rngs])
        if decay is None:
            level = drawn[:, None] * np.ones_like(t_grid)
        else:
            level = drawn[:, None] + (level_start - drawn)[:, None] * decay[None, :]
        diff = det[None, :] + noise_rows - level
        below = diff[:, : limit + 1] <= 0.0
        hit = below.any(axis=1)
        first = below.argmax(axis=1)
        for row in range(len(rngs)):
            if not hit[row]:
                continue
            k = int(first[row])
            if k == 0:
                out[lo + row] = 0.0
                continue
            nr = noise_rows[row]
            dr = drawn[row]

            def g(t: float) -> float:
                val = v_a + ESCAPE_START_OFFSET * math.exp(-t / tau)
                j = min(int(t / dt), n - 2)
                frac = t / dt - j
                val += nr[j] + (nr[j + 1] - nr[j]) * frac
                if tau_th > 0.0:
                    lev = dr + (level_start - dr) * math.exp(-t / tau_th)
                else:
                    lev = dr
                return val - lev

            t_lo, t_hi = t_grid[k - 1], t_grid[k]
            if g(t_lo) <= 0.0:
                out[lo + row] = t_lo
            else:
                out[lo + row] = optimize.brentq(g, t_lo, t_hi, xtol=1e-18, rtol=1e-15)
    return out


def monte_carlo_falling_escape(
    params: MemristorParams,
    i_bias: float,
    c_l: float,
    noise: NoiseConfig,
    iterations: int = 10000,
    timeout: float | None = None,
    chunk: int = 512,
) -> EscapeRun:
    """Escape-time Monte Carlo of the falling (metallic) relaxation.

    The trace starts 50 mV above the falling asymptote v_af = v_om + r_m * I
    at t = 0 and decays with tau_f = c_l * r_m; the holding level is drawn
    per iteration from Normal(v_hl_mu, v_hl_sigma) and relaxes from
    v_hl_mu + 3 sigma with tau_thermal.  Iterations that never cross within
    the timeout (default 100 * tau_f) are censored (NaN).

    With all noise terms zero every escape time equals the analytic segment
    time between v_af + 50 mV and the holding level.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not c_l > 0.0:
        raise ValueError(f"c_l must be > 0, got {c_l!r}")
    tau_f = c_l * params.r_m
    v_af = params.v_om + params.r_m * i_bias
    if timeout is None:
        timeout = 100.0 * tau_f
    if not timeout > 0.0:
        raise ValueError(f"timeout must be > 0, got {timeout!r}")
    level_start = noise.v_hl_mu + 3.0 * noise.v_hl_sigma
    times = _escape_times(
        v_af, tau_f, noise.v_hl_mu, noise.v_hl_sigma, level_start,
        noise, iterations, timeout, chunk,
    )
    run = EscapeRun(
        times=times,
        tau=tau_f,
        v_asymptote=v_af,
        margin=v_af - noise.v_hl_mu,
        timeout=timeout,
        seed=noise.seed,
    )
    if run.censored == run.iterations:
        raise RuntimeError(
            f"all {iterations} iterations censored at timeout {timeout!r} s; "
            f"margin {run.margin!r} V is too far into the escape regime for "
            f"this noise level"
        )
    return run


def monte_carlo_rising_escape(
    params: MemristorParams,
    i_bias: float,
    c_l: float,
    noise: NoiseConfig,
    iterations: int = 10000,
    timeout: float | None = None,
    chunk: int = 512,
) -> EscapeRun:
    """Mirror of the falling engine for the rising (insulating) relaxation.

    The trace starts 50 mV below the rising asymptote v_ar = v_oi + r_i * I;
    noise.v_hl_mu / v_hl_sigma are interpreted as the threshold-level
    distribution, the post-switching level starts at mu - 3 sigma, and
    escape is the first upward crossing.  Internally this is the falling
    engine on negated voltages; the margin sign convention matches it
    (margin = level mean - v_ar here, negative when deterministic).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not c_l > 0.0:
        raise ValueError(f"c_l must be > 0, got {c_l!r}")
    tau_r = c_l * params.r_i
    v_ar = params.v_oi + params.r_i * i_bias
    if timeout is None:
        timeout = 100.0 * tau_r
    if not timeout > 0.0:
        raise ValueError(f"timeout must be > 0, got {timeout!r}")
    level_start = noise.v_hl_mu - 3.0 * noise.v_hl_sigma
    times = _escape_times(
        -v_ar, tau_r, -noise.v_hl_mu, noise.v_hl_sigma, -level_start,
        noise, iterations, timeout, chunk,
    )
    run = EscapeRun(
        times=times,
        tau=tau_r,
        v_asymptote=v_ar,
        margin=noise.v_hl_mu - v_ar,
        timeout=timeout,
        seed=noise.seed,
    )
    if run.censored == run.iterations:
        raise RuntimeError(
            f"all {iterations} iterations censored at timeout {timeout!r} s"
        )
    return run


@dataclass(frozen=True)
class MarginPoint:
    """Median escape time at one margin of a sweep.  median is NaN when
    fewer than the required iterations survived censoring."""

    margin: float
    median: float
    n_survived: int
    n_censored: int


def escape_time_vs_margin(
    params: MemristorParams,
    c_l: float,
    noise: NoiseConfig,
    margins: list[float],
    iterations: int = 1000,
    min_survivors: int = 100,
    timeout: float | None = None,
) -> list[MarginPoint]:
    """Median falling escape time across holding margins.

    The bias current is chosen per margin so that the falling asymptote sits
    ``margin`` volts above the median holding level (margin = v_af -
    v_hl_mu).  All margins share the same master seed, i.e. iteration i sees
    the same noise record at every margin; escape times then shift
    coherently and the medians increase monotonically with margin.

    Margins where fewer than min_survivors iterations escape are reported
    with a NaN median; if that happens at every margin a RuntimeError is
    raised.
    """
    if not margins:
        raise ValueError("margins must be nonempty")
    points: list[MarginPoint] = []
    for margin in margins:
        i_bias = (noise.v_hl_mu + margin - params.v_om) / params.r_m
        if not i_bias > 0.0:
            raise ValueError(
                f"margin {margin!r} V implies nonpositive bias current "
                f"{i_bias!r} A for these parameters"
            )
        try:
            run = monte_carlo_falling_escape(
                params, i_bias, c_l, noise, iterations, timeout
            )
        except RuntimeError:
            points.append(MarginPoint(margin, math.nan, 0, iterations))
            continue
        survived = run.iterations - run.censored
        median = run.median() if survived >= min_survivors else math.nan
        points.append(MarginPoint(margin, median, survived, run.censored))
    if all(math.isnan(p.median) for p in points):
        raise RuntimeError(
            f"fewer than {min_survivors} surviving iterations at every margin"
        )
    return points


def fit_margin_offset(points: list[MarginPoint], tau: float) -> float:
    """Effective noise offset from a margin sweep, volts.

    Fits the noise-free escape curve shifted in margin,
    t(m) = tau * ln(0.05 / (delta - m)), to the measured medians in
    log-time; returns the shift delta.  The fitted delta is the margin by
    which noise effectively advances the deterministic crossing, i.e. the
    setup noise scale.
    """
    usable = [(p.margin, p.median) for p in points if not math.isnan(p.median)]
    if len(usable) < 3:
        raise ValueError("need at least 3 margins with medians to fit an offset")
    m = np.array([u[0] for u in usable])
    t_med = np.array([u[1] for u in usable])

    def cost(delta: float) -> float:
        # The shifted curve is only defined for margins below delta, so every
        # fitted point must satisfy delta > m; dropping points would let the
        # optimizer shrink delta by discarding the evidence that pins it.
        gap = delta - m
        if np.any(gap <= 0.0) or np.any(gap >= ESCAPE_START_OFFSET):
            return math.inf
        # Linear-time residuals: the shift is identifiable only near the bend
        # at small margins, where escape times are largest.  Log residuals
        # would overweight the deep-negative tail, where the shifted model
        # degenerates toward zero time and the data follow the unshifted
        # curve regardless of the noise scale.
        resid = t_med - tau * np.log(ESCAPE_START_OFFSET / gap)
        return float(np.mean(resid**2))

    lo = float(m.max()) + 1e-6
    hi = float(m.min()) + ESCAPE_START_OFFSET - 1e-6
    if hi <= lo:
        raise ValueError("margin sweep spans more than the start offset; no single shift fits")
    grid = np.linspace(lo, hi, 2001)
    costs = np.array([cost(d) for d in grid])
    if not np.any(np.isfinite(costs)):
        raise RuntimeError("margin-offset fit failed: no candidate offset is valid")
    best = grid[int(np.argmin(costs))]
    span = (hi - lo) / 2000.0
    res = optimize.minimize_scalar(
        cost, bounds=(max(lo, best - 2 * span), min(hi, best + 2 * span)),
        method="bounded",
    )
    return float(res.x) if res.fun <= cost(best) else float(best)


# ---------------------------------------------------------------------------
# Distribution fitting


class DistributionFamily(enum.Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"


@dataclass(frozen=True)
class DistributionFit:
    """Maximum-likelihood fit of the selected family.

    family     selected family
    params     family parameters (rate / mu, sigma / shape, scale)
    loglik     log-likelihood of the selected family at its MLE
    n          sample count
    degenerate True for zero-variance samples (reported as a Gaussian spike)
    candidates log-likelihood of every family considered
    """

    family: DistributionFamily
    params: dict
    loglik: float
    n: int
    degenerate: bool = False
    candidates: dict = None  # type: ignore[assignment]


def fit_distribution(samples: np.ndarray) -> DistributionFit:
    """Select among Exponential, Gaussian and Gamma by maximum likelihood.

    Raw log-likelihoods are compared directly (every candidate has at most
    two parameters); differences below a nested-model tie width are treated
    as ties and resolved toward fewer parameters, Exponential first, then
    Gaussian.  Zero-variance samples are reported as a degenerate Gaussian.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 8:
        raise ValueError(f"need at least 8 samples to fit a family, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    mu = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        return DistributionFit(
            family=DistributionFamily.GAUSSIAN,
            params={"mu": mu, "sigma": 0.0},
            loglik=math.inf,
            n=n,
            degenerate=True,
            candidates={},
        )

    candidates: dict[DistributionFamily, tuple[float, dict]] = {}
    ll_gauss = float(np.sum(stats.norm.logpdf(x, loc=mu, scale=sigma)))
    candidates[DistributionFamily.GAUSSIAN] = (ll_gauss, {"mu": mu, "sigma": sigma})

    if np.all(x >= 0.0) and mu > 0.0:
        scale = mu
        ll_exp = float(np.sum(stats.expon.logpdf(x, loc=0.0, scale=scale)))
        candidates[DistributionFamily.EXPONENTIAL] = (ll_exp, {"rate": 1.0 / scale})
        if np.all(x > 0.0):
            shape_g, _, scale_g = stats.gamma.fit(x, floc=0.0)
            ll_gamma = float(np.sum(stats.gamma.logpdf(x, shape_g, loc=0.0,
                                                       scale=scale_g)))
            candidates[DistributionFamily.GAMMA] = (
                ll_gamma, {"shape": float(shape_g), "scale": float(scale_g)}
            )

    best_ll = max(ll for ll, _ in candidates.values())
    # Preference under ties: fewest parameters first, Gaussian before Gamma.
    order = [DistributionFamily.EXPONENTIAL, DistributionFamily.GAUSSIAN,
             DistributionFamily.GAMMA]
    for family in order:
        if family in candidates and candidates[family][0] >= best_ll - _LOGLIK_TIE:
            ll, pars = candidates[family]
            return DistributionFit(
                family=family, params=pars, loglik=ll, n=n,
                candidates={f.value: c[0] for f, c in candidates.items()},
            )
    raise AssertionError("unreachable: some candidate must be within the tie width")


# ---------------------------------------------------------------------------
# File exports


def escape_run_to_csv(run: EscapeRun, path: str | os.PathLike) -> None:
    buf = io.StringIO()
    buf.write("iteration,escape_time_seconds,censored\n")
    for idx, t in enumerate(run.times):
        if math.isnan(t):
            buf.write(f"{idx},nan,1\n")
        else:
            buf.write(f"{idx},{float(t)!r},0\n")
    atomic_write_text(path, buf.getvalue())


def histogram_to_csv(samples: np.ndarray, path: str | os.PathLike,
                     bins: int = 50) -> None:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cannot histogram an empty sample set")
    counts, edges = np.histogram(samples, bins=bins)
    buf = io.StringIO()
    buf.write("bin_left,bin_right,count\n")
    for k in range(counts.size):
        buf.write(f"{float(edges[k])!r},{float(edges[k + 1])!r},{counts[k]}\n")
    atomic_write_text(path, buf.getvalue())
