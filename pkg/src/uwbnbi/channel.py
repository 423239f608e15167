"""Saleh-Valenzuela multipath (IEEE 802.15.3a CM1), receive filter, and template."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.signal import firwin

from .waveform import SampledWaveform, WaveformError, convolve, energy, normalize_energy


@dataclass(frozen=True)
class Cm1Params:
    """Rates in 1/ns, decays and window in ns, fading spreads in dB."""

    cluster_rate: float = 0.0233
    ray_rate: float = 2.5
    cluster_decay: float = 7.1
    ray_decay: float = 4.3
    cluster_fading_db: float = 3.3941
    ray_fading_db: float = 3.3941
    observation_window: float = 60.0

    def __post_init__(self):
        for name in ("cluster_rate", "ray_rate", "cluster_decay", "ray_decay", "observation_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.cluster_fading_db < 0 or self.ray_fading_db < 0:
            raise ValueError("fading spreads must be >= 0")


@dataclass(frozen=True)
class ChannelRealization:
    arrival_times: np.ndarray  # seconds, non-decreasing, first = 0
    gains: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.arrival_times, dtype=float)
        g = np.asarray(self.gains, dtype=float)
        if t.shape != g.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("arrival_times and gains must be equal-length non-empty 1-D")
        if np.any(np.diff(t) < 0):
            raise ValueError("arrival times must be non-decreasing")
        t.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "arrival_times", t)
        object.__setattr__(self, "gains", g)

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.gains**2))

    @property
    def taps(self) -> list[tuple[float, float]]:
        return list(zip(self.arrival_times.tolist(), self.gains.tolist()))

    def mean_excess_delay(self) -> float:
        p = self.gains**2
        return float(np.sum(p * self.arrival_times) / np.sum(p))

    def scaled(self, c: float) -> ChannelRealization:
        return ChannelRealization(self.arrival_times, self.gains * c)

    def to_json(self) -> str:
        return json.dumps({"taps": [[t, g] for t, g in self.taps]})

    @classmethod
    def from_json(cls, text: str) -> ChannelRealization:
        taps = json.loads(text)["taps"]
        return cls(np.array([t for t, _ in taps]), np.array([g for _, g in taps]))

    @classmethod
    def single_tap(cls) -> ChannelRealization:
        return cls(np.zeros(1), np.ones(1))


def _poisson_arrivals(rng: np.random.Generator, rate: float, limit: float) -> np.ndarray:
    """Arrival times of a Poisson process on [0, limit] anchored with an arrival at 0."""
    times = [0.0]
    t = 0.0
    while True:
        # draw in batches; the expected count up to `limit` is rate*limit
        gaps = rng.exponential(1.0 / rate, size=max(8, int(rate * limit * 1.2) + 8))
        cum = t + np.cumsum(gaps)
        inside = cum[cum <= limit]
        times.extend(inside.tolist())
        if inside.size < cum.size:
            return np.asarray(times)
        t = float(cum[-1])


def generate_cm1(params: Cm1Params, rng: np.random.Generator) -> ChannelRealization:
    """Draw one CM1 impulse response, normalized to unit total energy.

    Cluster and ray arrivals are Poisson, the mean tap power decays
    exponentially in both cluster and ray delay, tap amplitudes are
    lognormal with the combined spread and random sign.
    """
    window = params.observation_window
    sigma_db = np.hypot(params.cluster_fading_db, params.ray_fading_db)
    times, gains = [], []
    for cluster_t in _poisson_arrivals(rng, params.cluster_rate, window):
        rays = _poisson_arrivals(rng, params.ray_rate, window - cluster_t)
        mean_power_db = 10.0 * np.log10(
            np.exp(-cluster_t / params.cluster_decay) * np.exp(-rays / params.ray_decay)
        )
        # 20 log10|beta| ~ N(mu, sigma^2) with mu set so that E{beta^2} hits the mean power
        mu = mean_power_db - sigma_db**2 * np.log(10.0) / 20.0
        amp = 10.0 ** ((mu + sigma_db * rng.standard_normal(rays.size)) / 20.0)
        sign = rng.choice(np.array([-1.0, 1.0]), size=rays.size)
        times.append(cluster_t + rays)
        gains.append(amp * sign)
    t = np.concatenate(times)
    g = np.concatenate(gains)
    order = np.argsort(t, kind="stable")
    t, g = t[order], g[order]
    g = g / np.sqrt(np.sum(g**2))
    return ChannelRealization(t * 1e-9, g)


@dataclass(frozen=True)
class LowPassFilterSpec:
    bandwidth: float = 8e9
    kernel_length: int = 767
    kaiser_beta: float = 8.0
    gain: float = 1.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")
        if self.kernel_length < 3 or self.kernel_length % 2 == 0:
            raise ValueError("kernel_length must be odd and >= 3")


def lowpass_taps(spec: LowPassFilterSpec, sample_rate: float) -> np.ndarray:
    """Unit-DC-gain FIR taps whose stopband starts at the bandwidth B.

    The sinc cutoff sits half a Kaiser transition (about 2.5 fs/N for
    beta = 8) below B, so everything above B is at least 40 dB down.
    """
    if sample_rate < 2.0 * spec.bandwidth:
        raise WaveformError(
            f"sample rate {sample_rate:g} Hz below Nyquist rate for B = {spec.bandwidth:g} Hz"
        )
    cutoff = spec.bandwidth - 2.5 * sample_rate / spec.kernel_length
    if cutoff <= 0:
        raise WaveformError("kernel too short for this bandwidth and sample rate")
    taps = firwin(spec.kernel_length, cutoff, window=("kaiser", spec.kaiser_beta), fs=sample_rate)
    return spec.gain * taps


def lowpass_kernel(spec: LowPassFilterSpec, sample_rate: float) -> SampledWaveform:
    """The filter as an impulse response centered on t = 0 (zero group delay)."""
    dt = 1.0 / sample_rate
    taps = lowpass_taps(spec, sample_rate)
    half = spec.kernel_length // 2
    # impulse response in 1/s so that convolve()'s dt scaling keeps DC gain = spec.gain
    return SampledWaveform(taps / dt, dt, -half * dt)


def apply_lowpass(w: SampledWaveform, spec: LowPassFilterSpec) -> SampledWaveform:
    """Filter ``w``; output has the same grid and length as the input."""
    h = lowpass_kernel(spec, w.sample_rate)
    full = convolve(w, h)
    half = spec.kernel_length // 2
    return SampledWaveform(full.samples[half : half + len(w)], w.sample_interval, w.start_time)


def lowpass_rows(x: np.ndarray, spec: LowPassFilterSpec, sample_rate: float) -> np.ndarray:
    """Batch version of apply_lowpass along the last axis of a 2-D array."""
    from scipy.signal import oaconvolve

    taps = lowpass_taps(spec, sample_rate)
    half = spec.kernel_length // 2
    full = oaconvolve(x, taps[None, :], mode="full", axes=-1)
    return full[..., half : half + x.shape[-1]]


def channel_waveform(channel: ChannelRealization, sample_interval: float) -> SampledWaveform:
    """Place taps on the sample grid (nearest sample) as area-``gain`` impulses."""
    idx = np.rint(channel.arrival_times / sample_interval).astype(int)
    samples = np.zeros(idx.max() + 1)
    np.add.at(samples, idx, channel.gains)
    return SampledWaveform(samples / sample_interval, sample_interval, 0.0)


def composite_reference(
    pulse: SampledWaveform,
    channel: ChannelRealization,
    lpf: LowPassFilterSpec | None,
    normalize: bool = True,
) -> SampledWaveform:
    """Received template: pulse * channel * receive filter, unit energy by default.

    ``lpf=None`` skips the filter (a "wide open" receiver).
    """
    w = convolve(pulse, channel_waveform(channel, pulse.sample_interval))
    if lpf is not None:
        w = convolve(w, lowpass_kernel(lpf, pulse.sample_rate))
    if normalize:
        return normalize_energy(w)
    return w


__all__ = [
    "Cm1Params",
    "ChannelRealization",
    "LowPassFilterSpec",
    "generate_cm1",
    "lowpass_taps",
    "lowpass_kernel",
    "apply_lowpass",
    "lowpass_rows",
    "channel_waveform",
    "composite_reference",
    "energy",
]
