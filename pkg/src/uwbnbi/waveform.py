"""Uniformly sampled real signals and the UWB monocycle pulse."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class WaveformError(ValueError):
    pass


@dataclass(frozen=True)
class SampledWaveform:
    """Real amplitudes on a uniform time grid starting at ``start_time``."""

    samples: np.ndarray
    sample_interval: float
    start_time: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise WaveformError("samples must be one-dimensional")
        if not self.sample_interval > 0:
            raise WaveformError(f"sample_interval must be > 0, got {self.sample_interval}")
        if not np.all(np.isfinite(samples)):
            raise WaveformError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.sample_interval

    @property
    def end_time(self) -> float:
        """Time just past the last sample (support is [start_time, end_time))."""
        return self.start_time + self.samples.size * self.sample_interval

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) * self.sample_interval

    def scaled(self, factor: float) -> SampledWaveform:
        return SampledWaveform(self.samples * factor, self.sample_interval, self.start_time)

    def shifted(self, delay: float) -> SampledWaveform:
        return SampledWaveform(self.samples, self.sample_interval, self.start_time + delay)

    def index_of(self, t: float) -> int:
        """Index of the sample nearest to time ``t`` (may fall outside the record)."""
        return int(np.rint((t - self.start_time) / self.sample_interval))


class PulseShape(enum.Enum):
    SECOND_DERIVATIVE_GAUSSIAN = "second-derivative-gaussian"


@dataclass(frozen=True)
class PulseSpec:
    tau: float = 0.16e-9
    truncation_half_width: float | None = None
    shape: PulseShape = field(default=PulseShape.SECOND_DERIVATIVE_GAUSSIAN)

    def __post_init__(self):
        if not self.tau > 0:
            raise WaveformError(f"tau must be > 0, got {self.tau}")
        if self.truncation_half_width is None:
            object.__setattr__(self, "truncation_half_width", 3.0 * self.tau)
        # small slack so 3*tau computed in a different order still passes
        if self.truncation_half_width < 3.0 * self.tau * (1 - 1e-12):
            raise WaveformError("truncation_half_width must be at least 3*tau")


def monocycle(t: np.ndarray, tau: float) -> np.ndarray:
    """Un-normalized second-derivative Gaussian (1 - 4 pi x^2) exp(-2 pi x^2), x = t/tau."""
    x2 = (np.asarray(t, dtype=float) / tau) ** 2
    return (1.0 - 4.0 * np.pi * x2) * np.exp(-2.0 * np.pi * x2)


def generate_pulse(spec: PulseSpec, sample_rate: float) -> SampledWaveform:
    """Sample the pulse on a grid symmetric about t = 0 and normalize to unit energy."""
    if sample_rate < 4.0 / spec.tau:
        raise WaveformError(
            f"sample rate {sample_rate:g} Hz is below 4/tau = {4.0 / spec.tau:g} Hz"
        )
    dt = 1.0 / sample_rate
    half = int(np.ceil(spec.truncation_half_width / dt))
    t = np.arange(-half, half + 1) * dt
    return normalize_energy(SampledWaveform(monocycle(t, spec.tau), dt, -half * dt))


def _check_intervals(a: SampledWaveform, b: SampledWaveform) -> None:
    if not np.isclose(a.sample_interval, b.sample_interval, rtol=1e-9, atol=0.0):
        raise WaveformError(
            f"sample intervals differ: {a.sample_interval:g} vs {b.sample_interval:g}"
        )


def convolve(a: SampledWaveform, b: SampledWaveform) -> SampledWaveform:
    """Linear convolution approximating the continuous-time integral."""
    _check_intervals(a, b)
    dt = a.sample_interval
    if min(len(a), len(b)) > 64:
        from scipy.signal import fftconvolve

        out = fftconvolve(a.samples, b.samples)
    else:
        out = np.convolve(a.samples, b.samples)
    return SampledWaveform(out * dt, dt, a.start_time + b.start_time)


def energy(w: SampledWaveform) -> float:
    return float(np.dot(w.samples, w.samples) * w.sample_interval)


def normalize_energy(w: SampledWaveform) -> SampledWaveform:
    e = energy(w)
    if e <= 0:
        raise WaveformError("cannot normalize a zero-energy waveform")
    return w.scaled(1.0 / np.sqrt(e))


def window_slice(w: SampledWaveform, window_start: float, window_end: float) -> slice:
    """Sample indices covering [window_start, window_end) on ``w``'s grid.

    Raises when the window is not inside the record (half a sample of slack).
    """
    dt = w.sample_interval
    lo = (window_start - w.start_time) / dt
    hi = (window_end - w.start_time) / dt
    i0, i1 = int(np.ceil(lo - 1e-6)), int(np.ceil(hi - 1e-6))
    if i0 < 0 or i1 > len(w) or i1 < i0:
        raise WaveformError(
            f"window [{window_start:g}, {window_end:g}) outside support "
            f"[{w.start_time:g}, {w.end_time:g})"
        )
    return slice(i0, i1)


def windowed_inner_product(
    a: SampledWaveform, b: SampledWaveform, window_start: float, window_end: float
) -> float:
    """Riemann sum of a(t) b(t) over [window_start, window_end)."""
    _check_intervals(a, b)
    offset = (b.start_time - a.start_time) / a.sample_interval
    if abs(offset - round(offset)) > 1e-6:
        raise WaveformError("waveforms are not on a common sample grid")
    sa = window_slice(a, window_start, window_end)
    sb = window_slice(b, window_start, window_end)
    n = min(sa.stop - sa.start, sb.stop - sb.start)
    xa = a.samples[sa.start : sa.start + n]
    xb = b.samples[sb.start : sb.start + n]
    return float(np.dot(xa, xb) * a.sample_interval)
