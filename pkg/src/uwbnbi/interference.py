"""Narrowband interferers: synthesis, SIR calibration, projection onto the template."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .waveform import SampledWaveform, WaveformError, window_slice, windowed_inner_product


class NbiKind(enum.Enum):
    BPSK = "bpsk"
    TONE = "tone"


@dataclass(frozen=True)
class NbiSpec:
    """``initial_phase=None`` draws a uniform phase per realization."""

    kind: NbiKind = NbiKind.BPSK
    carrier_freq: float = 5e9
    symbol_rate: float = 10e6
    initial_phase: float | None = None
    power: float = 1.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", NbiKind(self.kind))
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be > 0")
        if self.power < 0:
            raise ValueError("power must be >= 0")
        if self.kind is NbiKind.BPSK and not (0 < self.symbol_rate <= self.carrier_freq / 10):
            raise ValueError("bpsk symbol_rate must be positive and well below the carrier")

    @property
    def amplitude(self) -> float:
        # E{A^2 cos^2} = A^2/2, also for +-1 data
        return float(np.sqrt(2.0 * self.power))


@dataclass(frozen=True)
class SirTarget:
    sir_db: float

    def __post_init__(self):
        if not np.isfinite(self.sir_db):
            raise ValueError("sir_db must be finite")

    @property
    def linear(self) -> float:
        return 10.0 ** (self.sir_db / 10.0)


@dataclass(frozen=True)
class NbiRealization:
    """Random parameters of one interferer burst.

    Data symbol m covers [origin - timing_offset + m/Rs, ...), bits[m] in {-1, +1}.
    """

    phase: float
    timing_offset: float
    bits: np.ndarray


def _symbol_count(spec: NbiSpec, duration: float) -> int:
    return int(np.ceil(duration * spec.symbol_rate)) + 2


def draw_realization(spec: NbiSpec, duration: float, rng: np.random.Generator) -> NbiRealization:
    phase = rng.uniform(0.0, 2.0 * np.pi) if spec.initial_phase is None else spec.initial_phase
    if spec.kind is NbiKind.TONE:
        return NbiRealization(float(phase), 0.0, np.ones(1))
    offset = rng.uniform(0.0, 1.0 / spec.symbol_rate)
    bits = rng.choice(np.array([-1.0, 1.0]), size=_symbol_count(spec, duration))
    return NbiRealization(float(phase), float(offset), bits)


def render(spec: NbiSpec, realization: NbiRealization, times: np.ndarray, origin: float = 0.0) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    carrier = spec.amplitude * np.cos(2.0 * np.pi * spec.carrier_freq * t + realization.phase)
    if spec.kind is NbiKind.TONE:
        return carrier
    m = np.floor((t - origin + realization.timing_offset) * spec.symbol_rate).astype(int)
    m = np.clip(m, 0, realization.bits.size - 1)
    return carrier * realization.bits[m]


def synthesize_nbi(
    spec: NbiSpec,
    duration: float,
    rng: np.random.Generator,
    sample_rate: float = 64e9,
    start_time: float = 0.0,
) -> SampledWaveform:
    """Interferer record of length ``duration`` at ``spec.power`` (time-average)."""
    if not duration > 0:
        raise WaveformError("duration must be > 0")
    dt = 1.0 / sample_rate
    n = int(np.ceil(duration / dt))
    times = start_time + np.arange(n) * dt
    real = draw_realization(spec, duration, rng)
    return SampledWaveform(render(spec, real, times, start_time), dt, start_time)


def mean_power(w: SampledWaveform) -> float:
    return float(np.mean(w.samples**2))


def calibrate_sir(
    nbi: SampledWaveform, Es: float, target: SirTarget, reference_duration: float = 1.0
) -> SampledWaveform:
    """Scale ``nbi`` so that mean power times ``reference_duration`` equals Es / SIR.

    With the default ``reference_duration`` the power itself is matched;
    the simulator passes the symbol period so that SIR compares symbol
    energy with interference energy per symbol.
    """
    p = mean_power(nbi)
    if p <= 0:
        raise WaveformError("interference record has zero power")
    wanted = Es / target.linear / reference_duration
    return nbi.scaled(np.sqrt(wanted / p))


def interference_power(Es: float, sir_db: float, reference_duration: float = 1.0) -> float:
    return Es / SirTarget(sir_db).linear / reference_duration


def project_interference(template: SampledWaveform, r_I: SampledWaveform, k: int, T: float) -> float:
    """d_I[k]: inner product of ``r_I`` with the template over [(k-1)T, kT).

    ``template`` is laid out for symbol 1 (support inside [0, T)); it is
    shifted by (k-1)T for symbol ``k``.
    """
    shifted = template.shifted((k - 1) * T)
    # the template record may be shorter than T; integrate where it lives
    start = max((k - 1) * T, shifted.start_time)
    stop = min(k * T, shifted.end_time)
    return windowed_inner_product(shifted, r_I, start, stop)


class ProjectionSampler:
    """Exact d_I draws for one template without rendering whole waveforms.

    Uses running sums of template * cos and template * sin at the carrier,
    so a BPSK realization costs one lookup per data transition.
    """

    def __init__(self, template: SampledWaveform, spec: NbiSpec, filter_gain: float = 1.0):
        self.template = template
        self.spec = spec
        self.filter_gain = filter_gain
        t = template.times
        arg = 2.0 * np.pi * spec.carrier_freq * t
        dt = template.sample_interval
        self._ccum = np.concatenate([[0.0], np.cumsum(template.samples * np.cos(arg) * dt)])
        self._scum = np.concatenate([[0.0], np.cumsum(template.samples * np.sin(arg) * dt)])

    def projection_gain(self) -> float:
        """|integral of w(t) exp(j 2 pi fc t)|, the tone-projection magnitude per unit amplitude."""
        return float(np.hypot(self._ccum[-1], self._scum[-1])) * self.filter_gain

    def project(self, realizations: list[NbiRealization] | None = None, *, phases=None, offsets=None, bits=None) -> np.ndarray:
        """Projections for given draws (arrays, or a list of NbiRealization)."""
        if realizations is not None:
            phases = np.array([r.phase for r in realizations])
            offsets = np.array([r.timing_offset for r in realizations])
            nb = max(r.bits.size for r in realizations)
            bits = np.ones((len(realizations), nb))
            for i, r in enumerate(realizations):
                bits[i, : r.bits.size] = r.bits
        phases = np.asarray(phases, dtype=float)
        amp = self.spec.amplitude * self.filter_gain
        n = self.template.samples.size
        if self.spec.kind is NbiKind.TONE:
            c, s = self._ccum[-1], self._scum[-1]
            return amp * (np.cos(phases) * c - np.sin(phases) * s)
        offsets = np.asarray(offsets, dtype=float)
        bits = np.asarray(bits, dtype=float)
        Tb = 1.0 / self.spec.symbol_rate
        dt = self.template.sample_interval
        t0 = self.template.start_time
        total = np.zeros(phases.size)
        origin = t0  # bit index is counted from the template's first sample
        lo_idx = np.zeros(phases.size, dtype=int)
        for m in range(bits.shape[1]):
            # end of symbol m in absolute time, mapped to a template sample index
            t_end = origin - offsets + (m + 1) * Tb
            hi_idx = np.clip(np.ceil((t_end - t0) / dt - 1e-9).astype(int), 0, n)
            cseg = self._ccum[hi_idx] - self._ccum[lo_idx]
            sseg = self._scum[hi_idx] - self._scum[lo_idx]
            total += bits[:, m] * (np.cos(phases) * cseg - np.sin(phases) * sseg)
            lo_idx = hi_idx
            if np.all(lo_idx >= n):
                break
        return amp * total

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        phases = (
            rng.uniform(0.0, 2.0 * np.pi, size=count)
            if self.spec.initial_phase is None
            else np.full(count, self.spec.initial_phase)
        )
        if self.spec.kind is NbiKind.TONE:
            return self.project(phases=phases)
        Tb = 1.0 / self.spec.symbol_rate
        duration = len(self.template) * self.template.sample_interval
        offsets = rng.uniform(0.0, Tb, size=count)
        bits = rng.choice(np.array([-1.0, 1.0]), size=(count, _symbol_count(self.spec, duration)))
        return self.project(phases=phases, offsets=offsets, bits=bits)
