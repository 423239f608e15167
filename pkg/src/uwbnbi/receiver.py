"""Matched-filter and quantize-then-correlate demodulators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantizer import QuantizerDesign, quantize
from .waveform import SampledWaveform, WaveformError, window_slice, windowed_inner_product


@dataclass(frozen=True)
class ReceiverKind:
    """``levels=None`` is the full-resolution matched filter."""

    levels: int | None = None

    def __post_init__(self):
        if self.levels is not None and self.levels < 2:
            raise ValueError("a finite-resolution receiver needs at least 2 levels")

    @property
    def is_full(self) -> bool:
        return self.levels is None

    @property
    def label(self) -> str:
        if self.levels is None:
            return "full"
        return {2: "1-bit", 3: "2-bit"}.get(self.levels, f"{self.levels}-level")

    @classmethod
    def parse(cls, text: str) -> ReceiverKind:
        text = text.strip().lower()
        if text in ("full", "full-resolution", "mf"):
            return cls(None)
        if text in ("1-bit", "1bit"):
            return cls(2)
        if text in ("2-bit", "2bit"):
            return cls(3)
        if text.endswith("-level"):
            return cls(int(text[: -len("-level")]))
        raise ValueError(f"unknown receiver kind {text!r}")


FULL = ReceiverKind(None)
ONE_BIT = ReceiverKind(2)
TWO_BIT = ReceiverKind(3)


@dataclass(frozen=True)
class DecisionStatistic:
    value: float
    symbol_index: int = 1


def _symbol_template(template: SampledWaveform, k: int, T: float) -> SampledWaveform:
    if template.start_time < -1e-15 or template.end_time > T * (1 + 1e-9):
        raise WaveformError("template must be laid out inside [0, T)")
    return template.shifted((k - 1) * T)


def matched_filter_statistic(r: SampledWaveform, template: SampledWaveform, k: int, T: float) -> DecisionStatistic:
    """y[k] = integral of w(t - (k-1)T) r(t) over the k-th symbol window."""
    w = _symbol_template(template, k, T)
    start = (k - 1) * T
    stop = min(k * T, w.end_time)
    return DecisionStatistic(windowed_inner_product(w, r, start, stop), k)


def decimation_factor(sample_rate: float, nyquist_rate: float) -> int:
    m = sample_rate / nyquist_rate
    if abs(m - round(m)) > 1e-9 or round(m) < 1:
        raise WaveformError(
            f"internal rate {sample_rate:g} Hz is not an integer multiple of {nyquist_rate:g} Hz"
        )
    return int(round(m))


def finite_res_statistic(
    r: SampledWaveform,
    design: QuantizerDesign,
    template: SampledWaveform,
    k: int,
    T: float,
    nyquist_rate: float = 16e9,
    agc_std: float | None = None,
) -> DecisionStatistic:
    """Sample ``r`` at ``nyquist_rate``, quantize, and correlate with the sampled template.

    ``r`` is assumed band-limited already (it has been through the receive
    filter), so decimation is plain sub-sampling on a grid aligned with the
    window start. ``design`` is for unit-variance input; ``agc_std`` scales
    ``r`` to it (default: the RMS of the window samples).
    """
    w = _symbol_template(template, k, T)
    m = decimation_factor(r.sample_rate, nyquist_rate)
    start = (k - 1) * T
    stop = min(k * T, w.end_time)
    sr = window_slice(r, start, stop)
    sw = window_slice(w, start, stop)
    n = min(sr.stop - sr.start, sw.stop - sw.start)
    x = r.samples[sr.start : sr.start + n : m]
    ref = w.samples[sw.start : sw.start + n : m]
    if agc_std is None:
        agc_std = float(np.sqrt(np.mean(x**2)))
    if not agc_std > 0:
        raise WaveformError("cannot scale an all-zero input")
    q = quantize(design, x / agc_std)
    return DecisionStatistic(float(np.dot(ref, q) * r.sample_interval * m), k)


def decide(stat: DecisionStatistic | float) -> int:
    """Sign decision with ties going to +1."""
    value = stat.value if isinstance(stat, DecisionStatistic) else stat
    return 1 if value >= 0 else -1


def decide_rows(values: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(values) >= 0, 1, -1)


def correlate_rows(rows: np.ndarray, template: np.ndarray, dt: float) -> np.ndarray:
    """Matched-filter statistics of a batch of received records on the template grid."""
    return rows @ template * dt


def quantized_correlate_rows(
    rows: np.ndarray,
    template: np.ndarray,
    design: QuantizerDesign,
    decimation: int,
    dt: float,
    agc_std: float,
) -> np.ndarray:
    """Batch version of finite_res_statistic for records aligned with the template."""
    x = rows[:, ::decimation] / agc_std
    q = quantize(design, x)
    return q @ template[::decimation] * (dt * decimation)
