"""Conditional and interference-averaged BER of the matched-filter and quantized receivers."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .quantizer import BussgangCoefficients, effective_noise_penalty


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LinkBudget:
    """Symbol energy ``Es`` and one-sided noise density ``N0`` (N0/2 per dimension).

    ``Es = 0`` is allowed for noise-only runs.
    """

    Es: float
    N0: float = 1.0

    def __post_init__(self):
        if not self.Es >= 0 or not self.N0 > 0:
            raise ValueError(f"need Es >= 0 and N0 > 0, got Es={self.Es}, N0={self.N0}")

    @classmethod
    def from_snr_db(cls, snr_db: float, N0: float = 1.0) -> LinkBudget:
        """SNR = 2 Es / N0."""
        return cls(10.0 ** (snr_db / 10.0) * N0 / 2.0, N0)

    @property
    def snr_db(self) -> float:
        if self.Es == 0:
            return float("-inf")
        return float(10.0 * np.log10(2.0 * self.Es / self.N0))

    @property
    def noise_var(self) -> float:
        return self.N0 / 2.0


class Formula(enum.Enum):
    MF = "mf"
    FR = "fr"


@dataclass(frozen=True)
class InterferenceSampleSet:
    """d_I realizations; ``source`` says where they came from."""

    samples: np.ndarray
    source: str = "synthetic"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("interference sample set is empty")
        if not np.all(np.isfinite(s)):
            raise ValueError("interference samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    def scaled(self, c: float) -> InterferenceSampleSet:
        return InterferenceSampleSet(self.samples * c, self.source)

    def save(self, path) -> None:
        np.save(path, self.samples)

    @classmethod
    def load(cls, path, source: str = "file") -> InterferenceSampleSet:
        return cls(np.load(path), source)


def _two_sided(sqrt_es: float, d_I, std: float):
    d = np.asarray(d_I, dtype=float)
    out = 0.5 * (q_function((sqrt_es + d) / std) + q_function((sqrt_es - d) / std))
    return float(out) if np.ndim(out) == 0 else out


def ber_mf_conditional(budget: LinkBudget, d_I):
    """Matched-filter BER given the interference projection ``d_I``."""
    return _two_sided(np.sqrt(budget.Es), d_I, np.sqrt(budget.noise_var))


def ber_fr_conditional(budget: LinkBudget, coeffs: BussgangCoefficients, d_I):
    """Quantized-receiver BER given ``d_I``: the noise variance grows by sigma^2/alpha^2."""
    return _two_sided(
        np.sqrt(budget.Es), d_I, np.sqrt(budget.noise_var + effective_noise_penalty(coeffs))
    )


def conditional_ber(formula: Formula | str, budget: LinkBudget, d_I, coeffs: BussgangCoefficients | None = None):
    formula = Formula(formula)
    if formula is Formula.MF:
        return ber_mf_conditional(budget, d_I)
    if coeffs is None:
        raise ValueError("the finite-resolution formula needs Bussgang coefficients")
    return ber_fr_conditional(budget, coeffs, d_I)


@dataclass(frozen=True)
class AveragedBer:
    ber: float
    stderr: float
    count: int


def average_ber_stats(
    formula: Formula | str,
    budget: LinkBudget,
    samples: InterferenceSampleSet,
    coeffs: BussgangCoefficients | None = None,
    chunk: int = 1 << 18,
) -> AveragedBer:
    """Mean of the conditional BER over the d_I samples, with its standard error.

    Chunks are reduced in a fixed order, so the result does not depend on
    how the work is split.
    """
    if len(samples) == 0:
        raise ValueError("empty sample set")
    x = samples.samples
    total = 0.0
    total_sq = 0.0
    for start in range(0, x.size, chunk):
        p = np.asarray(conditional_ber(formula, budget, x[start : start + chunk], coeffs))
        total += float(np.sum(p))
        total_sq += float(np.sum(p * p))
    n = x.size
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    stderr = float(np.sqrt(var / (n - 1))) if n > 1 else 0.0
    return AveragedBer(mean, stderr, n)


def average_ber(
    formula: Formula | str,
    budget: LinkBudget,
    samples: InterferenceSampleSet,
    coeffs: BussgangCoefficients | None = None,
) -> float:
    return average_ber_stats(formula, budget, samples, coeffs).ber


@dataclass(frozen=True)
class GapReport:
    p0_with: float
    p0_without: float
    p1: float
    p2: float
    p3: float
    in_regime: bool

    def all_positive(self) -> bool:
        return min(self.p1, self.p2, self.p3, self.p0_with, self.p0_without) > 0 and (
            self.p0_with > self.p0_without
        )


def reliable_regime(budget: LinkBudget, coeffs: BussgangCoefficients, d_I: float) -> bool:
    """Both Q arguments positive, i.e. on the convex branch of Q."""
    std = np.sqrt(budget.noise_var + effective_noise_penalty(coeffs))
    return bool((np.sqrt(budget.Es) - abs(d_I)) / std > 0)


def remark_gaps(budget: LinkBudget, coeffs: BussgangCoefficients, d_I: float) -> GapReport:
    """BER gaps between receivers with and without interference.

    p1: quantized receiver, NBI vs none; p2: quantized vs matched filter
    without NBI; p3: matched filter, NBI vs none; p0: quantized minus
    matched filter, with (``p0_with``) and without NBI.
    """
    fr_i = ber_fr_conditional(budget, coeffs, d_I)
    fr_0 = ber_fr_conditional(budget, coeffs, 0.0)
    mf_i = ber_mf_conditional(budget, d_I)
    mf_0 = ber_mf_conditional(budget, 0.0)
    return GapReport(
        p0_with=fr_i - mf_i,
        p0_without=fr_0 - mf_0,
        p1=fr_i - fr_0,
        p2=fr_0 - mf_0,
        p3=mf_i - mf_0,
        in_regime=reliable_regime(budget, coeffs, d_I),
    )


def equivalent_model_sample(
    budget: LinkBudget,
    coeffs: BussgangCoefficients,
    d_k,
    d_I,
    rng: np.random.Generator,
    size=None,
):
    """Draw from the linear model sqrt(Es) d_k + d_I + m, m ~ N(0, N0/2 + sigma^2/alpha^2)."""
    var = budget.noise_var + effective_noise_penalty(coeffs)
    mean = np.sqrt(budget.Es) * np.asarray(d_k, dtype=float) + np.asarray(d_I, dtype=float)
    if size is None:
        size = np.shape(mean)
    out = mean + np.sqrt(var) * rng.standard_normal(size)
    return float(out) if np.ndim(out) == 0 else out
