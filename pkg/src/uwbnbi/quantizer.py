"""Minimum-MSE scalar quantizers for Gaussian input and their Bussgang gain/distortion."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

MAX_SWEEPS = 100_000

# Tabulated (alpha, sigma^2) keyed by level count; 2-bit means 3 levels here.
PAPER_CONSTANTS = {2: (0.7979, 0.23), 3: (0.8829, 0.11)}


class QuantizerError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def levels_for_bits(bits: int) -> int:
    """ADC bits -> level count; 1 bit is 2 levels, 2 bits is the 3-level quantizer."""
    if bits == 1:
        return 2
    if bits == 2:
        return 3
    raise QuantizerError(f"only 1- and 2-bit receivers are defined, got {bits}")


@dataclass(frozen=True)
class QuantizerDesign:
    levels: np.ndarray
    thresholds: np.ndarray
    input_std: float = 1.0
    sweeps: int = 0

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        thresholds = np.asarray(self.thresholds, dtype=float)
        if levels.size < 2 or thresholds.size != levels.size - 1:
            raise QuantizerError("need L >= 2 levels and L - 1 thresholds")
        if not (np.all(levels[:-1] < thresholds) and np.all(thresholds < levels[1:])):
            raise QuantizerError("levels and thresholds must interleave")
        levels.setflags(write=False)
        thresholds.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def level_count(self) -> int:
        return self.levels.size

    def scaled(self, factor: float) -> QuantizerDesign:
        return QuantizerDesign(self.levels * factor, self.thresholds * factor, self.input_std * factor, self.sweeps)

    def mse(self, input_std: float | None = None) -> float:
        """Mean-squared error against N(0, input_std^2), in closed form."""
        s = self.input_std if input_std is None else input_std
        edges = np.concatenate([[-np.inf], self.thresholds / s, [np.inf]])
        r = self.levels / s
        p = ndtr(edges[1:]) - ndtr(edges[:-1])
        m1 = _phi(edges[:-1]) - _phi(edges[1:])
        m2 = p + _xphi(edges[:-1]) - _xphi(edges[1:])
        return float(s**2 * np.sum(m2 - 2 * r * m1 + r**2 * p))


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def _xphi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    finite = np.isfinite(x)
    out[finite] = x[finite] * _phi(x[finite])
    return out


def _cell_mass(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # subtract in whichever tail keeps precision
    upper = lo >= 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def _centroids(edges: np.ndarray) -> np.ndarray:
    lo, hi = edges[:-1], edges[1:]
    return (_phi(lo) - _phi(hi)) / _cell_mass(lo, hi)


def design_lloyd_max(
    level_count: int, input_std: float = 1.0, tol: float = 1e-14, level_tol: float = 1e-11
) -> QuantizerDesign:
    """Lloyd iteration for a zero-mean Gaussian source.

    Starts from quantiles of N(0, 3) (the high-resolution optimal point
    density f^(1/3) of a Gaussian) and alternates centroid/midpoint updates
    until the MSE changes by less than ``tol`` and no level moves by more
    than ``level_tol`` between sweeps.
    """
    if level_count < 2:
        raise QuantizerError(f"level_count must be >= 2, got {level_count}")
    if not input_std > 0:
        raise QuantizerError("input_std must be > 0")
    L = level_count
    thresholds = np.sqrt(3.0) * ndtri(np.arange(1, L) / L)
    prev = np.inf
    for sweep in range(1, MAX_SWEEPS + 1):
        edges = np.concatenate([[-np.inf], thresholds, [np.inf]])
        new = _centroids(edges)
        # the density is even, so enforce exact symmetry against rounding drift
        new = 0.5 * (new - new[::-1])
        step = np.inf if sweep == 1 else np.max(np.abs(new - levels))
        levels = new
        thresholds = 0.5 * (levels[:-1] + levels[1:])
        mse = QuantizerDesign(levels, thresholds).mse()
        if abs(prev - mse) < tol and step < level_tol:
            break
        prev = mse
    else:
        raise ConvergenceError(f"Lloyd iteration did not converge in {MAX_SWEEPS} sweeps (L={L})")
    return QuantizerDesign(levels, thresholds, 1.0, sweep).scaled(input_std)


def quantize(design: QuantizerDesign, x):
    """Level of the half-open cell [q_{i-1}, q_i) containing x (scalar or array)."""
    idx = np.searchsorted(design.thresholds, x, side="right")
    out = design.levels[idx]
    return float(out) if np.ndim(out) == 0 else out


class CoefficientMode(enum.Enum):
    COMPUTED = "computed"
    PAPER_CONSTANTS = "paper-constants"


@dataclass(frozen=True)
class BussgangCoefficients:
    alpha: float
    sigma_sq: float
    mode: CoefficientMode = CoefficientMode.COMPUTED

    def __post_init__(self):
        if not self.alpha > 0:
            raise QuantizerError(f"alpha must be > 0, got {self.alpha}")
        if not self.sigma_sq >= 0:
            raise QuantizerError(f"sigma_sq must be >= 0, got {self.sigma_sq}")

    @property
    def penalty(self) -> float:
        return effective_noise_penalty(self)

    def at_input_variance(self, variance: float) -> BussgangCoefficients:
        """Coefficients of the same quantizer driven by an AGC-scaled input of ``variance``.

        The gain is unchanged and the distortion scales with the input power.
        """
        return BussgangCoefficients(self.alpha, self.sigma_sq * variance, self.mode)


def bussgang_coefficients(design: QuantizerDesign, input_std: float | None = None) -> BussgangCoefficients:
    """alpha = E{Q(r) r}/E{r^2}, sigma^2 = E{Q(r)^2} - alpha^2 E{r^2} for r ~ N(0, input_std^2)."""
    s = design.input_std if input_std is None else input_std
    if not s > 0:
        raise QuantizerError("input_std must be > 0")
    if np.ptp(design.levels) == 0:
        raise QuantizerError("degenerate design: all levels equal")
    z = design.thresholds / s
    # jump form: each step of height (r_{i+1} - r_i) at q_i weighted by the density there
    alpha = float(np.sum(np.diff(design.levels) * _phi(z)) / s)
    edges = np.concatenate([[-np.inf], z, [np.inf]])
    p = _cell_mass(edges[:-1], edges[1:])
    second = float(np.sum(design.levels**2 * p))
    return BussgangCoefficients(alpha, max(second - alpha**2 * s**2, 0.0))


def paper_constants(level_count: int) -> BussgangCoefficients:
    try:
        alpha, sigma_sq = PAPER_CONSTANTS[level_count]
    except KeyError:
        raise QuantizerError(f"no tabulated constants for {level_count} levels") from None
    return BussgangCoefficients(alpha, sigma_sq, CoefficientMode.PAPER_CONSTANTS)


def coefficients_for(level_count: int, mode: CoefficientMode | str) -> BussgangCoefficients:
    mode = CoefficientMode(mode)
    if mode is CoefficientMode.PAPER_CONSTANTS:
        return paper_constants(level_count)
    return bussgang_coefficients(design_lloyd_max(level_count))


def effective_noise_penalty(coeffs: BussgangCoefficients) -> float:
    """Extra noise variance sigma^2 / alpha^2 seen after dividing out the gain."""
    return coeffs.sigma_sq / coeffs.alpha**2
