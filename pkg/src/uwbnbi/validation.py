"""Self-check suites behind ``uwbnbi validate``."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .analytics import LinkBudget, ber_mf_conditional, q_function
from .quantizer import (
    PAPER_CONSTANTS,
    QuantizerDesign,
    _centroids,
    bussgang_coefficients,
    design_lloyd_max,
    paper_constants,
    quantize,
)
from .receiver import ONE_BIT
from .simulator import SimConfig, run_sweep


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def _run(checks: Iterable[tuple[str, Callable[[], tuple[bool, str]]]]) -> list[Check]:
    out = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check, never an aborted suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail))
    return out


# -- quantizer -----------------------------------------------------------------

def quantizer_suite(samples: int = 200_000, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(samples)

    def one_bit_levels():
        d = design_lloyd_max(2)
        err = float(np.max(np.abs(np.abs(d.levels) - math.sqrt(2 / math.pi))))
        return err < 1e-8, f"max error {err:.2e}"

    def lloyd_conditions():
        worst = 0.0
        for L in (2, 3, 4, 8):
            d = design_lloyd_max(L)
            mid = 0.5 * (d.levels[:-1] + d.levels[1:])
            worst = max(worst, float(np.max(np.abs(mid - d.thresholds))))
            edges = np.concatenate([[-np.inf], d.thresholds, [np.inf]])
            worst = max(worst, float(np.max(np.abs(_centroids(edges) - d.levels))))
        return worst < 1e-10, f"max residual {worst:.2e}"

    def stationarity():
        for L in (2, 3, 4):
            d = design_lloyd_max(L)
            base = d.mse()
            for i in range(L):
                for h in (-1e-3, 1e-3):
                    lv = d.levels.copy()
                    lv[i] += h
                    try:
                        if QuantizerDesign(lv, d.thresholds).mse() <= base:
                            return False, f"L={L} level {i} {h:+g} did not increase MSE"
                    except ValueError:
                        pass  # perturbation broke interleaving; not a valid design
            for j in range(L - 1):
                for h in (-1e-3, 1e-3):
                    th = d.thresholds.copy()
                    th[j] += h
                    if QuantizerDesign(d.levels, th).mse() <= base:
                        return False, f"L={L} threshold {j} {h:+g} did not increase MSE"
        return True, "every +-1e-3 level or threshold perturbation raises the MSE"

    def computed_one_bit():
        c = bussgang_coefficients(design_lloyd_max(2))
        ea = abs(c.alpha - 2 / math.pi)
        es = abs(c.sigma_sq - (2 / math.pi - 4 / math.pi**2))
        return max(ea, es) < 1e-6, f"alpha err {ea:.1e}, sigma^2 err {es:.1e}"

    def tabulated():
        ok = all(
            (paper_constants(L).alpha, paper_constants(L).sigma_sq) == v for L, v in PAPER_CONSTANTS.items()
        )
        return ok, "paper-constants mode returns the table verbatim"

    def penalty_monotone():
        p = [bussgang_coefficients(design_lloyd_max(L)).penalty for L in (2, 3, 4)]
        return p[0] > p[1] > p[2], f"penalties {np.round(p, 5).tolist()}"

    def orthogonality():
        d = design_lloyd_max(2)
        c = bussgang_coefficients(d)
        v = quantize(d, x) - c.alpha * x
        prod = v * x
        m, se = prod.mean(), prod.std(ddof=1) / math.sqrt(prod.size)
        return abs(m) < 3 * se, f"E[v r] = {m:.2e} (stderr {se:.1e})"

    def decomposition():
        worst = 0.0
        for L in (2, 3):
            d = design_lloyd_max(L)
            c = bussgang_coefficients(d)
            q = quantize(d, x)
            lhs = float(np.mean(q**2))
            rhs = c.alpha**2 * float(np.mean(x**2)) + c.sigma_sq
            worst = max(worst, abs(lhs - rhs))
        tol = 5.0 / math.sqrt(samples)
        return worst < tol, f"max |E Q^2 - (alpha^2 E r^2 + sigma^2)| = {worst:.2e} (tol {tol:.1e})"

    return _run(
        [
            ("1-bit levels are +-sqrt(2/pi)", one_bit_levels),
            ("Lloyd midpoint and centroid conditions", lloyd_conditions),
            ("Lloyd stationarity", stationarity),
            ("computed 1-bit Bussgang pair", computed_one_bit),
            ("tabulated constants", tabulated),
            ("penalty decreases with levels", penalty_monotone),
            ("Bussgang orthogonality", orthogonality),
            ("variance decomposition", decomposition),
        ]
    )


# -- analytics -----------------------------------------------------------------

def analytics_suite(coefficient_pairs: dict[str, tuple[float, float]] | None = None) -> list[Check]:
    """Invariant checks on raw (alpha, sigma^2) pairs.

    The pairs are used without the constructor guards so that a broken
    pair (e.g. negative sigma^2) shows up as failed invariants.
    """
    pairs = coefficient_pairs or {"1-bit": PAPER_CONSTANTS[2], "2-bit": PAPER_CONSTANTS[3]}
    penalties = {k: s / a**2 for k, (a, s) in pairs.items()}
    snrs = np.linspace(8.0, 16.0, 10)

    def fr(budget, pen, d):
        std = math.sqrt(budget.noise_var + pen)
        return 0.5 * (q_function((math.sqrt(budget.Es) + d) / std) + q_function((math.sqrt(budget.Es) - d) / std))

    def q_values():
        ok = q_function(0.0) == 0.5 and abs(q_function(4.7534) - 1e-6) < 1e-8 and q_function(40.0) < 1e-300
        return ok, f"Q(0)={q_function(0.0)}, Q(4.7534)={q_function(4.7534):.4e}"

    def penalties_nonnegative():
        bad = {k: p for k, p in penalties.items() if not p >= 0}
        return not bad, f"penalties {penalties}"

    def gap_chain():
        n = 0
        for name, pen in penalties.items():
            for snr in snrs:
                b = LinkBudget.from_snr_db(snr)
                for frac in np.linspace(0.02, 0.5, 10):
                    d = frac * math.sqrt(b.Es)
                    p1 = fr(b, pen, d) - fr(b, pen, 0.0)
                    p2 = fr(b, pen, 0.0) - ber_mf_conditional(b, 0.0)
                    p3 = ber_mf_conditional(b, d) - ber_mf_conditional(b, 0.0)
                    p0w = fr(b, pen, d) - ber_mf_conditional(b, d)
                    if not (p1 > 0 and p2 > 0 and p3 > 0 and p0w > p2):
                        return False, f"{name} fails at SNR {snr:.2f} dB, d_I={d:.3f}"
                    n += 1
        return True, f"{n} grid points"

    def p0_monotone():
        pens = sorted(penalties.values())
        for snr in snrs:
            b = LinkBudget.from_snr_db(snr)
            d = 0.2 * math.sqrt(b.Es)
            vals = [fr(b, p, d) - ber_mf_conditional(b, d) for p in pens]
            if any(v1 <= v0 for v0, v1 in zip(vals, vals[1:])) and len(set(pens)) == len(pens):
                return False, f"P0 not increasing in the penalty at SNR {snr:.2f} dB"
        return True, "P0 grows with sigma^2/alpha^2"

    def jensen():
        b = LinkBudget.from_snr_db(12.0)
        d = np.linspace(-0.4, 0.4, 101) * math.sqrt(b.Es)
        avg = float(np.mean(ber_mf_conditional(b, d)))
        return avg >= ber_mf_conditional(b, 0.0), f"avg {avg:.3e} vs {ber_mf_conditional(b, 0.0):.3e}"

    return _run(
        [
            ("Q function reference values", q_values),
            ("penalties are non-negative", penalties_nonnegative),
            ("P1, P2, P3 > 0 and P0(d_I) > P0(0)", gap_chain),
            ("P0 increases with the penalty", p0_monotone),
            ("Jensen bound for symmetric d_I", jensen),
        ]
    )


# -- engine equivalence ----------------------------------------------------------

def engine_equivalence_suite(snr_db: float = 8.0, trials: int = 100_000, seed: int = 0, workers: int = 1) -> list[Check]:
    """Waveform chain vs the equivalent linear model for the 1-bit receiver."""
    base = SimConfig(
        snr_grid_db=(snr_db,),
        receivers=(ONE_BIT,),
        trials=trials,
        master_seed=seed,
        quantizer_mode="computed",
        distortion_reference="input",
    )
    results = {}

    def run(engine):
        if engine not in results:
            results[engine] = run_sweep(dataclasses.replace(base, engine=engine), workers=workers, theory=False)
        return results[engine]

    def overlap():
        a = run("waveform").points[0]
        b = run("equivalent-model").points[0]
        ok = a.ci_low <= b.ci_high and b.ci_low <= a.ci_high
        return ok, f"waveform {a.ber:.4e} [{a.ci_low:.4e}, {a.ci_high:.4e}] vs model {b.ber:.4e} [{b.ci_low:.4e}, {b.ci_high:.4e}]"

    return _run([(f"1-bit BER CIs overlap at {snr_db:g} dB", overlap)])


SUITES = {
    "quantizer": quantizer_suite,
    "analytics": analytics_suite,
    "engine-equivalence": engine_equivalence_suite,
}
