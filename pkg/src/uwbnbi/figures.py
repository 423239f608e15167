"""Regenerate the BER-vs-SNR figure data and the dB gaps read off it."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .config import preset
from .simulator import (
    BerCurve,
    BerPoint,
    SimConfig,
    SweepResult,
    curves_from_points,
    interference_samples,
    manifest,
    run_sweep,
    theory_points,
    write_csv,
)

FIGURES = {"fig1": -10.0, "fig2": -15.0}
THEORY_GRID = tuple(round(0.1 * i, 1) for i in range(0, 301))
MC_MIN_BER = 1e-4


def snr_at_ber(snr_db, ber, target: float) -> float:
    """SNR where a decreasing BER curve crosses ``target`` (linear in log10 BER).

    Returns nan when the curve never reaches the target.
    """
    snr = np.asarray(snr_db, dtype=float)
    lb = np.log10(np.clip(np.asarray(ber, dtype=float), 1e-300, None))
    lt = math.log10(target)
    below = np.nonzero(lb <= lt)[0]
    if below.size == 0:
        return float("nan")
    j = below[0]
    if j == 0:
        return float(snr[0]) if lb[0] == lt else float("nan")
    x0, x1, y0, y1 = snr[j - 1], snr[j], lb[j - 1], lb[j]
    return float(x0 + (lt - y0) * (x1 - x0) / (y1 - y0))


def gap_db(reference: BerCurve, other: BerCurve, target: float) -> float:
    return snr_at_ber(other.snr_db, other.ber, target) - snr_at_ber(reference.snr_db, reference.ber, target)


def figure_config(figure: str, **overrides) -> SimConfig:
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; expected one of {sorted(FIGURES)}")
    return preset("paper-fig1" if figure == "fig1" else "paper-fig2", **overrides)


def theory_curves(config: SimConfig, snr_grid=THEORY_GRID) -> tuple[list[BerPoint], list[BerPoint]]:
    """(with NBI, without NBI) theory points on ``snr_grid``."""
    with_nbi = theory_points(config, snr_grid, interference_samples(config))
    clean = dataclasses.replace(config, sir_db=None)
    without = theory_points(clean, snr_grid)
    return with_nbi, without


def summarize(with_nbi: list[BerPoint], without: list[BerPoint]) -> dict:
    by = {(c.receiver, c.sir_db is not None): c for c in curves_from_points(with_nbi + without)}
    out = {"no_nbi_gap_db_at_1e-5": {}, "nbi_loss_db_at_1e-6": {}, "snr_db_at_1e-6": {}}
    full = by[("full", False)]
    for (receiver, nbi), curve in sorted(by.items()):
        if not nbi and receiver != "full":
            out["no_nbi_gap_db_at_1e-5"][f"{receiver}_vs_full"] = _finite(gap_db(full, curve, 1e-5))
        if nbi:
            out["nbi_loss_db_at_1e-6"][receiver] = _finite(gap_db(by[(receiver, False)], curve, 1e-6))
        out["snr_db_at_1e-6"][f"{receiver}{'_nbi' if nbi else ''}"] = _finite(snr_at_ber(curve.snr_db, curve.ber, 1e-6))
    return out


def _finite(x: float):
    return None if math.isnan(x) else round(x, 4)


def reproduce(
    figure: str,
    out_dir,
    trials: int = 20_000,
    theory_samples: int = 1_000_000,
    master_seed: int = 0,
    workers: int = 1,
    mc_grid=tuple(float(s) for s in range(0, 21)),
    **overrides,
) -> dict:
    """Write theory and Monte Carlo curves plus a gap summary for one figure.

    Monte Carlo runs only where the theory BER is at least 1e-4; deeper
    points come from the closed forms. ``trials=0`` skips Monte Carlo.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = figure_config(figure, theory_samples=theory_samples, master_seed=master_seed, trials=max(trials, 1), **overrides)
    with_nbi, without = theory_curves(cfg)
    mc_points: list[BerPoint] = []
    wall = 0.0
    if trials > 0:
        for sub, theory in ((cfg, with_nbi), (dataclasses.replace(cfg, sir_db=None), without)):
            grid = _mc_grid(theory, mc_grid)
            if not grid:
                continue
            # one block per channel realization keeps the ensemble evenly weighted
            block = max(1, -(-trials // sub.channel_count))
            res = run_sweep(dataclasses.replace(sub, snr_grid_db=grid, block_size=block), workers=workers, theory=False)
            mc_points += res.points
            wall += res.wall_time
    summary = summarize(with_nbi, without)
    summary["figure"] = figure
    summary["sir_db"] = cfg.sir_db
    write_csv(without + with_nbi + mc_points, out / f"{figure}.csv")
    (out / f"{figure}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    m = manifest(SweepResult(cfg, [], {}, wall), f"reproduce {figure}", {"mc_trials": trials, "mc_grid": list(mc_grid)})
    (out / f"{figure}_manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    return summary


def _mc_grid(theory: list[BerPoint], mc_grid) -> tuple[float, ...]:
    """MC grid points where every receiver's theory BER is at least MC_MIN_BER."""
    best: dict[float, float] = {}
    for p in theory:
        best[p.snr_db] = min(best.get(p.snr_db, 1.0), p.ber)
    keep = []
    for s in mc_grid:
        nearest = min(best, key=lambda k: abs(k - s))
        if best[nearest] >= MC_MIN_BER:
            keep.append(float(s))
    return tuple(keep)
