"""Command-line entry point: ``uwbnbi <verb> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .analytics import LinkBudget
from .config import PRESETS, parse_config, parse_grid, preset
from .figures import FIGURES, reproduce
from .quantizer import CoefficientMode, bussgang_coefficients, coefficients_for, design_lloyd_max, levels_for_bits
from .simulator import ConfigError, SimConfig, _links, interference_samples, manifest, run_sweep, theory_ber, write_csv
from .validation import SUITES

SEED_ENV = "UWBNBI_SEED"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return None


def _load_config(args) -> SimConfig:
    overrides = {}
    seed = _seed(args)
    if seed is not None:
        overrides["master_seed"] = seed
    for flag, key in (("trials", "trials"), ("engine", "engine"), ("quantizer_mode", "quantizer_mode")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "sir", None) is not None:
        overrides["sir_db"] = None if args.sir.lower() == "none" else float(args.sir)
    if getattr(args, "snr_grid", None):
        overrides["snr_grid_db"] = parse_grid(args.snr_grid)
    if args.config and args.preset:
        raise UsageError("give --config or --preset, not both")
    if args.config:
        return parse_config(args.config, overrides)
    if args.preset:
        return preset(args.preset, **overrides)
    return SimConfig(**overrides).validate()


def cmd_design_quantizer(args) -> int:
    if args.levels is None and args.bits is None:
        raise UsageError("give --levels or --bits")
    levels = args.levels if args.levels is not None else levels_for_bits(args.bits)
    design = design_lloyd_max(levels)
    coeffs = coefficients_for(levels, args.quantizer_mode) if args.quantizer_mode else bussgang_coefficients(design)
    out = {
        "levels": levels,
        "mode": coeffs.mode.value,
        "output_levels": design.levels.tolist(),
        "thresholds": design.thresholds.tolist(),
        "mse": design.mse(),
        "alpha": coeffs.alpha,
        "sigma_sq": coeffs.sigma_sq,
        "penalty": coeffs.penalty,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_theory(args) -> int:
    cfg = _load_config(args)
    links = _links(cfg)
    samples = interference_samples(cfg) if cfg.sir_db is not None else None
    rows = ["snr_db,sir_db,receiver,penalty,ber,stderr"]
    for snr in cfg.snr_grid_db:
        budget = cfg.budget(snr)
        for r in cfg.receivers:
            avg = theory_ber(cfg, links, budget, r, samples)
            pen = 0.0 if r.is_full else links[0].coefficients(r).penalty
            sir = "" if cfg.sir_db is None else repr(cfg.sir_db)
            rows.append(f"{snr!r},{sir},{r.label},{pen!r},{avg.ber!r},{avg.stderr!r}")
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    result = run_sweep(cfg, workers=args.workers, theory=not args.no_theory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(result.points, out / "ber.csv")
    m = manifest(result, "simulate", {"workers": args.workers})
    (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    (out / "config.txt").write_text(_dump(cfg))
    logging.getLogger(__name__).info("wrote %s", out / "ber.csv")
    return EXIT_OK


def _dump(cfg: SimConfig) -> str:
    from .config import dump_config

    return dump_config(cfg)


def cmd_reproduce(args) -> int:
    seed = _seed(args) or 0
    summary = reproduce(
        args.figure,
        args.out,
        trials=args.trials if args.trials is not None else 20_000,
        theory_samples=args.theory_samples,
        master_seed=seed,
        workers=args.workers,
    )
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    kwargs = {}
    if args.suite == "engine-equivalence":
        kwargs = {"trials": args.trials or 100_000, "snr_db": args.snr, "workers": args.workers}
    elif args.suite == "analytics" and args.inject_fault:
        kwargs = {"coefficient_pairs": {"1-bit": (0.7979, -0.23), "2-bit": (0.8829, 0.11)}}
    checks = SUITES[args.suite](**kwargs)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uwbnbi", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def run_options(sp, trials=True):
        sp.add_argument("--config", type=Path, help="key = value run file")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--seed", type=lambda s: int(s, 0), help=f"master seed (env {SEED_ENV})")
        if trials:
            sp.add_argument("--trials", type=int)
        sp.add_argument("--engine", choices=["waveform", "equivalent-model"])
        sp.add_argument("--quantizer-mode", choices=[m.value for m in CoefficientMode])
        sp.add_argument("--sir", help="SIR in dB, or 'none'")
        sp.add_argument("--snr-grid", help="'0,2,4' or 'start:stop:step'")

    dq = sub.add_parser("design-quantizer", help="Lloyd-Max design and Bussgang coefficients as JSON")
    g = dq.add_mutually_exclusive_group()
    g.add_argument("--levels", type=int)
    g.add_argument("--bits", type=int, choices=[1, 2])
    dq.add_argument("--quantizer-mode", choices=[m.value for m in CoefficientMode])
    dq.set_defaults(func=cmd_design_quantizer)

    th = sub.add_parser("theory", help="averaged closed-form BER as CSV")
    run_options(th)
    th.add_argument("--out", type=Path)
    th.set_defaults(func=cmd_theory)

    sim = sub.add_parser("simulate", help="Monte Carlo sweep")
    run_options(sim)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--no-theory", action="store_true", help="omit theory rows from the CSV")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("reproduce", help="figure curves and dB-gap summary")
    rep.add_argument("figure", choices=sorted(FIGURES))
    rep.add_argument("--out", type=Path, required=True)
    rep.add_argument("--seed", type=lambda s: int(s, 0))
    rep.add_argument("--trials", type=int, help="MC trials per point (0 = theory only)")
    rep.add_argument("--theory-samples", type=int, default=1_000_000)
    rep.add_argument("--workers", type=int, default=1)
    rep.set_defaults(func=cmd_reproduce)

    val = sub.add_parser("validate", help="run an invariant suite")
    val.add_argument("suite", choices=sorted(SUITES))
    val.add_argument("--trials", type=int)
    val.add_argument("--snr", type=float, default=8.0)
    val.add_argument("--workers", type=int, default=1)
    val.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ConfigError):
            for problem in exc.problems:
                print(f"  {problem}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
