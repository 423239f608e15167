"""Plain ``key = value`` run configuration files and the built-in presets."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .simulator import ConfigError, SimConfig

REQUIRED_KEYS = ("snr_grid_db", "trials")

PRESETS: dict[str, dict] = {
    "paper-fig1": dict(
        snr_grid_db=tuple(float(s) for s in range(0, 21)),
        sir_db=-10.0,
        receivers=("full", "2-bit", "1-bit"),
        trials=100_000,
        bandwidth_hz=8e9,
        noise_var=0.5,
        carrier_hz=5e9,
        nbi_kind="bpsk",
        pulse_tau_s=0.16e-9,
        quantizer_mode="paper-constants",
        # BER averaged over an ensemble of CM1 realizations, as is usual for CM1 curves
        channel_count=100,
    ),
}
PRESETS["paper-fig2"] = dict(PRESETS["paper-fig1"], sir_db=-15.0)

# file key -> (SimConfig field, converter)
_UNIT = {
    "carrier_ghz": ("carrier_hz", 1e9),
    "symbol_rate_mhz": ("symbol_rate_hz", 1e6),
    "bandwidth_ghz": ("bandwidth_hz", 1e9),
    "sample_rate_ghz": ("sample_rate_hz", 1e9),
    "tau_ns": ("pulse_tau_s", 1e-9),
}
_INT_KEYS = {"trials", "master_seed", "channel_seed", "channel_count", "block_size", "theory_samples", "preamble_samples"}
_STR_KEYS = {"channel_mode", "engine", "quantizer_mode", "distortion_reference", "nbi_kind"}
_FLOAT_KEYS = {"noise_var"}
KNOWN_KEYS = {"preset", "snr_grid_db", "sir_db", "receivers"} | _INT_KEYS | _STR_KEYS | _FLOAT_KEYS | set(_UNIT)


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0, 2, 4"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError("range must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(p) for p in text.replace(",", " ").split())


def _convert(key: str, value: str):
    if key == "snr_grid_db":
        grid = parse_grid(value)
        if not grid:
            raise ValueError("empty grid")
        return "snr_grid_db", grid
    if key == "sir_db":
        return "sir_db", None if value.lower() in ("none", "off", "") else float(value)
    if key == "receivers":
        return "receivers", tuple(v.strip() for v in value.split(",") if v.strip())
    if key in _INT_KEYS:
        return key, int(value, 0)
    if key in _STR_KEYS:
        return key, value
    if key in _FLOAT_KEYS:
        return key, float(value)
    field_name, scale = _UNIT[key]
    return field_name, float(value) * scale


def parse_config_text(text: str, source: str = "<config>", overrides: dict | None = None) -> SimConfig:
    values: dict = {}
    seen: set[str] = set()
    problems: list[str] = []
    preset = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in seen:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        if key == "preset":
            if value not in PRESETS:
                problems.append(f"{source}:{lineno}: unknown preset {value!r} (known: {', '.join(PRESETS)})")
            preset = value
            continue
        try:
            name, converted = _convert(key, value)
        except ValueError as exc:
            problems.append(f"{source}:{lineno}: bad value for {key!r}: {exc}")
            continue
        values[name] = converted
    if preset is None:
        missing = [k for k in REQUIRED_KEYS if k not in seen]
        if missing:
            problems.append(f"{source}: missing required keys: {', '.join(missing)} (or give a preset)")
    if problems:
        raise ConfigError(problems)
    merged = dict(PRESETS.get(preset, {}))
    merged.update(values)
    merged.update(overrides or {})
    try:
        cfg = SimConfig(**merged)
    except ValueError as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    bad = cfg.problems()
    if bad:
        raise ConfigError([f"{source}: {p}" for p in bad])
    return cfg


def parse_config(path, overrides: dict | None = None) -> SimConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path), overrides)


def preset(name: str, **overrides) -> SimConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}"])
    return SimConfig(**{**PRESETS[name], **overrides}).validate()


def dump_config(cfg: SimConfig) -> str:
    """Render ``cfg`` back into the file format (round-trips through parse_config_text)."""
    d = dataclasses.asdict(cfg)
    lines = [
        f"snr_grid_db = {', '.join(repr(s) for s in cfg.snr_grid_db)}",
        f"sir_db = {'none' if cfg.sir_db is None else repr(cfg.sir_db)}",
        f"receivers = {', '.join(r.label for r in cfg.receivers)}",
    ]
    for key in sorted(_INT_KEYS | _STR_KEYS | _FLOAT_KEYS):
        lines.append(f"{key} = {d[key]!r}" if key in _FLOAT_KEYS else f"{key} = {d[key]}")
    for key, (name, scale) in sorted(_UNIT.items()):
        lines.append(f"{key} = {d[name] / scale!r}")
    return "\n".join(lines) + "\n"
