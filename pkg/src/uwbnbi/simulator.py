"""Monte Carlo BER engine: full waveform chain and the equivalent linear model."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import __version__
from .analytics import AveragedBer, InterferenceSampleSet, LinkBudget, average_ber_stats
from .channel import (
    ChannelRealization,
    Cm1Params,
    LowPassFilterSpec,
    composite_reference,
    generate_cm1,
    lowpass_rows,
    lowpass_taps,
)
from .interference import NbiKind, NbiSpec, ProjectionSampler, interference_power
from .quantizer import (
    BussgangCoefficients,
    CoefficientMode,
    bussgang_coefficients,
    coefficients_for,
    design_lloyd_max,
)
from .receiver import FULL, ONE_BIT, TWO_BIT, ReceiverKind, decimation_factor, quantize
from .waveform import PulseSpec, SampledWaveform, generate_pulse

log = logging.getLogger(__name__)

Z95 = 1.959963984540054

# first element of every spawn key, so the streams of different jobs never collide
_TRIALS, _PREAMBLE, _CHANNEL, _THEORY = 0, 1, 2, 3

CSV_COLUMNS = ("snr_db", "sir_db", "receiver", "source", "ber", "ci_low", "ci_high", "trials", "seed")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class SimConfig:
    snr_grid_db: tuple[float, ...] = tuple(float(s) for s in range(0, 21))
    sir_db: float | None = None
    receivers: tuple[ReceiverKind, ...] = (FULL, TWO_BIT, ONE_BIT)
    trials: int = 100_000
    master_seed: int = 0
    channel_mode: str = "cm1"  # "cm1" or "ideal"
    channel_seed: int = 42
    channel_count: int = 1  # > 1 cycles through an ensemble of realizations
    engine: str = "waveform"  # "waveform" or "equivalent-model"
    quantizer_mode: str = "paper-constants"
    # "unit": tabulated sigma^2/alpha^2 added as is; "input": scaled by the quantizer input power
    distortion_reference: str = "unit"
    nbi_kind: str = "bpsk"
    carrier_hz: float = 5e9
    symbol_rate_hz: float = 10e6
    bandwidth_hz: float = 8e9
    sample_rate_hz: float = 64e9
    pulse_tau_s: float = 0.16e-9
    noise_var: float = 0.5  # N0/2
    block_size: int = 500
    theory_samples: int = 100_000
    preamble_samples: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(
            self,
            "receivers",
            tuple(r if isinstance(r, ReceiverKind) else ReceiverKind.parse(r) for r in self.receivers),
        )

    def problems(self) -> list[str]:
        p = []
        if not self.snr_grid_db:
            p.append("snr_grid_db must not be empty")
        if not all(math.isfinite(s) for s in self.snr_grid_db):
            p.append("snr_grid_db values must be finite")
        if self.sir_db is not None and not math.isfinite(self.sir_db):
            p.append("sir_db must be finite")
        if not self.receivers:
            p.append("receivers must not be empty")
        if self.trials <= 0:
            p.append("trials must be > 0")
        if not 0 <= self.master_seed < 2**64:
            p.append("master_seed must be an unsigned 64-bit integer")
        if self.channel_mode not in ("cm1", "ideal"):
            p.append(f"channel_mode must be cm1 or ideal, got {self.channel_mode!r}")
        if self.channel_count < 1:
            p.append("channel_count must be >= 1")
        if self.engine not in ("waveform", "equivalent-model"):
            p.append(f"engine must be waveform or equivalent-model, got {self.engine!r}")
        if self.quantizer_mode not in ("computed", "paper-constants"):
            p.append(f"quantizer_mode must be computed or paper-constants, got {self.quantizer_mode!r}")
        if self.distortion_reference not in ("unit", "input"):
            p.append("distortion_reference must be unit or input")
        if self.nbi_kind not in ("bpsk", "tone"):
            p.append(f"nbi_kind must be bpsk or tone, got {self.nbi_kind!r}")
        if self.quantizer_mode == "paper-constants":
            bad = [r.label for r in self.receivers if r.levels not in (None, 2, 3)]
            if bad:
                p.append(f"tabulated constants exist only for 1-bit and 2-bit receivers, not {bad}")
        for name in ("carrier_hz", "symbol_rate_hz", "bandwidth_hz", "sample_rate_hz", "pulse_tau_s", "noise_var"):
            if not getattr(self, name) > 0:
                p.append(f"{name} must be > 0")
        if self.sample_rate_hz > 0 and self.bandwidth_hz > 0:
            m = self.sample_rate_hz / (2 * self.bandwidth_hz)
            if m < 1 or abs(m - round(m)) > 1e-9:
                p.append("sample_rate_hz must be an integer multiple of 2*bandwidth_hz")
        if self.pulse_tau_s > 0 and self.sample_rate_hz < 4 / self.pulse_tau_s:
            p.append("sample_rate_hz must be >= 4/pulse_tau_s")
        if self.carrier_hz >= self.sample_rate_hz / 2:
            p.append("carrier_hz must be below half the sample rate")
        if self.block_size <= 0 or self.theory_samples <= 0 or self.preamble_samples <= 0:
            p.append("block_size, theory_samples and preamble_samples must be > 0")
        return p

    def validate(self) -> SimConfig:
        p = self.problems()
        if p:
            raise ConfigError(p)
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["receivers"] = [r.label for r in self.receivers]
        d["snr_grid_db"] = list(self.snr_grid_db)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @property
    def N0(self) -> float:
        return 2.0 * self.noise_var

    def budget(self, snr_db: float) -> LinkBudget:
        return LinkBudget.from_snr_db(snr_db, self.N0)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (master_seed, *key); independent of scheduling."""
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def estimate_ber(errors: int, trials: int, z: float = Z95) -> tuple[float, float, float]:
    """Point estimate and Wilson score interval."""
    if trials <= 0 or not 0 <= errors <= trials:
        raise ValueError(f"need 0 <= errors <= trials and trials > 0, got {errors}/{trials}")
    p = errors / trials
    z2n = z * z / trials
    center = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials))
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return p, min(lo, p), max(hi, p)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    sir_db: float | None
    receiver: str
    source: str  # "theory" or "mc"
    ber: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    errors: int | None = None

    def row(self) -> list[str]:
        sir = "" if self.sir_db is None else repr(float(self.sir_db))
        return [
            repr(float(self.snr_db)), sir, self.receiver, self.source,
            repr(float(self.ber)), repr(float(self.ci_low)), repr(float(self.ci_high)),
            str(self.trials), str(self.seed),
        ]


@dataclass
class BerCurve:
    receiver: str
    sir_db: float | None
    source: str
    points: list[BerPoint] = field(default_factory=list)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


def curves_from_points(points: list[BerPoint]) -> list[BerCurve]:
    curves: dict[tuple, BerCurve] = {}
    for p in points:
        key = (p.receiver, p.sir_db, p.source)
        curves.setdefault(key, BerCurve(p.receiver, p.sir_db, p.source)).points.append(p)
    return list(curves.values())


def write_csv(points: list[BerPoint], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in points:
        writer.writerow(p.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path) -> list[BerPoint]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                BerPoint(
                    float(row["snr_db"]),
                    float(row["sir_db"]) if row["sir_db"] else None,
                    row["receiver"],
                    row["source"],
                    float(row["ber"]),
                    float(row["ci_low"]),
                    float(row["ci_high"]),
                    int(row["trials"]),
                    int(row["seed"]),
                )
            )
    return out


class Link:
    """Everything about one channel realization the trials need, built once.

    The template is laid out on [0, T) with T its full duration, so each
    symbol sees no ISI by construction.
    """

    def __init__(self, config: SimConfig, channel: ChannelRealization):
        self.config = config
        self.channel = channel
        self.lpf = LowPassFilterSpec(bandwidth=config.bandwidth_hz)
        fs = config.sample_rate_hz
        pulse = generate_pulse(PulseSpec(tau=config.pulse_tau_s), fs)
        w = composite_reference(pulse, channel, self.lpf)
        self.template = w.shifted(-w.start_time)
        self.dt = self.template.sample_interval
        self.T = len(self.template) * self.dt
        self.decimation = decimation_factor(fs, 2 * config.bandwidth_hz)
        self.Ts = self.dt * self.decimation
        self.designs = {r: design_lloyd_max(r.levels) for r in config.receivers if not r.is_full}
        self.unit_coeffs = {r: bussgang_coefficients(d) for r, d in self.designs.items()}
        self.nbi = NbiSpec(
            kind=NbiKind(config.nbi_kind),
            carrier_freq=config.carrier_hz,
            symbol_rate=config.symbol_rate_hz,
            power=1.0,
        )
        # the zero-phase receive filter only rescales a carrier by |H(fc)|
        taps = lowpass_taps(self.lpf, fs)
        k = np.arange(taps.size) - taps.size // 2
        gain = float(np.abs(np.sum(taps * np.exp(-2j * np.pi * config.carrier_hz * k * self.dt))))
        self.sampler = ProjectionSampler(self.template, self.nbi, filter_gain=gain)

    @cached_property
    def template_nyquist(self) -> np.ndarray:
        return self.template.samples[:: self.decimation]

    def nbi_power(self, budget: LinkBudget, sir_db: float | None) -> float:
        """Interference power so that Es over interference energy per symbol is the SIR."""
        if sir_db is None:
            return 0.0
        return interference_power(budget.Es, sir_db, self.T)

    def expected_input_variance(self, budget: LinkBudget, sir_db: float | None) -> float:
        """Mean quantizer input power per Nyquist sample, times Ts (statistic units)."""
        noise = self.config.noise_var  # N0 B Ts with Ts = 1/(2B)
        signal = budget.Es * float(np.mean(self.template_nyquist**2)) * self.Ts
        return noise + signal + self.nbi_power(budget, sir_db) * self.Ts

    def coefficients(self, receiver: ReceiverKind, reference: float = 1.0) -> BussgangCoefficients:
        c = coefficients_for(receiver.levels, self.config.quantizer_mode)
        return c.at_input_variance(reference)

    # -- waveform synthesis -------------------------------------------------

    def received_rows(self, budget: LinkBudget, sir_db: float | None, symbols: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One received record per row: signal + filtered (noise + NBI) on [0, T)."""
        n = symbols.size
        N = len(self.template)
        half = self.lpf.kernel_length // 2
        n_ext = N + 2 * half
        fs = self.config.sample_rate_hz
        x = rng.standard_normal((n, n_ext)) * math.sqrt(self.config.noise_var * fs)
        p_i = self.nbi_power(budget, sir_db)
        if p_i > 0:
            x += self._nbi_rows(n, n_ext, half, p_i, rng)
        x = lowpass_rows(x, self.lpf, fs)[:, half : half + N]
        x += math.sqrt(budget.Es) * symbols[:, None] * self.template.samples[None, :]
        return x

    def _nbi_rows(self, n, n_ext, half, power, rng) -> np.ndarray:
        t = (np.arange(n_ext) - half) * self.dt
        amp = math.sqrt(2.0 * power)
        phase = rng.uniform(0.0, 2 * np.pi, size=n)
        out = amp * np.cos(2 * np.pi * self.nbi.carrier_freq * t[None, :] + phase[:, None])
        if self.nbi.kind is NbiKind.BPSK:
            Tb = 1.0 / self.nbi.symbol_rate
            offset = rng.uniform(0.0, Tb, size=n)
            n_bits = int(math.ceil((t[-1] - t[0]) / Tb)) + 2
            bits = rng.choice(np.array([-1.0, 1.0]), size=(n, n_bits))
            idx = np.floor((t[None, :] - t[0] + offset[:, None]) / Tb).astype(int)
            out *= np.take_along_axis(bits, idx, axis=1)
        return out

    def measure_agc(self, budget: LinkBudget, sir_db: float | None, rng: np.random.Generator) -> float:
        """RMS of the received mixture over a preamble of Nyquist-rate samples."""
        per_symbol = self.template_nyquist.size
        symbols = rng.choice(np.array([-1.0, 1.0]), size=max(1, -(-self.config.preamble_samples // per_symbol)))
        rows = self.received_rows(budget, sir_db, symbols, rng)[:, :: self.decimation]
        flat = rows.ravel()[: self.config.preamble_samples]
        return float(np.sqrt(np.mean(flat**2)))


def build_channels(config: SimConfig) -> list[ChannelRealization]:
    if config.channel_mode == "ideal":
        return [ChannelRealization.single_tap()]
    rng = substream(config.channel_seed, _CHANNEL)
    return [generate_cm1(Cm1Params(), rng) for _ in range(config.channel_count)]


@dataclass
class BlockResult:
    errors: dict[str, int]
    # sums of the normalized statistic times the transmitted symbol, and of its square
    s1: dict[str, float]
    s2: dict[str, float]
    n: int


def _waveform_block(link: Link, budget: LinkBudget, sir_db, agc: float, n: int, rng) -> BlockResult:
    symbols = rng.choice(np.array([-1.0, 1.0]), size=n)
    rows = link.received_rows(budget, sir_db, symbols, rng)
    errors, s1, s2 = {}, {}, {}
    for r in link.config.receivers:
        if r.is_full:
            stat = np.einsum("ij,j->i", rows, link.template.samples) * link.dt
            z = stat
        else:
            q = quantize(link.designs[r], rows[:, :: link.decimation] / agc)
            stat = np.einsum("ij,j->i", q, link.template_nyquist) * link.Ts
            # undo the AGC and the Bussgang gain so z is on the sqrt(Es) scale
            z = stat * agc / link.unit_coeffs[r].alpha
        decided = np.where(stat >= 0, 1.0, -1.0)
        errors[r.label] = int(np.count_nonzero(decided != symbols))
        zd = z * symbols
        s1[r.label] = float(np.sum(zd))
        s2[r.label] = float(np.sum(zd * zd))
    return BlockResult(errors, s1, s2, n)


def _model_block(link: Link, budget: LinkBudget, sir_db, n: int, rng) -> BlockResult:
    cfg = link.config
    symbols = rng.choice(np.array([-1.0, 1.0]), size=n)
    p_i = link.nbi_power(budget, sir_db)
    d_I = link.sampler.sample(n, rng) * math.sqrt(p_i) if p_i > 0 else np.zeros(n)
    noise = rng.standard_normal(n)
    ref = link.expected_input_variance(budget, sir_db) if cfg.distortion_reference == "input" else 1.0
    errors, s1, s2 = {}, {}, {}
    for r in cfg.receivers:
        var = cfg.noise_var + (0.0 if r.is_full else link.coefficients(r, ref).penalty)
        z = math.sqrt(budget.Es) * symbols + d_I + math.sqrt(var) * noise
        errors[r.label] = int(np.count_nonzero(np.where(z >= 0, 1.0, -1.0) != symbols))
        zd = z * symbols
        s1[r.label] = float(np.sum(zd))
        s2[r.label] = float(np.sum(zd * zd))
    return BlockResult(errors, s1, s2, n)


def run_trial(
    budget: LinkBudget,
    link: Link,
    receiver: ReceiverKind,
    rng: np.random.Generator,
    sir_db: float | None = None,
    agc: float | None = None,
) -> tuple[int, int]:
    """Send one random symbol through the waveform chain; returns (transmitted, decided)."""
    d = rng.choice(np.array([-1.0, 1.0]), size=1)
    row = link.received_rows(budget, sir_db, d, rng)[0]
    if receiver.is_full:
        stat = float(np.dot(row, link.template.samples) * link.dt)
    else:
        x = row[:: link.decimation]
        scale = agc if agc is not None else float(np.sqrt(np.mean(x**2)))
        design = link.designs.get(receiver) or design_lloyd_max(receiver.levels)
        stat = float(np.dot(quantize(design, x / scale), link.template_nyquist) * link.Ts)
    return int(d[0]), 1 if stat >= 0 else -1


# -- sweep orchestration ----------------------------------------------------

_WORKER: dict = {}


def _links(config: SimConfig) -> list[Link]:
    key = config.digest()
    if _WORKER.get("key") != key:
        _WORKER["key"] = key
        _WORKER["links"] = [Link(config, ch) for ch in build_channels(config)]
        _WORKER["agc"] = {}
    return _WORKER["links"]


def _agc(config: SimConfig, snr_index: int, channel_index: int) -> float:
    links = _links(config)
    cache = _WORKER["agc"]
    k = (snr_index, channel_index)
    if k not in cache:
        budget = config.budget(config.snr_grid_db[snr_index])
        rng = substream(config.master_seed, _PREAMBLE, snr_index, channel_index)
        cache[k] = links[channel_index].measure_agc(budget, config.sir_db, rng)
    return cache[k]


def _run_block(config: SimConfig, snr_index: int, block_index: int) -> BlockResult:
    links = _links(config)
    ci = block_index % len(links)
    link = links[ci]
    budget = config.budget(config.snr_grid_db[snr_index])
    n = min(config.block_size, config.trials - block_index * config.block_size)
    rng = substream(config.master_seed, _TRIALS, snr_index, block_index)
    if config.engine == "waveform":
        return _waveform_block(link, budget, config.sir_db, _agc(config, snr_index, ci), n, rng)
    return _model_block(link, budget, config.sir_db, n, rng)


def _run_block_args(args) -> BlockResult:
    return _run_block(*args)


@dataclass
class SweepResult:
    config: SimConfig
    points: list[BerPoint]
    moments: dict[tuple[float, str], tuple[float, float]]  # (snr, receiver) -> (mean, var)
    wall_time: float

    @property
    def curves(self) -> list[BerCurve]:
        return curves_from_points(self.points)

    def csv(self) -> str:
        return write_csv(self.points)


def run_sweep(config: SimConfig, workers: int = 1, theory: bool = True) -> SweepResult:
    """Monte Carlo BER for every (SNR, receiver) in ``config``.

    Blocks of trials are keyed by (master_seed, snr index, block index) and
    reduced in that order, so the output does not depend on ``workers``.
    """
    config.validate()
    t0 = time.perf_counter()
    n_blocks = -(-config.trials // config.block_size)
    tasks = [(config, i, b) for i in range(len(config.snr_grid_db)) for b in range(n_blocks)]
    if workers <= 1:
        results = [_run_block_args(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block_args, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    points: list[BerPoint] = []
    moments = {}
    for i, snr in enumerate(config.snr_grid_db):
        block = results[i * n_blocks : (i + 1) * n_blocks]
        for r in config.receivers:
            errors = sum(b.errors[r.label] for b in block)
            s1 = math.fsum(b.s1[r.label] for b in block)
            s2 = math.fsum(b.s2[r.label] for b in block)
            n = config.trials
            mean = s1 / n
            moments[(snr, r.label)] = (mean, s2 / n - mean * mean)
            ber, lo, hi = estimate_ber(errors, n)
            points.append(BerPoint(snr, config.sir_db, r.label, "mc", ber, lo, hi, n, config.master_seed, errors))
    if theory:
        points = theory_points(config, weights=channel_weights(config)) + points
    return SweepResult(config, points, moments, time.perf_counter() - t0)


def interference_samples(config: SimConfig, count: int | None = None) -> list[np.ndarray]:
    """Unit-power d_I draws per channel realization (scale by sqrt(power) to use)."""
    links = _links(config)
    count = count or config.theory_samples
    out = []
    for ci, link in enumerate(links):
        rng = substream(config.master_seed, _THEORY, ci)
        share = count // len(links) + (1 if ci < count % len(links) else 0)
        out.append(link.sampler.sample(share, rng))
    return out


def channel_weights(config: SimConfig) -> np.ndarray:
    """Share of Monte Carlo trials that each channel realization receives."""
    count = 1 if config.channel_mode == "ideal" else config.channel_count
    w = np.zeros(count)
    n_blocks = -(-config.trials // config.block_size)
    for b in range(n_blocks):
        w[b % count] += min(config.block_size, config.trials - b * config.block_size)
    return w / w.sum()


def theory_points(
    config: SimConfig, snr_grid=None, samples: list[np.ndarray] | None = None, weights=None
) -> list[BerPoint]:
    """Closed-form BER averaged over d_I draws; ci is +-1.96 standard errors.

    ``weights`` sets how much each channel realization counts (default equal).
    """
    config.validate()
    links = _links(config)
    snr_grid = config.snr_grid_db if snr_grid is None else snr_grid
    if samples is None and config.sir_db is not None:
        samples = interference_samples(config)
    points = []
    for snr in snr_grid:
        budget = config.budget(snr)
        for r in config.receivers:
            avg = theory_ber(config, links, budget, r, samples, weights)
            lo = max(0.0, avg.ber - Z95 * avg.stderr)
            hi = min(1.0, avg.ber + Z95 * avg.stderr)
            points.append(BerPoint(float(snr), config.sir_db, r.label, "theory", avg.ber, lo, hi, avg.count, config.master_seed))
    return points


def theory_ber(
    config: SimConfig, links: list[Link], budget: LinkBudget, receiver: ReceiverKind, samples, weights=None
) -> AveragedBer:
    """Weighted average over channels of the d_I-averaged conditional BER."""
    parts = []
    for ci, link in enumerate(links):
        p_i = link.nbi_power(budget, config.sir_db)
        d = samples[ci] * math.sqrt(p_i) if p_i > 0 else np.zeros(1)
        if receiver.is_full:
            parts.append(average_ber_stats("mf", budget, InterferenceSampleSet(d, "waveform projection")))
        else:
            ref = link.expected_input_variance(budget, config.sir_db) if config.distortion_reference == "input" else 1.0
            coeffs = link.coefficients(receiver, ref)
            parts.append(average_ber_stats("fr", budget, InterferenceSampleSet(d, "waveform projection"), coeffs))
    w = np.full(len(parts), 1.0 / len(parts)) if weights is None else np.asarray(weights, dtype=float)
    ber = math.fsum(wi * p.ber for wi, p in zip(w, parts))
    stderr = math.sqrt(math.fsum((wi * p.stderr) ** 2 for wi, p in zip(w, parts)))
    return AveragedBer(ber, stderr, sum(p.count for p in parts))


def manifest(result: SweepResult, command: str, extra: dict | None = None) -> dict:
    import platform

    import scipy

    m = {
        "command": command,
        "config": result.config.to_dict(),
        "config_sha256": result.config.digest(),
        "package_version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "wall_time_s": round(result.wall_time, 3),
    }
    if extra:
        m.update(extra)
    return m
