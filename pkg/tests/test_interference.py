import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwbnbi.interference import (
    NbiKind,
    NbiRealization,
    NbiSpec,
    ProjectionSampler,
    SirTarget,
    calibrate_sir,
    draw_realization,
    mean_power,
    project_interference,
    render,
    synthesize_nbi,
)
from uwbnbi.waveform import SampledWaveform, WaveformError

FS = 64e9


def test_tone_amplitude_from_power():
    spec = NbiSpec(kind="tone", power=2.0, initial_phase=0.0)
    w = synthesize_nbi(spec, 20e-9, np.random.default_rng(0))
    assert np.max(np.abs(w.samples)) == pytest.approx(2.0, rel=1e-9)
    assert spec.amplitude == 2.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bpsk_envelope_bound(seed):
    spec = NbiSpec(power=3.0)
    w = synthesize_nbi(spec, 500e-9, np.random.default_rng(seed))
    assert np.max(np.abs(w.samples)) <= spec.amplitude * (1 + 1e-12)


def test_bpsk_power_over_one_microsecond():
    spec = NbiSpec(power=1.7)
    w = synthesize_nbi(spec, 1e-6, np.random.default_rng(4))
    # time-average oracle computed directly from the record
    measured = math.fsum((w.samples**2).tolist()) / len(w)
    assert measured == pytest.approx(1.7, rel=0.01)


def test_bpsk_changes_sign_at_symbol_boundaries():
    spec = NbiSpec(symbol_rate=100e6, initial_phase=0.0)
    real = NbiRealization(0.0, 0.0, np.array([1.0, -1.0, 1.0]))
    t = np.array([1e-9, 11e-9, 21e-9])  # carrier phase 0 at these instants (5 GHz, integer cycles)
    np.testing.assert_allclose(render(spec, real, t), spec.amplitude * np.array([1.0, -1.0, 1.0]), atol=1e-9)


def test_nbi_spec_validation():
    with pytest.raises(ValueError):
        NbiSpec(carrier_freq=0.0)
    with pytest.raises(ValueError):
        NbiSpec(power=-1.0)
    with pytest.raises(ValueError):
        NbiSpec(symbol_rate=4e9)
    with pytest.raises(WaveformError):
        synthesize_nbi(NbiSpec(), 0.0, np.random.default_rng(0))


def _record(seed=0, duration=200e-9):
    return synthesize_nbi(NbiSpec(), duration, np.random.default_rng(seed))


@pytest.mark.parametrize("sir_db,expected", [(0.0, 1.0), (-10.0, 10.0), (-15.0, 31.6227766)])
def test_calibrate_sir_examples(sir_db, expected):
    out = calibrate_sir(_record(), 1.0, SirTarget(sir_db))
    assert 10 * np.log10(mean_power(out) / expected) == pytest.approx(0.0, abs=0.01)


def test_calibrate_sir_energy_per_symbol_reference():
    T = 70e-9
    out = calibrate_sir(_record(), 2.0, SirTarget(-10.0), reference_duration=T)
    assert mean_power(out) * T == pytest.approx(20.0, rel=1e-12)


def test_calibrate_sir_rejects_zero_power():
    with pytest.raises(WaveformError):
        calibrate_sir(SampledWaveform(np.zeros(16), 1 / FS), 1.0, SirTarget(0.0))


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-6, 1e6), sir=st.floats(-40, 40), es=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_calibrate_sir_roundtrip(scale, sir, es, seed):
    rec = _record(seed, 20e-9).scaled(scale)
    out = calibrate_sir(rec, es, SirTarget(sir))
    measured_sir = 10 * np.log10(es / mean_power(out))
    assert measured_sir == pytest.approx(sir, abs=0.01)


def test_projection_zero_interference(cm1_template):
    T = cm1_template.end_time + 1e-9
    r = SampledWaveform(np.zeros(4 * len(cm1_template)), cm1_template.sample_interval)
    assert project_interference(cm1_template, r, 1, T) == 0.0


def test_projection_of_template_multiple(cm1_template):
    T = cm1_template.end_time
    c = 3.5
    assert project_interference(cm1_template, cm1_template.scaled(c), 1, T) == pytest.approx(c, abs=1e-9)


def _tone_record(template, phase, n_symbols):
    spec = NbiSpec(kind="tone", initial_phase=phase)
    dt = template.sample_interval
    t = np.arange(int(np.ceil(n_symbols * 80e-9 / dt))) * dt
    return SampledWaveform(render(spec, NbiRealization(phase, 0.0, np.ones(1)), t), dt)


def test_projection_tone_brute_force(cm1_template):
    T = 80e-9
    r = _tone_record(cm1_template, 0.3, 3)
    for k in (1, 2):
        got = project_interference(cm1_template, r, k, T)
        # direct-summation oracle, sample by sample
        off = int(round((k - 1) * T / r.sample_interval))
        dt = r.sample_interval
        ref = math.fsum(
            float(cm1_template.samples[i]) * float(r.samples[off + i]) * dt for i in range(len(cm1_template))
        )
        assert got == pytest.approx(ref, abs=1e-9)


def test_projection_window_out_of_range(cm1_template):
    r = _tone_record(cm1_template, 0.0, 1)
    with pytest.raises(WaveformError):
        project_interference(cm1_template, r, 3, 80e-9)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-100, 100), phase=st.floats(0, 6.28))
def test_projection_linear(cm1_template, c, phase):
    r = _tone_record(cm1_template, phase, 1)
    base = project_interference(cm1_template, r, 1, 80e-9)
    assert project_interference(cm1_template, r.scaled(c), 1, 80e-9) == pytest.approx(c * base, rel=1e-9, abs=1e-12)


def test_random_phase_tone_projection_mean_zero(cm1_template):
    sampler = ProjectionSampler(cm1_template, NbiSpec(kind="tone"))
    d = sampler.sample(100_000, np.random.default_rng(8))
    assert abs(d.mean()) < 3 * d.std(ddof=1) / np.sqrt(d.size)


def test_sampler_matches_rendered_projection(cm1_template):
    spec = NbiSpec()
    sampler = ProjectionSampler(cm1_template, spec)
    rng = np.random.default_rng(12)
    dt = cm1_template.sample_interval
    t = cm1_template.start_time + np.arange(len(cm1_template)) * dt
    for _ in range(5):
        real = draw_realization(spec, len(cm1_template) * dt, rng)
        r = SampledWaveform(render(spec, real, t, cm1_template.start_time), dt, cm1_template.start_time)
        direct = float(np.sum(cm1_template.samples * r.samples) * dt)
        assert sampler.project([real])[0] == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_sampler_tone_gain(cm1_template):
    # a tone's projection magnitude over all phases is amplitude * |W(fc)|
    spec = NbiSpec(kind="tone")
    s = ProjectionSampler(cm1_template, spec)
    d = s.project(phases=np.linspace(0, 2 * np.pi, 4097))
    assert np.max(np.abs(d)) == pytest.approx(spec.amplitude * s.projection_gain(), rel=1e-6)
