import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uwbnbi.analytics import LinkBudget, q_function
from uwbnbi.receiver import FULL, ONE_BIT, TWO_BIT
from uwbnbi.simulator import (
    ConfigError,
    Link,
    SimConfig,
    build_channels,
    channel_weights,
    estimate_ber,
    read_csv,
    run_sweep,
    run_trial,
    substream,
    write_csv,
)


def _wilson_oracle(k, n, z=1.959963984540054):
    """Roots of (p_hat - p)^2 = z^2 p (1 - p) / n, solved as a polynomial."""
    ph = k / n
    a = 1 + z * z / n
    b = -(2 * ph + z * z / n)
    c = ph * ph
    return sorted(np.roots([a, b, c]).real)


@pytest.mark.parametrize("k,n", [(0, 1000), (500, 1000), (1000, 1000), (17, 100_000), (3, 40)])
def test_wilson_interval(k, n):
    ber, lo, hi = estimate_ber(k, n)
    assert ber == k / n
    r_lo, r_hi = _wilson_oracle(k, n)
    assert lo == pytest.approx(max(r_lo, 0.0), abs=1e-12)
    assert hi == pytest.approx(min(r_hi, 1.0), abs=1e-12)


def test_wilson_examples():
    assert estimate_ber(0, 1000) == (0.0, 0.0, pytest.approx(0.00383, abs=1e-5))
    ber, lo, hi = estimate_ber(500, 1000)
    assert ber == 0.5 and hi - 0.5 == pytest.approx(0.5 - lo, abs=1e-12)
    assert estimate_ber(1000, 1000)[0] == 1.0 and estimate_ber(1000, 1000)[2] == 1.0
    with pytest.raises(ValueError):
        estimate_ber(5, 0)
    with pytest.raises(ValueError):
        estimate_ber(5, 4)


@given(n=st.integers(1, 10**7), frac=st.floats(0, 1))
def test_wilson_ordering(n, frac):
    k = int(round(frac * n))
    ber, lo, hi = estimate_ber(k, n)
    assert 0 <= lo <= ber <= hi <= 1


def test_config_validation_lists_all_problems():
    cfg = SimConfig(snr_grid_db=(), trials=0, engine="magic", channel_count=0)
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert len(exc.value.problems) == 4
    with pytest.raises(ConfigError):
        SimConfig(sample_rate_hz=20e9).validate()
    with pytest.raises(ConfigError):
        SimConfig(receivers=("4-level",)).validate()
    SimConfig(receivers=("4-level",), quantizer_mode="computed").validate()


def test_config_digest_and_dict():
    a, b = SimConfig(), SimConfig(master_seed=1)
    assert a.digest() == SimConfig().digest() != b.digest()
    assert a.to_dict()["receivers"] == ["full", "2-bit", "1-bit"]


def test_substreams_independent_of_order():
    x = substream(7, 0, 3, 5).standard_normal(4)
    substream(7, 0, 3, 4).standard_normal(100)
    np.testing.assert_array_equal(x, substream(7, 0, 3, 5).standard_normal(4))
    assert not np.array_equal(x, substream(7, 0, 3, 6).standard_normal(4))
    assert not np.array_equal(x, substream(8, 0, 3, 5).standard_normal(4))


@pytest.fixture(scope="module")
def ideal_link():
    cfg = SimConfig(channel_mode="ideal", receivers=(FULL, ONE_BIT), snr_grid_db=(0.0,))
    return Link(cfg, build_channels(cfg)[0])


def test_link_geometry(link):
    assert link.T == pytest.approx(len(link.template) * link.dt)
    assert link.decimation == 4
    assert float(np.sum(link.template_nyquist**2) * link.Ts) == pytest.approx(1.0, abs=1e-6)
    assert link.sampler.filter_gain == pytest.approx(1.0, abs=0.01)


def test_run_trial_high_snr(link):
    rng = np.random.default_rng(0)
    budget = link.config.budget(30.0)
    agc = link.measure_agc(budget, None, np.random.default_rng(1))
    for receiver in (FULL, ONE_BIT):
        ok = sum(1 for _ in range(5000) if (lambda p: p[0] == p[1])(run_trial(budget, link, receiver, rng, agc=agc)))
        # Q(sqrt(2 Es/N0)) at 30 dB is ~1e-230, so any error in 10^4 trials would be a bug
        assert ok / 5000 >= 0.9999


def test_run_trial_no_signal(ideal_link):
    rng = np.random.default_rng(3)
    budget = LinkBudget(0.0, 1.0)
    n = 100_000
    err = sum(1 for _ in range(n) if (lambda p: p[0] != p[1])(run_trial(budget, ideal_link, FULL, rng)))
    assert abs(err / n - 0.5) < 3 * math.sqrt(0.25 / n)


def test_run_trial_deterministic(link):
    budget = link.config.budget(2.0)
    a = [run_trial(budget, link, ONE_BIT, np.random.default_rng(9), -10.0) for _ in range(3)]
    assert len(set(a)) == 1


def test_sweep_awgn_matches_closed_form():
    cfg = SimConfig(
        channel_mode="ideal", receivers=(FULL,), snr_grid_db=(0.0, 3.0, 6.0, 8.0), trials=100_000,
        block_size=5000, master_seed=11,
    )
    res = run_sweep(cfg, theory=False)
    for p in res.points:
        b = cfg.budget(p.snr_db)
        ref = q_function(math.sqrt(2 * b.Es / b.N0))
        assert p.ci_low <= ref <= p.ci_high, (p.snr_db, p.ber, ref)


def test_sweep_zero_noise_no_errors():
    cfg = SimConfig(receivers=(FULL, TWO_BIT, ONE_BIT), snr_grid_db=(80.0,), trials=2000, channel_mode="ideal")
    res = run_sweep(cfg, theory=False)
    assert all(p.ber == 0 and p.errors == 0 for p in res.points)


def test_sweep_worker_independent_csv():
    cfg = SimConfig(snr_grid_db=(2.0, 6.0), sir_db=-10.0, trials=3000, block_size=250, theory_samples=5000, master_seed=5)
    a = run_sweep(cfg, workers=1).csv()
    b = run_sweep(cfg, workers=3).csv()
    assert a == b
    c = run_sweep(dataclasses.replace(cfg, master_seed=6), workers=1).csv()
    assert c != a


def test_equivalent_model_engine_runs_and_orders(link):
    cfg = SimConfig(snr_grid_db=(4.0,), sir_db=-10.0, trials=200_000, engine="equivalent-model", block_size=20_000)
    res = run_sweep(cfg, theory=False)
    ber = {p.receiver: p for p in res.points}
    # same noise and d_I draws feed every receiver, so the ordering is exact
    assert ber["full"].errors <= ber["2-bit"].errors <= ber["1-bit"].errors


def test_csv_roundtrip(tmp_path):
    cfg = SimConfig(channel_mode="ideal", receivers=(FULL,), snr_grid_db=(1.0,), trials=500)
    res = run_sweep(cfg, theory=True)
    write_csv(res.points, tmp_path / "x.csv")
    back = read_csv(tmp_path / "x.csv")
    assert write_csv(back) == res.csv()
    header = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert header == "snr_db,sir_db,receiver,source,ber,ci_low,ci_high,trials,seed"
    assert {p.source for p in back} == {"theory", "mc"}


def test_channel_weights():
    cfg = SimConfig(channel_count=3, trials=1000, block_size=300)
    w = channel_weights(cfg)
    np.testing.assert_allclose(w, [0.4, 0.3, 0.3])
    assert channel_weights(SimConfig(channel_mode="ideal")).tolist() == [1.0]


def test_ber_points_invariants():
    cfg = SimConfig(snr_grid_db=(0.0,), sir_db=-15.0, trials=2000, theory_samples=2000)
    for p in run_sweep(cfg).points:
        assert 0 <= p.ci_low <= p.ber <= p.ci_high <= 1
