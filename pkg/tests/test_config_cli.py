import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from uwbnbi.cli import main
from uwbnbi.config import PRESETS, dump_config, parse_config, parse_config_text, parse_grid, preset
from uwbnbi.simulator import ConfigError, SimConfig

GOLDEN = Path(__file__).parent / "golden" / "reproduce_schema.json"


def test_parse_grid():
    assert parse_grid("0, 2,4") == (0.0, 2.0, 4.0)
    assert parse_grid("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)
    with pytest.raises(ValueError):
        parse_grid("0:1:0")


def test_preset_fig1_parameters():
    cfg = preset("paper-fig1")
    assert cfg.sir_db == -10.0
    assert cfg.bandwidth_hz == 8e9
    assert cfg.noise_var == 0.5
    assert cfg.carrier_hz == 5e9
    assert cfg.nbi_kind == "bpsk"
    assert [r.label for r in cfg.receivers] == ["full", "2-bit", "1-bit"]
    assert preset("paper-fig2").sir_db == -15.0
    assert set(PRESETS) == {"paper-fig1", "paper-fig2"}


def test_empty_file_lists_required_keys(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    with pytest.raises(ConfigError) as exc:
        parse_config(p)
    msg = str(exc.value)
    assert "snr_grid_db" in msg and "trials" in msg


def test_sir_omitted_disables_nbi():
    cfg = parse_config_text("snr_grid_db = 0:4:2\ntrials = 100\n")
    assert cfg.sir_db is None
    assert parse_config_text("snr_grid_db = 0\ntrials = 1\nsir_db = none\n").sir_db is None


def test_unit_keys_and_comments():
    cfg = parse_config_text(
        "# link\nsnr_grid_db = 0, 5\ntrials = 10  # few\ncarrier_ghz = 4.5\nsymbol_rate_mhz = 20\ntau_ns = 0.2\n"
    )
    assert cfg.carrier_hz == 4.5e9 and cfg.symbol_rate_hz == 20e6 and cfg.pulse_tau_s == pytest.approx(0.2e-9)


def test_errors_have_line_context():
    text = "snr_grid_db = 0\ntrials = 10\nbogus = 1\ntrials = 11\nengine = warp\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text, "run.cfg")
    problems = exc.value.problems
    assert any(p.startswith("run.cfg:3:") and "bogus" in p for p in problems)
    assert any(p.startswith("run.cfg:4:") and "duplicate" in p for p in problems)
    with pytest.raises(ConfigError) as exc:
        parse_config_text("snr_grid_db = 0\ntrials = 10\nengine = warp\n", "run.cfg")
    assert "engine" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config_text("snr_grid_db = 0\ntrials = -5\n")


def test_preset_in_file_with_override():
    cfg = parse_config_text("preset = paper-fig2\ntrials = 77\n")
    assert cfg.sir_db == -15.0 and cfg.trials == 77


@pytest.mark.parametrize("cfg", [SimConfig(), preset("paper-fig1"), SimConfig(sir_db=-3.5, receivers=("1-bit",))])
def test_dump_roundtrip(cfg):
    assert parse_config_text(dump_config(cfg)) == cfg


# -- CLI ------------------------------------------------------------------------


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_design_quantizer_paper_constants(capsys):
    code, out, _ = _run(["design-quantizer", "--bits", "1", "--quantizer-mode", "paper-constants"], capsys)
    d = json.loads(out)
    assert code == 0 and (d["alpha"], d["sigma_sq"]) == (0.7979, 0.23)
    code, out, _ = _run(["design-quantizer", "--bits", "2", "--quantizer-mode", "paper-constants"], capsys)
    d = json.loads(out)
    assert (d["alpha"], d["sigma_sq"], d["levels"]) == (0.8829, 0.11, 3)


def test_design_quantizer_computed(capsys):
    code, out, _ = _run(["design-quantizer", "--levels", "2"], capsys)
    d = json.loads(out)
    assert d["alpha"] == pytest.approx(0.6366197723675814, abs=1e-6)
    assert d["sigma_sq"] == pytest.approx(0.23133503779823196, abs=1e-6)
    assert set(d) >= {"output_levels", "thresholds", "alpha", "sigma_sq", "penalty"}


def test_usage_errors(capsys):
    assert _run(["design-quantizer"], capsys)[0] == 2
    assert _run(["no-such-verb"], capsys)[0] == 2
    assert _run(["theory", "--preset", "paper-fig1", "--config", "x.cfg"], capsys)[0] == 2
    assert _run(["theory", "--snr-grid", "0", "--trials", "0"], capsys)[0] == 2


def test_theory_csv(capsys):
    code, out, _ = _run(["theory", "--snr-grid", "0,10", "--sir", "-10", "--seed", "1"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0
    assert list(rows[0]) == ["snr_db", "sir_db", "receiver", "penalty", "ber", "stderr"]
    assert len(rows) == 6
    assert {r["receiver"] for r in rows} == {"full", "2-bit", "1-bit"}


def test_simulate_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = _run(
        ["simulate", "--snr-grid", "4", "--trials", "600", "--sir", "-10", "--seed", "3", "--out", str(out)], capsys
    )
    assert code == 0
    assert (out / "ber.csv").exists() and (out / "config.txt").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["master_seed"] == 3 and len(m["config_sha256"]) == 64
    # the manifest's config file re-runs bit-identically
    out2 = tmp_path / "rerun"
    assert _run(["simulate", "--config", str(out / "config.txt"), "--out", str(out2)], capsys)[0] == 0
    assert (out2 / "ber.csv").read_bytes() == (out / "ber.csv").read_bytes()


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("UWBNBI_SEED", "0x10")
    out = tmp_path / "env"
    assert _run(["simulate", "--snr-grid", "4", "--trials", "100", "--out", str(out), "--no-theory"], capsys)[0] == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["master_seed"] == 16
    monkeypatch.setenv("UWBNBI_SEED", "abc")
    assert _run(["simulate", "--snr-grid", "4", "--trials", "100", "--out", str(out)], capsys)[0] == 2


def test_validate_suites(capsys):
    code, out, _ = _run(["validate", "quantizer"], capsys)
    assert code == 0 and "FAIL" not in out
    code, out, _ = _run(["validate", "analytics"], capsys)
    assert code == 0
    code, out, _ = _run(["validate", "analytics", "--inject-fault"], capsys)
    assert code == 1 and "FAIL" in out


@pytest.fixture(scope="module")
def reproduced(tmp_path_factory):
    out = tmp_path_factory.mktemp("rep")
    from uwbnbi.figures import reproduce

    reproduce("fig1", out / "a", trials=0, theory_samples=20_000, master_seed=4)
    reproduce("fig1", out / "b", trials=0, theory_samples=20_000, master_seed=4)
    return out


def test_reproduce_schema_golden(reproduced):
    golden = json.loads(GOLDEN.read_text())
    a = reproduced / "a"
    with open(a / "fig1.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == golden["csv_header"]
        rows = list(reader)
    curves = sorted({(r["receiver"], "nbi" if r["sir_db"] else "no-nbi") for r in rows if r["source"] == "theory"})
    assert [list(c) for c in curves] == golden["theory_curves"]
    summary = json.loads((a / "fig1_summary.json").read_text())
    assert sorted(summary) == golden["summary_keys"]
    assert sorted(summary["no_nbi_gap_db_at_1e-5"]) == golden["summary_gap_keys"]
    assert sorted(summary["nbi_loss_db_at_1e-6"]) == golden["summary_loss_keys"]
    assert sorted(summary["snr_db_at_1e-6"]) == golden["summary_snr_keys"]
    manifest = json.loads((a / "fig1_manifest.json").read_text())
    assert sorted(manifest) == golden["manifest_keys"]
    assert summary["no_nbi_gap_db_at_1e-5"]["1-bit_vs_full"] == pytest.approx(2.3, abs=0.3)


def test_reproduce_deterministic(reproduced):
    for name in ("fig1.csv", "fig1_summary.json"):
        assert (reproduced / "a" / name).read_bytes() == (reproduced / "b" / name).read_bytes()
    ma = json.loads((reproduced / "a" / "fig1_manifest.json").read_text())
    mb = json.loads((reproduced / "b" / "fig1_manifest.json").read_text())
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    assert ma == mb


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    env.pop("UWBNBI_SEED", None)
    proc = subprocess.run(
        [sys.executable, "-m", "uwbnbi", "design-quantizer", "--levels", "3"], capture_output=True, text=True, env=env
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["levels"] == 3
