import json

import numpy as np
import pytest

from tdtli import cli
from tdtli.io import read_csv, strip_timestamp

CONFIG = """
species:
  N: [6, 7]
sequence:
  T_ns: 18900
  theta_mrad: [0, 5.1, 0]
ensemble:
  sigma_v_m_s: 0.62
scan:
  model: both
  species_N: 7
shots:
  n_shots: 400
seed: 3
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(CONFIG)
    return path


def test_timing_scan_outputs(config, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.run(["timing-scan", "--config", str(config), "--out", str(out)]) == 0
    res = read_csv(out / "timing_scan.csv")
    assert res.units["dT"] == "ns"
    assert res["dT"][0] == -70 and res["dT"][-1] == 70
    assert {"delta_sn_quantum", "delta_sn_classical"} <= set(res.columns)
    assert (out / "timing_scan.png").stat().st_size > 0
    summary = json.loads((out / "timing_scan.json").read_text())["summary"]
    assert set(summary["divergence_under_definitions_mrad"]) == {"std", "hwhm", "fwhm"}


def test_json_deterministic_modulo_timestamp(config, tmp_path):
    texts = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli.run(["accel-scan", "--config", str(config), "--out", str(out),
                        "--no-figures"]) == 0
        texts.append(strip_timestamp((out / "accel_scan.json").read_text()))
    assert texts[0] == texts[1]


def test_missing_field_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("sequence:\n  dT_off_ns: 200\n")
    assert cli.run(["timing-scan", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "sequence.T_ns" in capsys.readouterr().err


def test_out_dir_from_environment(config, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.run(["accel-scan", "--config", str(config), "--no-figures"]) == 0
    assert (tmp_path / "env" / "accel_scan.csv").exists()


def test_run_dispatches_on_scan_type(tmp_path):
    path = tmp_path / "h.yaml"
    path.write_text(CONFIG.replace("scan:\n", "scan:\n  type: height\n  grid: {start: 0.1, stop: 6, num: 30}\n"))
    assert cli.run(["run", "--config", str(path), "--out", str(tmp_path), "--model", "quantum"]) == 0
    res = read_csv(tmp_path / "height_scan.csv")
    assert res.units["z_m"] == "mm" and "delta_sn_quantum" in res.columns


def test_fit_subcommand(config, tmp_path):
    out = tmp_path / "o"
    assert cli.run(["timing-scan", "--config", str(config), "--out", str(out), "--no-figures",
                    "--model", "quantum"]) == 0
    assert cli.run(["fit", "--input", str(out / "timing_scan.json"), "--out", str(out),
                    "--no-figures"]) == 0
    params = json.loads((out / "fit.json").read_text())["summary"]["params"]
    assert params["fwhm"] == pytest.approx(47.6, abs=2.0)


def test_fit_convergence_exit_code(tmp_path, monkeypatch, config):
    out = tmp_path / "o"
    cli.run(["accel-scan", "--config", str(config), "--out", str(out), "--no-figures"])

    from tdtli.fitting import FitResult

    monkeypatch.setattr(cli, "fit_gaussian", lambda x, y: FitResult(
        dict(center=0.0, fwhm=1.0, amplitude=0.0, offset=0.0), 1.0, False, "stalled"))
    code = cli.run(["fit", "--input", str(out / "accel_scan.csv"), "--out", str(out),
                    "--column", "delta_sn_quantum"])
    assert code == cli.EXIT_CONVERGENCE


def test_shots_round_trip(config, tmp_path):
    out = tmp_path / "shots"
    assert cli.run(["synthesize-shots", "--config", str(config), "--out", str(out)]) == 0
    assert (out / "shots_res.jsonl").exists() and (out / "shots_off.jsonl").exists()
    assert cli.run(["analyze-shots", "--config", str(config), "--out", str(out),
                    "--no-figures"]) == 0
    res = read_csv(out / "analyze_shots.csv")
    assert list(res["N"]) == [6, 7]
    assert np.all(res["sigma_delta_sn"] > 0)


def test_oracle_check_exit_codes(tmp_path, monkeypatch):
    assert cli.run(["oracle-check", "--out", str(tmp_path), "--quantum-only"]) == 0
    from tdtli.oracles import OracleRow

    monkeypatch.setattr(cli, "quantum_oracle_suite", lambda: [
        OracleRow("quantum", 1, 1, 1, 0, 1.0, 2.0, 0.5, False)])
    assert cli.run(["oracle-check", "--out", str(tmp_path), "--quantum-only"]) == cli.EXIT_ORACLE
