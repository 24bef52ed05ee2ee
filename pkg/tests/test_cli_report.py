import csv
import json

import numpy as np
import pytest

from dropf.cli import main
from dropf.report import (
    RunManifest,
    emit_report,
    plot_load_profile,
    read_hourly_csv,
    write_hourly_csv,
)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_hourly_csv_roundtrip(study, tmp_path):
    for r in study.all_results:
        path = write_hourly_csv(r, tmp_path / f"{r.label}.csv")
        back = read_hourly_csv(path)
        assert np.array_equal(back["hourly_cost"], r.hourly_cost)
        assert np.array_equal(back["modified_load_mw"], r.modified_profile.hourly_mw)
        assert np.array_equal(back["hour"], np.arange(1, 25))


def test_baseline_csv_columns_equal(study, tmp_path):
    back = read_hourly_csv(write_hourly_csv(study.baseline, tmp_path / "b.csv"))
    assert np.array_equal(back["baseline_load_mw"], back["modified_load_mw"])


def test_report_row_counts(study, tmp_path):
    emit_report(study.all_results, tmp_path)
    assert len(_rows(tmp_path / "summary.csv")) == 7
    for r in study.all_results:
        assert len(_rows(tmp_path / f"{r.label}_hourly.csv")) == 24


def test_plots_are_deterministic(study, tmp_path):
    a = plot_load_profile(study.baseline, tmp_path / "a.svg").read_bytes()
    b = plot_load_profile(study.baseline, tmp_path / "b.svg").read_bytes()
    assert a == b and len(a) > 1000


def test_cli_study(tmp_path, capsys):
    out = tmp_path / "study"
    assert main(["study", "--case", "ieee14", "--profile", "default", "--out", str(out)]) == 0
    manifest = RunManifest.read(out)
    assert manifest.command == "study"
    assert len(manifest.scenarios) == 7
    for name in manifest.outputs:
        assert (out / name).exists(), name
    assert len(_rows(out / "summary.csv")) == 7
    table = capsys.readouterr().out
    assert "rtp_g0.5" in table and "tou_g0.1" in table


def test_cli_zero_gamma_equals_none(tmp_path):
    assert main(["scenario", "--tariff", "none", "--out", str(tmp_path / "a")]) == 0
    assert main(["scenario", "--tariff", "tou", "--gamma", "0", "--out", str(tmp_path / "b")]) == 0
    a = _rows(tmp_path / "a" / "summary.csv")
    b = {r["scenario"]: r for r in _rows(tmp_path / "b" / "summary.csv")}
    assert float(b["tou_g0"]["total_cost"]) == pytest.approx(float(a[0]["total_cost"]), rel=1e-9)
    assert float(b["tou_g0"]["peak_load_mw"]) == float(a[0]["peak_load_mw"])


def test_cli_solve(tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", "--out", str(out), "--verbose"]) == 0
    gens = _rows(out / "solve_generators.csv")
    assert [int(g["bus"]) for g in gens] == [1, 2, 3, 6, 8]
    diag = json.loads((out / "opf_diagnostics.json").read_text())
    assert diag["converged"] and diag["iterates"]
    for name in RunManifest.read(out).outputs:
        assert (out / name).exists()


def test_cli_missing_case(tmp_path, capsys):
    assert main(["solve", "--case", "missing.case", "--out", str(tmp_path)]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_bad_flag():
    with pytest.raises(SystemExit) as info:
        main(["scenario", "--tariff", "flat"])
    assert info.value.code == 2


def test_cli_infeasible(tmp_path, capsys):
    profile = tmp_path / "huge.csv"
    profile.write_text("hour,load_mw\n" + "\n".join(f"{h},2000" for h in range(1, 25)))
    assert main(["scenario", "--profile", str(profile), "--out", str(tmp_path / "o")]) == 1
    assert "infeasible" in capsys.readouterr().err


def test_cli_config_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg"
    cfg.mkdir()
    (cfg / "flat.csv").write_text("\n".join(f"{h},200" for h in range(1, 25)))
    monkeypatch.setenv("DROPF_CONFIG_DIR", str(cfg))
    monkeypatch.chdir(tmp_path)
    assert main(["scenario", "--profile", "flat.csv", "--out", "o"]) == 0
    rows = _rows(tmp_path / "o" / "baseline_hourly.csv")
    assert {float(r["baseline_load_mw"]) for r in rows} == {200.0}


def test_cli_scenario_config(tmp_path):
    (tmp_path / "flat.csv").write_text("\n".join(f"{h},180" for h in range(1, 25)))
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"case": "ieee14", "profile": "flat.csv", "tariff": "rtp",
                               "gamma": 0.2}))
    out = tmp_path / "o"
    assert main(["scenario", "--config", str(cfg), "--out", str(out)]) == 0
    manifest = RunManifest.read(out)
    assert manifest.scenarios == ["baseline", "rtp_g0.2"]
    assert manifest.inputs["profile"] == str(tmp_path / "flat.csv")
    # explicit flags win over the file
    assert main(["scenario", "--config", str(cfg), "--gamma", "0.5", "--out", str(out)]) == 0
    assert RunManifest.read(out).scenarios == ["baseline", "rtp_g0.5"]


def test_cli_scenario_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"tarif": "tou"}))
    assert main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "unknown scenario config key" in capsys.readouterr().err
