import json
import subprocess
import sys

import pytest

from greenscaler.cli import main


def test_pipeline_through_files(tmp_path, capsys):
    p1 = tmp_path / "p1"
    assert main(["phase1", "--hours", "2", "--out", str(p1)]) == 0
    data = p1 / "phase1_telemetry.csv"
    assert len(data.read_text().splitlines()) == 2 * 720 + 1

    assert main(["fit", "--data", str(data), "--out", str(p1)]) == 0
    doc = json.loads((p1 / "surrogate.json").read_text())
    assert doc["format"] == 1 and len(doc["latency_coeffs"]) == 2
    assert (p1 / "power_features.json").exists()

    hpa, mpc = tmp_path / "hpa", tmp_path / "mpc"
    assert main(["run", "--controller", "hpa", "--out", str(hpa)]) == 0
    assert main(["run", "--controller", "mpc", "--model", str(p1 / "surrogate.json"),
                 "--data", str(data), "--out", str(mpc)]) == 0
    status = main(["compare", "--hpa", str(hpa / "report.json"), "--mpc", str(mpc / "report.json"),
                   "--out", str(tmp_path)])
    summary = json.loads((tmp_path / "comparison.json").read_text())
    assert status == (0 if all(c["passed"] for c in summary["checks"]) else 1)
    assert summary["mpc"]["slo_verdict"] == "PASS-SLO"

    capsys.readouterr()
    assert main(["report", "--telemetry", str(mpc / "telemetry.csv"),
                 "--decisions", str(mpc / "decisions.csv")]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads((mpc / "report.json").read_text())


def test_compare_runs_full_pipeline(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "energy ratio hpa/mpc" in out
    assert out.count("PASS") >= 4
    for sub in ("phase1/phase1_telemetry.csv", "phase1/surrogate.json", "hpa/report.json", "mpc/report.json"):
        assert (tmp_path / sub).exists()


def test_scenario_config_and_overrides(tmp_path):
    scenario = tmp_path / "s.scenario"
    scenario.write_text("[scenario]\nDURATION = 600\n[workload]\nVU_MAX = 50\n")
    config = tmp_path / "c.cfg"
    config.write_text("R_MAX = 6\n")
    assert main(["run", "--scenario", str(scenario), "--config", str(config), "--controller", "hpa",
                 "--set", "scenario.HPA_TARGET_CPU=0.5", "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["sample_count"] == 120
    rows = (tmp_path / "o" / "telemetry.csv").read_text().splitlines()[1:]
    assert max(int(r.split(",")[2]) for r in rows) <= 6


def test_domain_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--controller", "mpc", "--out", str(tmp_path)]) == 2
    assert "surrogate" in capsys.readouterr().err
    assert main(["run", "--set", "R_MIN=9", "--set", "R_MAX=3", "--out", str(tmp_path)]) == 2


def test_bad_set_syntax(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--set", "R_MAX", "--out", str(tmp_path)])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "greenscaler", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("phase1", "fit", "run", "compare", "report"):
        assert cmd in res.stdout
