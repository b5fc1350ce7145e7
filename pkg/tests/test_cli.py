import json

import pytest

from panelbreak.cli import main
from panelbreak.panel import load_panel
from panelbreak.version import __version__


@pytest.fixture
def panel_file(tmp_path):
    path = tmp_path / "panel.csv"
    assert main(["simulate", "--model", "ar1:0.3", "-n", "12", "-t", "40",
                 "--seed", "1", "--out", str(path)]) == 0
    return path


def test_simulate_writes_a_panel(panel_file):
    panel = load_panel(panel_file)
    assert panel.shape == (12, 40)


def test_simulate_is_reproducible(tmp_path, panel_file):
    other = tmp_path / "again.csv"
    main(["simulate", "--model", "ar1:0.3", "-n", "12", "-t", "40",
          "--seed", "1", "--out", str(other)])
    assert other.read_text() == panel_file.read_text()


def test_simulate_with_breaks_and_factors(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["simulate", "--model", "arma21", "-n", "6", "-t", "30",
                 "--delta-law", "uniform:-1:1", "--factors", "strong", "--p", "2",
                 "--seed", "2", "--layout", "columns", "--out", str(path)]) == 0
    assert load_panel(path, layout="columns").shape == (6, 30)


def test_simulate_to_stdout(capsys):
    assert main(["simulate", "-n", "2", "-t", "5", "--seed", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and len(lines[0].split(",")) == 5


def test_bad_delta_law_fails(capsys):
    assert main(["simulate", "-n", "2", "-t", "5", "--delta-law", "normal"]) == 1
    assert "delta law" in capsys.readouterr().err


def test_test_command(panel_file, tmp_path, capsys):
    argv = ["test", str(panel_file), "--weights", "tau:0.5", "--grid", "50",
            "--paths", "300", "--cache-dir", str(tmp_path / "cache"), "--json"]
    assert main(argv) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["test"] == "hat:tau:0.5"
    assert record["calibration"] == "asymptotic"
    assert record["critical_value"] > 0
    assert main(argv[:-1] + ["--no-build"]) == 0
    text = capsys.readouterr().out
    assert "decision" in text and "critical value" in text


def test_missing_table_with_no_build(panel_file, tmp_path, capsys):
    assert main(["test", str(panel_file), "--grid", "50", "--paths", "300",
                 "--cache-dir", str(tmp_path / "empty"), "--no-build"]) == 1
    assert "no critical-value table" in capsys.readouterr().err


def test_bootstrap_test_command(panel_file, capsys):
    assert main(["bootstrap-test", str(panel_file), "--estimator", "check",
                 "--reps", "9", "--pmax", "3", "--seed", "4", "--json"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["calibration"] == "bootstrap"
    assert record["test"] == "check:ols"
    assert 0 < record["p_value"] <= 1
    assert "p_hat" in record["extra"]


def test_critvals_command(tmp_path, capsys):
    cache = str(tmp_path / "cache")
    assert main(["critvals", "--kind", "tau", "--tau", "0.1", "--grid", "50",
                 "--paths", "300", "--cache-dir", cache]) == 0
    out = capsys.readouterr().out
    assert out.startswith("tau tau=0.1 sup")
    assert "alpha 0.05" in out
    assert main(["critvals", "--kind", "tau", "--tau", "0.1", "--grid", "50",
                 "--paths", "300", "--cache-dir", cache, "--no-build",
                 "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["kind"] == "tau" and "sample" not in data
    assert main(["critvals", "--kind", "wls", "--grid", "50", "--paths", "300",
                 "--cache-dir", cache, "--no-build"]) == 1


def test_critvals_command_with_workers(tmp_path, capsys):
    serial, pooled = str(tmp_path / "serial"), str(tmp_path / "pooled")
    assert main(["critvals", "--kind", "check-wls", "--grid", "40", "--paths",
                 "2500", "--cache-dir", serial, "--workers", "1"]) == 0
    first = capsys.readouterr().out
    assert first.startswith("check-wls sup, G = 40, 2500 paths")
    assert main(["critvals", "--kind", "check-wls", "--grid", "40", "--paths",
                 "2500", "--cache-dir", pooled, "--workers", "2"]) == 0
    assert capsys.readouterr().out == first


def test_montecarlo_command(tmp_path, capsys):
    config = tmp_path / "tiny.yaml"
    config.write_text(
        "models: [ar1:0]\nn: [8]\nt: [20]\nhypotheses: ['null']\n"
        "tests: [hat:ols]\nreplications: 2\ncrit_grid: 40\ncrit_paths: 200\n"
        "formats: [text, csv]\n")
    out_dir = tmp_path / "results"
    assert main(["montecarlo", "--config", str(config), "--out", str(out_dir),
                 "--workers", "1", "--cache-dir", str(tmp_path / "cache")]) == 0
    assert (out_dir / "tiny.txt").exists() and (out_dir / "tiny.csv").exists()
    assert "tiny: rejection percentages" in capsys.readouterr().out


def test_missing_file_fails(tmp_path, capsys):
    assert main(["test", str(tmp_path / "nope.csv")]) == 1
    assert "panelbreak: error" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
