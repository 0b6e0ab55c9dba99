import csv
import io
import json
import subprocess
import sys

import pytest

from ewsim import cli, fock


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0
    assert "croca_full" in out and "DeBroglie3D" in out


def test_run_csv(capsys):
    code, out, _ = run(["run", "--experiment", "mz", "--samples", "500"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["model"] for r in rows} == {"CI", "Bohm3ND", "DeBroglie3D"}
    p1 = [r for r in rows if r["model"] == "CI" and r["statistic"] == "P(1)"][0]
    assert float(p1["value"]) == pytest.approx(1.0)


def test_run_json_to_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["run", "--experiment", "hom", "--model", "CI", "--format", "json",
                      "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["provenance"]["experiment"] == "hom"
    assert doc["rows"][0]["statistic"] == "P(1&2)"


def test_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--experiment", "hom", "--model", "CI", "--param", "tau",
                        "--from", "-1", "--to", "1", "--steps", "5"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5 and "tau" in rows[0]
    vals = [float(r["value"]) for r in rows]
    assert min(vals) == vals[2]


def test_sweep_json_has_fits(capsys):
    code, out, _ = run(["sweep", "--experiment", "croca_full", "--model", "CI", "--param", "delta_phi",
                        "--from", "0", "--to", "3", "--steps", "5", "--format", "json"], capsys)
    assert code == 0
    fits = json.loads(out)["fits"]
    assert any(f["statistic"] == "P(1&2|both in MZ)" for f in fits)


def test_compare_table(capsys):
    code, out, _ = run(["compare", "--experiment", "croca_full", "--samples", "20000", "--seed", "3"], capsys)
    assert code == 0
    rows = {r["statistic"]: r for r in csv.DictReader(io.StringIO(out))}
    assert rows["P(2|3)"]["diverged"] == "yes"
    assert rows["P(3&4)"]["diverged"] == "no"


@pytest.mark.parametrize("argv", [
    ["run", "--experiment", "nope"],
    ["run", "--experiment", "mz", "--bogus", "1"],
    ["run", "--experiment", "mz", "--tau", "1"],
    ["run", "--experiment", "mz", "--delta-phi", "9"],
    ["run", "--experiment", "mz", "--samples", "x"],
    ["sweep", "--experiment", "mz", "--param", "sigma", "--from", "0", "--to", "1", "--steps", "2"],
    ["run"],
    [],
])
def test_usage_errors_exit_1(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1 and "error" in err and out == ""


def test_unknown_config_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nexperiment = mz\nsampels = 10\n")
    code, _, err = run(["run", "--config", str(cfg)], capsys)
    assert code == 1 and ":3" in err and "sampels" in err


def test_engine_failure_exit_2(monkeypatch, capsys):
    def boom(*a, **k):
        raise fock.FockError("synthetic failure")
    monkeypatch.setattr(fock, "exact_distribution", boom)
    code, _, err = run(["run", "--experiment", "mz", "--model", "CI"], capsys)
    assert code == 2 and "CI" in err


def test_env_samples_and_flag_precedence(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv(cli.SAMPLES_ENV, "123")
    args = cli.make_parser().parse_args(["run", "--experiment", "mz"])
    assert cli.resolve(args, "run").n_samples == 123
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nexperiment = mz\nsamples = 77\n")
    args = cli.make_parser().parse_args(["run", "--config", str(cfg)])
    assert cli.resolve(args, "run").n_samples == 77
    args = cli.make_parser().parse_args(["run", "--config", str(cfg), "--samples", "5"])
    assert cli.resolve(args, "run").n_samples == 5


def test_dump_config_round_trip(tmp_path, capsys):
    dumped = tmp_path / "d.ini"
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    code, _, _ = run(["sweep", "--experiment", "croca_full", "--delta-theta", "uniform-random",
                      "--param", "delta_phi", "--from", "0", "--to", "1.5", "--steps", "3",
                      "--samples", "2000", "--seed", "4", "--out", str(first),
                      "--dump-config", str(dumped)], capsys)
    assert code == 0
    code, _, _ = run(["sweep", "--config", str(dumped), "--out", str(second)], capsys)
    assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ewsim", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "models:" in r.stdout
