import csv
import json

import pytest

from adsdp.cli import main

SMALL = ["--users", "300", "--publishers", "3", "--days", "10", "--trials", "2"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_results_and_summary(tmp_path, capsys):
    out = tmp_path / "res.csv"
    assert main(["run", *SMALL, "--method", "adsbpc", "--method", "ipa", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["method", "dataset", "scenario", "rho", "n", "trial", "error"]
    assert [r[0] for r in rows[1:]] == ["adsbpc", "adsbpc", "ipa", "ipa"]
    assert [r[5] for r in rows[1:]] == ["0", "1", "0", "1"]
    summary = _rows(tmp_path / "res_summary.csv")
    assert [r[0] for r in summary[1:]] == ["adsbpc", "ipa"]
    assert "adsbpc" in capsys.readouterr().out


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", *SMALL, "--scenario", "window_maxvar", "--seed", "7"]
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--trials", "0"],
        ["run", "--method", "nope"],
        ["run", "--scenario", "nope"],
        ["run", "--dataset", "nope"],
        ["sweep", "--axis", "rho", "--values"],
        ["sweep", "--axis", "n", "--values", "2.5"],
    ],
)
def test_usage_errors(tmp_path, argv, capsys):
    code = None
    try:
        code = main([*argv, "--out", str(tmp_path / "x.csv")])
    except SystemExit as exc:  # argparse rejects choices itself
        code = exc.code
    assert code == 2


def test_single_value_sweep_equals_run(tmp_path):
    run_out, sweep_out = tmp_path / "run.csv", tmp_path / "sweep.csv"
    assert main(["run", *SMALL, "--method", "umm", "--method", "adsbpc", "--out", str(run_out)]) == 0
    assert main(["sweep", *SMALL, "--method", "umm", "--method", "adsbpc", "--axis", "rho", "--values", "1", "--out", str(sweep_out)]) == 0
    assert _rows(run_out) == _rows(sweep_out)
    plot = _rows(tmp_path / "sweep_plot.tsv")
    assert plot[0] == ["method\taxis\tvalue\terror\ttrial_std"]


def test_n_sweep_rows(tmp_path):
    out = tmp_path / "n.csv"
    assert main(["sweep", "--users", "200", "--publishers", "2", "--trials", "1", "--method", "ipa", "--axis", "n", "--values", "7", "15", "--out", str(out)]) == 0
    assert [r[4] for r in _rows(out)[1:]] == ["7", "15"]


def test_config_roundtrip_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    assert main(["config", "--out", str(cfg)]) == 0
    data = json.loads(cfg.read_text())
    assert data["rho_total"] == 1.0 and data["svt"]["T_up"] == 50.0 and data["l"] == 7
    out = tmp_path / "r.csv"
    assert main(["run", *SMALL, "--method", "ipa", "--config", str(cfg), "--out", str(out)]) == 0
    data["split"] = [0.5, 0.5, 0.5]
    cfg.write_text(json.dumps(data))
    assert main(["run", *SMALL, "--config", str(cfg), "--out", str(out)]) == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["run", *SMALL, "--config", str(cfg), "--out", str(out)]) == 4
    cfg.write_text("{not json")
    assert main(["run", *SMALL, "--config", str(cfg), "--out", str(out)]) == 3


def test_generate_then_run_from_csv(tmp_path):
    d = tmp_path / "data"
    assert main(["generate", "--family", "zipf", "--users", "100", "--publishers", "2", "--days", "8", "--ticks-per-day", "1000", "--out", str(d)]) == 0
    assert (d / "impressions.csv").exists() and (d / "conversions.csv").exists()
    out = tmp_path / "r.csv"
    assert main(["run", "--dataset", str(d), "--trials", "1", "--method", "bin", "--model", "uni", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[1][1] == "data" and rows[1][4] == "8"


def test_missing_csv_input_is_data_error(tmp_path):
    d = tmp_path / "broken"
    d.mkdir()
    assert main(["run", "--dataset", str(d), "--trials", "1", "--out", str(tmp_path / "r.csv")]) == 3
