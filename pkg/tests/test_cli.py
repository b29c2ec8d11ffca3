import csv
import io
import json

import pytest

from poolrl.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_shipped_fixture(capsys):
    code, out, _ = run_cli(capsys, "solve", "priority_pair_a")
    data = json.loads(out)
    assert code == 0
    assert data["high"]["sequence"] == "10" and data["low"]["sequence"] == "11"
    assert data["high"]["sense"] == "minimize"


def test_solve_methods_agree(capsys):
    values = []
    for method in ("value", "policy", "enumerate"):
        _, out, _ = run_cli(capsys, "solve", "historical_clusters", "--method", method)
        values.append({k: v["value"] for k, v in json.loads(out).items()})
    assert values[0] == pytest.approx(values[1]) and values[0] == pytest.approx(values[2])


def test_solve_mdp_file(tmp_path, capsys):
    path = tmp_path / "chain.mdp"
    path.write_text(
        "horizon = 1\nstates = 1\nactions = 2\n[reward]\n1 0 0 0\n1 0 1 1\n[transition]\n1 0 0 1\n1 0 1 1\n"
    )
    code, out, _ = run_cli(capsys, "solve", str(path))
    assert code == 0 and json.loads(out)["model"]["value"] == 1.0


def test_radii_csv(capsys):
    code, out, _ = run_cli(capsys, "radii", "--n", "0:2", "--N", "100")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert float(rows[0]["weight"]) == 0.0 and float(rows[0]["hoeffding_V"]) == 4.0


def test_run_writes_outputs(tmp_path, capsys):
    csv_path, json_path = tmp_path / "m.csv", tmp_path / "s.json"
    code, out, _ = run_cli(
        capsys, "run", "--agent", "personalized", "--iterations", "3", "--replications", "2", "--arrivals", "4",
        "--mode", "case-study", "--out-csv", str(csv_path), "--out-json", str(json_path),
    )
    assert code == 0 and out == ""
    assert csv_path.read_text().splitlines()[0] == "iteration,mean_regret,ci_half,cum_regret,mean_cost,readm_rate"
    summary = json.loads(json_path.read_text())
    assert summary["totals"]["replications"] == 2 and summary["config"]["mode"] == "case-study"


def test_run_reads_config_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"agent": "complete", "iterations": 2, "replications": 1, "arrivals": 2, "history_size": 50}))
    code, out, _ = run_cli(capsys, "run", "--config", str(cfg), "--agent", "oracle", "--privacy", "aggregates-only")
    data = json.loads(out)
    assert code == 0 and data["config"]["agent"] == "oracle" and data["config"]["privacy"] == "aggregates-only"
    assert data["totals"]["total_regret"] == 0.0
    assert data["totals"]["total_regret_ci_half"] is None


def test_tuned_flag_applies_presets(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--agent", "data-pooling", "--tuned", "--iterations", "1", "--replications", "1", "--arrivals", "1", "--history-size", "10")
    cfg = json.loads(out)["config"]
    assert cfg["params"]["gamma"] == 0.7 and cfg["perturbation"]["explore_sigma"] == 0.1


def test_errors_exit_with_code_two(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", "--agent", "psychic", "--iterations", "1")
    assert code == 2 and "psychic" in err
    code, _, err = run_cli(capsys, "solve", "no-such-model")
    assert code == 2
    with pytest.raises(SystemExit) as info:
        main(["run", "--mode", "fast"])
    assert info.value.code == 2


def test_check_suites(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "check", "--suite", "prioritization")
    assert code == 0 and json.loads(out)["ok"]
    out_path = tmp_path / "check.json"
    code, _, _ = run_cli(capsys, "check", "--suite", "temporal", "--instances", "50", "--out-json", str(out_path))
    report = json.loads(out_path.read_text())
    assert code == 0 and report["temporal"]["checked"] == 50


def test_sweep_grid(capsys):
    code, out, _ = run_cli(
        capsys, "sweep", "--agent", "data-pooling", "--sigma", "0.1,0.2", "--extra", "0.7", "--iterations", "2",
        "--replications", "1", "--arrivals", "2", "--history-size", "20", "--mode", "case-study",
    )
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2
