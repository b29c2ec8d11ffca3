import json

import numpy as np
import pytest

from poolrl.errors import ValidationError
from poolrl.mdp import enumerate_policies_oracle
from poolrl.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    MetricsRecord,
    build_environment,
    ci_half_width,
    emit,
    load_config,
    metrics_csv,
    run_experiment,
    summarize,
)


def small(**kw):
    base = dict(environment="synthetic", agent="personalized", iterations=6, replications=3, seed=4, mode="case-study", arrivals=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_oracle_has_zero_regret():
    record = run_experiment(small(agent="oracle"))
    assert not record.regret.any()
    assert record.arrivals.sum() == 3 * 6 * 2 * 5


def test_anti_oracle_regret_is_the_worst_gap():
    record = run_experiment(small(agent="anti-oracle", replications=1, iterations=2, arrivals=1))
    env = build_environment(record.config)
    expected = 0.0
    for i in env.indices("target"):
        best, _, worst, _ = enumerate_policies_oracle(env.class_mdps[i])
        expected += best - worst
    assert record.regret[0].tolist() == pytest.approx([expected, expected])


def test_ci_half_width():
    assert ci_half_width([1.0]) is None
    samples = np.array([1.0, 2.0, 3.0, 4.0])
    assert ci_half_width(samples) == pytest.approx(1.96 * samples.std(ddof=1) / 2)


def test_single_replication_leaves_ci_blank():
    summary = summarize(run_experiment(small(replications=1)))
    lines = metrics_csv(summary).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].split(",")[2] == ""
    assert not summary.ci_available and summary.totals["total_regret_ci_half"] is None


def test_summary_totals_and_cumulative_column():
    record = run_experiment(small())
    summary = summarize(record)
    assert summary.totals["total_regret"] == pytest.approx(record.regret.sum(axis=1).mean())
    assert summary.cum_regret[-1] == pytest.approx(summary.totals["total_regret"])
    assert 0 <= summary.totals["readmission_rate"] <= 1


def test_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(run_experiment(small(agent="data-pooling", history_size=200)), csv_path=a)
    emit(run_experiment(small(agent="data-pooling", history_size=200)), csv_path=b)
    assert a.read_bytes() == b.read_bytes()


def test_parallel_workers_match_serial():
    serial = run_experiment(small())
    parallel = run_experiment(small(workers=2))
    assert np.array_equal(serial.regret, parallel.regret)


def test_empty_metrics_are_rejected():
    config = small()
    empty = MetricsRecord(config, np.zeros((1, 0)), np.zeros((1, 0)), np.zeros((1, 0)), np.zeros((1, 0)), [None])
    with pytest.raises(ValidationError):
        summarize(empty)


def test_config_validation():
    with pytest.raises(ValidationError):
        small(iterations=0)
    with pytest.raises(ValidationError):
        small(mode="fast")
    with pytest.raises(ValidationError):
        small(params={"temperature": 1})
    with pytest.raises(ValidationError):
        small(perturbation={"kind": "loud"})


def test_load_config_resolves_and_reports(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"agent": "complete", "iterations": 3}))
    assert load_config(path).agent == "complete"
    path.write_text("{\n  \"agent\": ,\n}")
    with pytest.raises(ValidationError) as info:
        load_config(path)
    assert info.value.line == 2
    path.write_text(json.dumps({"agnet": "complete"}))
    with pytest.raises(ValidationError):
        load_config(path)


def test_contextual_agent_runs_without_decisions():
    record = run_experiment(small(agent="contextual-q", replications=1, iterations=3, history_size=200))
    assert record.decisions == [None]
    assert record.regret.shape == (1, 3)
