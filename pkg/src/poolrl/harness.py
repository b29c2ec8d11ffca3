"""Seeded multi-replication experiments, regret bookkeeping and output files.

Replication r draws everything from ``SeedSequence(seed + r)``, split into
three child streams in a fixed order: historical data generation, patient
simulation and agent perturbations. The last two are split again per target
class. Two agents run with the same seed therefore see the same historical
data and, as long as they play the same policies, the same patients.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .agents import AgentParams, ContextualPolicy, FixedPolicyAgent, PerturbationSpec, make_agent
from .environments import Environment, HistoricalDataset, generate_historical_dataset, load_environment
from .errors import PoolRLError, ValidationError
from .estimators import CASE_STUDY, THEORETICAL
from .mdp import DeterministicPolicy, enumerate_policies_oracle, policy_evaluation, value_iteration

CSV_COLUMNS = ("iteration", "mean_regret", "ci_half", "cum_regret", "mean_cost", "readm_rate")
ORACLE = "oracle"
ANTI_ORACLE = "anti-oracle"


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str = "synthetic"
    agent: str = "data-pooling"
    iterations: int = 50
    replications: int = 20
    seed: int = 0
    arrivals: int | None = None
    targets: tuple[str, ...] | None = None
    histories: tuple[str, ...] | None = None
    history_size: int | None = None
    behavior: str = "zero"
    privacy: str = "samples"
    mode: str = THEORETICAL
    params: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    workers: int = 1
    out_csv: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.replications < 1:
            raise ValidationError("iterations and replications must be at least 1")
        if self.mode not in (THEORETICAL, CASE_STUDY):
            raise ValidationError(f"mode must be '{THEORETICAL}' or '{CASE_STUDY}'")
        if self.privacy not in ("samples", "aggregates-only"):
            raise ValidationError("privacy must be 'samples' or 'aggregates-only'")
        if self.arrivals is not None and self.arrivals < 1:
            raise ValidationError("arrivals must be at least 1")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        for name in ("targets", "histories"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))
        self.agent_params()
        self.perturbation_spec()

    def agent_params(self, env: Environment | None = None) -> AgentParams:
        known = {f.name for f in fields(AgentParams)}
        unknown = set(self.params) - known
        if unknown:
            raise ValidationError(f"unknown agent parameters {sorted(unknown)}")
        values = dict(self.params)
        values["mode"] = self.mode
        if env is not None:
            values.setdefault("intervention_cost", env.spec.intervention_cost)
            values.setdefault("readmission_penalty", env.spec.readmission_penalty)
        return AgentParams(**values)

    def perturbation_spec(self) -> PerturbationSpec:
        known = {f.name for f in fields(PerturbationSpec)}
        unknown = set(self.perturbation) - known
        if unknown:
            raise ValidationError(f"unknown perturbation settings {sorted(unknown)}")
        values = dict(self.perturbation)
        values.setdefault("kind", "case-study-gaussian" if self.mode == CASE_STUDY else "gaussian-ts")
        return PerturbationSpec(**values)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        for name in ("targets", "histories"):
            if out[name] is not None:
                out[name] = list(out[name])
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update({k: v for k, v in changes.items()})
        return ExperimentConfig(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    return ExperimentConfig(**data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc.msg}", line=exc.lineno, source=str(path)) from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object", source=str(path))
    env = data.get("environment")
    if isinstance(env, str) and not Path(env).is_absolute() and (path.parent / env).exists():
        data["environment"] = str(path.parent / env)
    return config_from_dict(data)


def build_environment(config: ExperimentConfig) -> Environment:
    env = Environment(load_environment(config.environment)).with_roles(config.targets, config.histories)
    if not env.indices("target"):
        raise ValidationError("the environment has no target class")
    return env


@dataclass
class ReplicationResult:
    regret: np.ndarray  # (T,)
    cost: np.ndarray
    readmissions: np.ndarray
    arrivals: np.ndarray
    decisions: np.ndarray | None  # (T, targets, H, S) for tabular agents


@dataclass
class MetricsRecord:
    config: ExperimentConfig
    regret: np.ndarray  # (R, T)
    cost: np.ndarray
    readmissions: np.ndarray
    arrivals: np.ndarray
    decisions: list
    wall_clock: float = 0.0

    @property
    def replications(self) -> int:
        return self.regret.shape[0]


def _make_agents(config: ExperimentConfig, env: Environment, historical: HistoricalDataset, streams) -> list:
    params = config.agent_params(env)
    spec = config.perturbation_spec()
    agents = []
    for stream, i in zip(streams, env.indices("target")):
        rng = np.random.default_rng(stream)
        mdp = env.class_mdps[i]
        if config.agent in (ORACLE, ANTI_ORACLE):
            if config.agent == ORACLE:
                policy = value_iteration(mdp)[1]
            else:
                policy = enumerate_policies_oracle(mdp)[3][0]
            agents.append(FixedPolicyAgent(env.structure, config.iterations, policy, params=params, perturbation=spec, rng=rng))
        else:
            agents.append(
                make_agent(config.agent, env.structure, config.iterations, params=params, perturbation=spec, rng=rng, historical=historical)
            )
    return agents


def run_replication(config: ExperimentConfig, env: Environment, r: int) -> ReplicationResult:
    T = config.iterations
    targets = env.indices("target")
    root = np.random.SeedSequence(config.seed + r)
    hist_seq, env_seq, agent_seq = root.spawn(3)
    sizes = None
    if config.history_size is not None:
        sizes = {env.classes[i].name: config.history_size for i in env.indices("history")}
    historical = generate_historical_dataset(env, config.behavior, sizes, np.random.default_rng(hist_seq), config.privacy)
    agents = _make_agents(config, env, historical, agent_seq.spawn(len(targets)))
    env_rngs = [np.random.default_rng(s) for s in env_seq.spawn(len(targets))]
    optimal = [value_iteration(env.class_mdps[i])[2] for i in targets]

    regret = np.zeros(T)
    cost = np.zeros(T)
    readmitted = np.zeros(T)
    arrivals = np.zeros(T)
    decisions = None
    tabular = True
    for t in range(1, T + 1):
        row = []
        for j, i in enumerate(targets):
            agent, rng, mdp = agents[j], env_rngs[j], env.class_mdps[i]
            try:
                plan = agent.policy_for_iteration(t)
            except PoolRLError as exc:
                raise type(exc)(f"replication {r}, iteration {t}, target {env.classes[i].name}: {exc}") from exc
            count = config.arrivals if config.arrivals is not None else env.classes[i].arrivals
            trajectories = []
            class_gap = None
            if isinstance(plan, DeterministicPolicy):
                class_gap = optimal[j] - policy_evaluation(mdp, plan)[0, mdp.initial_state]
                row.append(plan.actions)
            else:
                tabular = False
            for _ in range(count):
                x = env.draw_features(i, rng)
                if isinstance(plan, ContextualPolicy):
                    policy = plan.for_features(x)
                    gap = optimal[j] - policy_evaluation(mdp, policy)[0, mdp.initial_state]
                else:
                    policy, gap = plan, class_gap
                regret[t - 1] += gap
                traj = env.simulate_patient(i, x, policy, rng)
                cost[t - 1] += mdp.objective(traj.total_reward)
                readmitted[t - 1] += env.structure.is_absorbing(traj.final_state)
                trajectories.append(traj)
            arrivals[t - 1] += count
            agent.absorb(trajectories)
        if tabular:
            if decisions is None:
                decisions = np.zeros((T, len(targets)) + row[0].shape, dtype=np.int64)
            decisions[t - 1] = np.stack(row)
    return ReplicationResult(regret, cost, readmitted, arrivals, decisions if tabular else None)


def _replication_job(args):
    config, r = args
    return run_replication(config, build_environment(config), r)


def run_experiment(config: ExperimentConfig) -> MetricsRecord:
    start = time.perf_counter()
    env = build_environment(config)
    reps = range(config.replications)
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_replication_job, [(config, r) for r in reps]))
    else:
        results = [run_replication(config, env, r) for r in reps]
    return MetricsRecord(
        config=config,
        regret=np.stack([res.regret for res in results]),
        cost=np.stack([res.cost for res in results]),
        readmissions=np.stack([res.readmissions for res in results]),
        arrivals=np.stack([res.arrivals for res in results]),
        decisions=[res.decisions for res in results],
        wall_clock=time.perf_counter() - start,
    )


@dataclass
class Summary:
    mean_regret: np.ndarray
    ci_half: np.ndarray | None
    cum_regret: np.ndarray
    mean_cost: np.ndarray
    readm_rate: np.ndarray
    totals: dict[str, Any]
    ci_available: bool


def ci_half_width(samples, axis: int = 0):
    """1.96 * sample std / sqrt(R); None when there is a single replication."""
    samples = np.asarray(samples, dtype=float)
    R = samples.shape[axis]
    if R < 2:
        return None
    return 1.96 * samples.std(axis=axis, ddof=1) / math.sqrt(R)


def summarize(record: MetricsRecord) -> Summary:
    regret, cost = record.regret, record.cost
    if regret.size == 0:
        raise ValidationError("no metrics to summarize")
    rate = record.readmissions / np.maximum(record.arrivals, 1)
    mean_regret = regret.mean(axis=0)
    per_rep_total = regret.sum(axis=1)
    per_rep_cost = cost.sum(axis=1)
    total_ci = ci_half_width(per_rep_total)
    cost_ci = ci_half_width(per_rep_cost)
    totals = {
        "total_regret": float(mean_regret.sum()),
        "total_regret_ci_half": None if total_ci is None else float(total_ci),
        "total_cost": float(per_rep_cost.mean()),
        "total_cost_ci_half": None if cost_ci is None else float(cost_ci),
        "readmission_rate": float(record.readmissions.sum() / max(record.arrivals.sum(), 1)),
        "replications": int(record.replications),
        "iterations": int(regret.shape[1]),
    }
    return Summary(
        mean_regret=mean_regret,
        ci_half=ci_half_width(regret),
        cum_regret=np.cumsum(mean_regret),
        mean_cost=cost.mean(axis=0),
        readm_rate=rate.mean(axis=0),
        totals=totals,
        ci_available=total_ci is not None,
    )


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def metrics_csv(summary: Summary) -> str:
    T = len(summary.mean_regret)
    if T == 0:
        raise ValidationError("no iterations to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in range(T):
        ci = None if summary.ci_half is None else summary.ci_half[t]
        writer.writerow(
            [t + 1, _fmt(summary.mean_regret[t]), _fmt(ci), _fmt(summary.cum_regret[t]), _fmt(summary.mean_cost[t]), _fmt(summary.readm_rate[t])]
        )
    return buf.getvalue()


def summary_json(record: MetricsRecord, summary: Summary, include_clock: bool = True) -> str:
    data = {
        "config": record.config.to_dict(),
        "totals": summary.totals,
        "ci_available": summary.ci_available,
    }
    if include_clock:
        data["wall_clock_seconds"] = round(record.wall_clock, 3)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def emit(record: MetricsRecord, csv_path=None, json_path=None, summary: Summary | None = None) -> Summary:
    summary = summary or summarize(record)
    if csv_path is not None:
        Path(csv_path).write_text(metrics_csv(summary))
    if json_path is not None:
        Path(json_path).write_text(summary_json(record, summary))
    return summary
