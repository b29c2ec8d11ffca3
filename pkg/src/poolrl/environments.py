"""Post-discharge readmission environments and historical data generation.

Every readmission model has two states, 0 (alive, not readmitted) and 1
(readmitted, absorbing), and two actions, 0 (no intervention) and 1
(intervene). ``p[h, a]`` is the probability of moving into the readmitted
state during week h given the patient is still out of hospital. Costs are
``c_a * 1(a = 1) + c_R * 1(readmitted this week)``; the models store their
negation as rewards.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .estimators import AggregateStats, TrajectoryCounts
from .mdp import MINIMIZE, DeterministicPolicy, FiniteHorizonMdp, MdpStructure, Step, Trajectory, value_iteration
from .textio import Document, parse_document, parse_floats, render_document

TARGET = "target"
HISTORY = "history"
ROLES = (TARGET, HISTORY)


def readmission_mdp(probs, intervention_cost: float, readmission_penalty: float) -> FiniteHorizonMdp:
    """Two-state absorbing model from a (H, 2) table of weekly readmission probabilities."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValidationError(f"weekly probabilities must have shape (H, 2), got {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValidationError("weekly probabilities must lie in [0, 1]")
    H = p.shape[0]
    action_cost = np.array([0.0, intervention_cost])
    transition = np.zeros((H, 2, 2, 2))
    transition[:, 0, :, 0] = 1 - p
    transition[:, 0, :, 1] = p
    transition[:, 1, :, 1] = 1.0
    outcome_cost = np.zeros((H, 2, 2, 2))
    outcome_cost[:, 0, :, :] = action_cost[None, :, None]
    outcome_cost[:, 0, :, 1] += readmission_penalty
    cost = np.zeros((H, 2, 2))
    cost[:, 0, :] = action_cost[None, :] + readmission_penalty * p
    return FiniteHorizonMdp(
        mean_reward=-cost + 0.0,
        transition=transition,
        initial_state=0,
        sense=MINIMIZE,
        absorbing=(False, True),
        transition_reward=-outcome_cost + 0.0,
    )


@dataclass(frozen=True)
class ReadmissionClass:
    name: str
    probs: np.ndarray  # (H, 2)
    role: str = TARGET
    arrivals: int = 1
    history_size: int = 0
    reported_policy: str | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def gaps(self) -> np.ndarray:
        """Treatment effect per week, p[h, 0] - p[h, 1]."""
        return self.probs[:, 0] - self.probs[:, 1]

    @property
    def peak_epoch(self) -> int:
        """1-based week with the highest untreated risk (first one on ties)."""
        return int(np.argmax(self.probs[:, 0])) + 1


@dataclass(frozen=True)
class ReadmissionSpec:
    horizon: int
    intervention_cost: float
    readmission_penalty: float
    classes: tuple[ReadmissionClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.horizon < 1:
            raise ValidationError("horizon must be positive")
        if self.intervention_cost < 0 or self.readmission_penalty < 0:
            raise ValidationError("costs must be nonnegative")
        for cls in self.classes:
            if cls.probs.shape != (self.horizon, 2):
                raise ValidationError(f"class '{cls.name}' needs {self.horizon} weeks of (untreated, treated) probabilities")
            if np.any(cls.probs < 0) or np.any(cls.probs > 1):
                raise ValidationError(f"class '{cls.name}' has probabilities outside [0, 1]")
            if cls.role not in ROLES:
                raise ValidationError(f"class '{cls.name}' has unknown role '{cls.role}'")
            if np.any(cls.gaps < 0):
                warnings.warn(f"class '{cls.name}': intervention raises readmission risk in some week", stacklevel=2)

    @property
    def beta(self) -> float:
        return self.intervention_cost / self.readmission_penalty

    def index(self, name: str) -> int:
        for i, cls in enumerate(self.classes):
            if cls.name == name:
                return i
        raise KeyError(name)


def simulate_readmission(probs, intervention_cost: float, readmission_penalty: float, policy: DeterministicPolicy, rng, features=None) -> Trajectory:
    """Fast rollout of the two-state model; one uniform draw per week, readmitted iff u >= 1 - p."""
    probs = np.asarray(probs, dtype=float)
    actions = policy.actions[:, 0]
    steps = []
    for h in range(1, len(probs) + 1):
        a = int(actions[h - 1])
        readmit = rng.random() >= 1 - probs[h - 1, a]
        cost = (intervention_cost if a == 1 else 0.0) + (readmission_penalty if readmit else 0.0)
        nxt = 1 if readmit else 0
        steps.append(Step(h, 0, a, -cost + 0.0, nxt))
        if readmit:
            break
    feats = None if features is None else tuple(float(x) for x in np.atleast_1d(features))
    return Trajectory(tuple(steps), 0, feats)


def build_readmission_mdp(spec: ReadmissionSpec, index: int) -> FiniteHorizonMdp:
    return readmission_mdp(spec.classes[index].probs, spec.intervention_cost, spec.readmission_penalty)


@dataclass(frozen=True)
class SyntheticClass:
    """Linear-risk class: 30-day risk c1 a + c2 x + c3, spread over weeks by ``split``."""

    name: str
    role: str
    treatment_coef: float
    feature_coef: float
    intercept: float
    feature_mean: float
    feature_std: float
    split: tuple[float, ...]
    mixture: float = 1.0
    arrivals: int = 1
    history_size: int = 0
    reported_risk: tuple[float, float] | None = None
    reported_policy: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(float(x) for x in self.split))
        if self.reported_risk is not None:
            object.__setattr__(self, "reported_risk", tuple(float(x) for x in self.reported_risk))

    def risk(self, action, x):
        return self.treatment_coef * np.asarray(action) + self.feature_coef * np.asarray(x) + self.intercept

    @property
    def effective_feature(self) -> float:
        """Feature value whose untreated risk equals the reported class-average risk.

        Falls back to the feature mean when no average risk is recorded.
        """
        if self.reported_risk is None or self.feature_coef == 0:
            return self.feature_mean
        return (self.reported_risk[0] - self.intercept) / self.feature_coef

    def feature_bounds(self) -> tuple[float, float]:
        """Feature interval on which the risk stays strictly inside (0, 1) for both actions."""
        if self.feature_coef == 0:
            return (-math.inf, math.inf)
        ends = []
        for a in (0, 1):
            base = self.treatment_coef * a + self.intercept
            lo, hi = (0 - base) / self.feature_coef, (1 - base) / self.feature_coef
            ends.append((min(lo, hi), max(lo, hi)))
        return (max(e[0] for e in ends), min(e[1] for e in ends))


@dataclass(frozen=True)
class SyntheticSpec:
    horizon: int
    intervention_cost: float
    readmission_penalty: float
    classes: tuple[SyntheticClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.intervention_cost < 0 or self.readmission_penalty < 0:
            raise ValidationError("costs must be nonnegative")
        for cls in self.classes:
            self.validate_class(cls)

    def validate_class(self, cls: SyntheticClass) -> None:
        if cls.role not in ROLES:
            raise ValidationError(f"class '{cls.name}' has unknown role '{cls.role}'")
        if len(cls.split) != self.horizon:
            raise ValidationError(f"class '{cls.name}' split needs {self.horizon} entries")
        if any(a < 0 for a in cls.split) or abs(sum(cls.split) - 1.0) > 1e-9:
            raise ValidationError(f"class '{cls.name}' split must be nonnegative and sum to 1, got {sum(cls.split)!r}")
        if not cls.feature_std > 0:
            raise ValidationError(f"class '{cls.name}' feature std must be positive")
        lo, hi = cls.feature_bounds()
        if not (lo < cls.feature_mean - 4 * cls.feature_std and cls.feature_mean + 4 * cls.feature_std < hi):
            raise ValidationError(f"class '{cls.name}' risk leaves (0, 1) within four standard deviations of the feature mean")

    @property
    def beta(self) -> float:
        return self.intervention_cost / self.readmission_penalty

    def index(self, name: str) -> int:
        for i, cls in enumerate(self.classes):
            if cls.name == name:
                return i
        raise KeyError(name)


def synthetic_weekly_probs(spec: SyntheticSpec, index: int, x: float | None = None) -> np.ndarray:
    """(H, 2) table p[h, a] = split[h] * (c1 a + c2 x + c3), clamped to [0, 1].

    x defaults to the class feature mean.
    """
    cls = spec.classes[index]
    if x is None:
        x = cls.feature_mean
    alpha = np.asarray(cls.split)[:, None]
    return np.clip(alpha * cls.risk(np.array([0, 1])[None, :], x), 0.0, 1.0)


def sample_feature(cls: SyntheticClass, rng: np.random.Generator) -> float:
    """Normal draw around the class mean, redrawn until the risk stays inside (0, 1)."""
    lo, hi = cls.feature_bounds()
    while True:
        x = rng.normal(cls.feature_mean, cls.feature_std)
        if lo < x < hi:
            return float(x)


def synthetic_as_readmission(spec: SyntheticSpec, use_effective_feature: bool = False) -> ReadmissionSpec:
    """Class-level readmission spec at the class mean (or effective) feature."""
    classes = []
    for i, cls in enumerate(spec.classes):
        x = cls.effective_feature if use_effective_feature else cls.feature_mean
        classes.append(
            ReadmissionClass(cls.name, synthetic_weekly_probs(spec, i, x), cls.role, cls.arrivals, cls.history_size, cls.reported_policy)
        )
    return ReadmissionSpec(spec.horizon, spec.intervention_cost, spec.readmission_penalty, tuple(classes))


# Environment file format. See data/*.env for the shipped environments.

def _roles_row(doc: Document, lineno: int, role: str) -> str:
    if role not in ROLES:
        doc.fail(f"role must be one of {ROLES}, got '{role}'", lineno)
    return role


def _int_token(doc: Document, lineno: int, token: str, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        doc.fail(f"{what} must be an integer, got '{token}'", lineno)
    if value < 0:
        doc.fail(f"{what} must be nonnegative", lineno)
    return value


def _named_rows(doc: Document, section: str, width: int | None, names: Sequence[str]) -> dict[str, tuple[int, list[str]]]:
    out = {}
    for lineno, tokens in doc.rows(section, required=False):
        if tokens[0] not in names:
            doc.fail(f"[{section}] refers to unknown class '{tokens[0]}'", lineno)
        if tokens[0] in out:
            doc.fail(f"[{section}] repeats class '{tokens[0]}'", lineno)
        if width is not None and len(tokens) != width + 1:
            doc.fail(f"[{section}] row needs {width + 1} columns, got {len(tokens)}", lineno)
        out[tokens[0]] = (lineno, tokens[1:])
    return out


def _parse_policy(doc: Document, lineno: int, token: str, horizon: int) -> str:
    if len(token) != horizon or set(token) - {"0", "1"}:
        doc.fail(f"policy '{token}' must be {horizon} binary digits", lineno)
    return token


def environment_from_text(text: str, source: str | None = None):
    doc = parse_document(text, source)
    kind = doc.require("kind")
    H = doc.get_int("horizon")
    c_a = doc.get_float("intervention_cost")
    c_r = doc.get_float("readmission_penalty")
    if kind == "readmission":
        classes = []
        names = []
        for lineno, tokens in doc.rows("classes"):
            if len(tokens) != 4 + 2 * H:
                doc.fail(f"class row needs {4 + 2 * H} columns (name role arrivals history_size and {2 * H} probabilities)", lineno)
            name, role = tokens[0], _roles_row(doc, lineno, tokens[1])
            if name in names:
                doc.fail(f"duplicate class '{name}'", lineno)
            arrivals = _int_token(doc, lineno, tokens[2], "arrivals")
            size = _int_token(doc, lineno, tokens[3], "history_size")
            probs = np.array(parse_floats(doc, lineno, tokens[4:])).reshape(H, 2)
            if np.any(probs < 0) or np.any(probs > 1):
                doc.fail("probabilities must lie in [0, 1]", lineno)
            names.append(name)
            classes.append(ReadmissionClass(name, probs, role, arrivals, size))
        policies = _named_rows(doc, "reported_policy", 1, names)
        for name, (lineno, tokens) in policies.items():
            i = names.index(name)
            classes[i] = replace(classes[i], reported_policy=_parse_policy(doc, lineno, tokens[0], H))
        try:
            return ReadmissionSpec(H, c_a, c_r, tuple(classes))
        except ValidationError as exc:
            doc.fail(exc.message)
    if kind == "synthetic":
        classes = []
        names = []
        for lineno, tokens in doc.rows("classes"):
            if len(tokens) != 10:
                doc.fail(
                    "class row needs 10 columns: name role arrivals history_size treatment_coef feature_coef intercept feature_mean feature_std mixture",
                    lineno,
                )
            name, role = tokens[0], _roles_row(doc, lineno, tokens[1])
            if name in names:
                doc.fail(f"duplicate class '{name}'", lineno)
            arrivals = _int_token(doc, lineno, tokens[2], "arrivals")
            size = _int_token(doc, lineno, tokens[3], "history_size")
            c1, c2, c3, mu, sd, q = parse_floats(doc, lineno, tokens[4:])
            names.append(name)
            classes.append(SyntheticClass(name, role, c1, c2, c3, mu, sd, (), q, arrivals, size))
        splits = _named_rows(doc, "split", H, names)
        risks = _named_rows(doc, "reported_risk", 2, names)
        policies = _named_rows(doc, "reported_policy", 1, names)
        spec_classes = []
        for i, cls in enumerate(classes):
            if cls.name not in splits:
                doc.fail(f"class '{cls.name}' has no [split] row")
            lineno, tokens = splits[cls.name]
            alpha = tuple(parse_floats(doc, lineno, tokens))
            if any(a < 0 for a in alpha) or abs(sum(alpha) - 1.0) > 1e-9:
                doc.fail(f"split for '{cls.name}' must be nonnegative and sum to 1, got {sum(alpha)!r}", lineno)
            cls = replace(cls, split=alpha)
            if cls.name in risks:
                lineno, tokens = risks[cls.name]
                cls = replace(cls, reported_risk=tuple(parse_floats(doc, lineno, tokens)))
            if cls.name in policies:
                lineno, tokens = policies[cls.name]
                cls = replace(cls, reported_policy=_parse_policy(doc, lineno, tokens[0], H))
            spec_classes.append(cls)
        try:
            return SyntheticSpec(H, c_a, c_r, tuple(spec_classes))
        except ValidationError as exc:
            doc.fail(exc.message)
    doc.fail(f"unknown environment kind '{kind}'", doc.header_lines["kind"])


def environment_to_text(spec) -> str:
    header = {
        "kind": "readmission" if isinstance(spec, ReadmissionSpec) else "synthetic",
        "horizon": spec.horizon,
        "intervention_cost": spec.intervention_cost,
        "readmission_penalty": spec.readmission_penalty,
    }
    sections = {}
    if isinstance(spec, ReadmissionSpec):
        cols = "name role arrivals history_size " + " ".join(f"p({h},{a})" for h in range(1, spec.horizon + 1) for a in (0, 1))
        sections["classes"] = (cols, [[c.name, c.role, c.arrivals, c.history_size, *map(float, c.probs.ravel())] for c in spec.classes])
    else:
        cols = "name role arrivals history_size treatment_coef feature_coef intercept feature_mean feature_std mixture"
        sections["classes"] = (
            cols,
            [
                [c.name, c.role, c.arrivals, c.history_size, c.treatment_coef, c.feature_coef, c.intercept, c.feature_mean, c.feature_std, c.mixture]
                for c in spec.classes
            ],
        )
        sections["split"] = ("name share of the 30-day risk per week", [[c.name, *c.split] for c in spec.classes])
        risks = [[c.name, *c.reported_risk] for c in spec.classes if c.reported_risk is not None]
        if risks:
            sections["reported_risk"] = ("name average risk untreated treated", risks)
    policies = [[c.name, c.reported_policy] for c in spec.classes if c.reported_policy is not None]
    if policies:
        sections["reported_policy"] = ("name optimal weekly actions", policies)
    return render_document(header, sections)


SHIPPED = {
    "historical_clusters": "historical_clusters.env",
    "synthetic": "synthetic.env",
    "synthetic_weekly": "synthetic_weekly.env",
    "priority_pair_a": "priority_pair_a.env",
    "priority_pair_b": "priority_pair_b.env",
}


def shipped_path(name: str):
    return resources.files("poolrl") / "data" / SHIPPED[name]


def load_environment(ref):
    """Load an environment spec from a file path or a shipped environment name."""
    if isinstance(ref, str) and ref in SHIPPED:
        res = shipped_path(ref)
        return environment_from_text(res.read_text(), source=ref)
    path = Path(ref)
    if not path.exists():
        raise ValidationError(f"environment '{ref}' is neither a file nor a shipped environment ({', '.join(SHIPPED)})")
    return environment_from_text(path.read_text(), source=str(path))


def save_environment(spec, path) -> None:
    Path(path).write_text(environment_to_text(spec))


# Simulation-facing view of a spec.


@dataclass(frozen=True)
class Environment:
    """Spec plus the class-level models the harness evaluates regret on.

    For synthetic specs each patient draws a feature at episode start and is
    simulated under the model at that feature; ``class_mdps`` are built at
    the class feature mean, which is also the mean weekly risk of the class.
    """

    spec: ReadmissionSpec | SyntheticSpec
    class_mdps: tuple[FiniteHorizonMdp, ...] = field(init=False)

    def __post_init__(self):
        if isinstance(self.spec, ReadmissionSpec):
            mdps = tuple(build_readmission_mdp(self.spec, i) for i in range(len(self.spec.classes)))
        else:
            mdps = tuple(
                readmission_mdp(synthetic_weekly_probs(self.spec, i), self.spec.intervention_cost, self.spec.readmission_penalty)
                for i in range(len(self.spec.classes))
            )
        object.__setattr__(self, "class_mdps", mdps)

    @property
    def has_features(self) -> bool:
        return isinstance(self.spec, SyntheticSpec)

    @property
    def structure(self) -> MdpStructure:
        return self.class_mdps[0].structure

    @property
    def classes(self):
        return self.spec.classes

    def indices(self, role: str) -> list[int]:
        return [i for i, c in enumerate(self.spec.classes) if c.role == role]

    def with_roles(self, targets: Sequence[str] | None = None, histories: Sequence[str] | None = None) -> "Environment":
        """Reassign class roles; classes listed in neither are dropped when both lists are given."""
        if targets is None and histories is None:
            return self
        classes = []
        for cls in self.spec.classes:
            if targets is not None and cls.name in targets:
                classes.append(replace(cls, role=TARGET))
            elif histories is not None and cls.name in histories:
                classes.append(replace(cls, role=HISTORY))
            elif targets is None or histories is None:
                role = HISTORY if targets is not None else TARGET
                classes.append(replace(cls, role=role))
        unknown = set(targets or ()) | set(histories or ())
        unknown -= {c.name for c in self.spec.classes}
        if unknown:
            raise ValidationError(f"unknown classes {sorted(unknown)}")
        return Environment(replace(self.spec, classes=tuple(classes)))

    def patient_model(self, index: int, x: float | None) -> FiniteHorizonMdp:
        if x is None or not self.has_features:
            return self.class_mdps[index]
        return readmission_mdp(synthetic_weekly_probs(self.spec, index, x), self.spec.intervention_cost, self.spec.readmission_penalty)

    def draw_patient(self, index: int, rng: np.random.Generator) -> tuple[float | None, FiniteHorizonMdp]:
        x = self.draw_features(index, rng)
        return x, self.patient_model(index, x)

    def draw_features(self, index: int, rng: np.random.Generator) -> float | None:
        """Feature of a new patient in class ``index`` (None without features; consumes no draws)."""
        if not self.has_features:
            return None
        return sample_feature(self.spec.classes[index], rng)

    def patient_probs(self, index: int, x: float | None) -> np.ndarray:
        if x is None or not self.has_features:
            return self.spec.classes[index].probs if isinstance(self.spec, ReadmissionSpec) else synthetic_weekly_probs(self.spec, index)
        return synthetic_weekly_probs(self.spec, index, x)

    def simulate_patient(self, index: int, x: float | None, policy: DeterministicPolicy, rng: np.random.Generator) -> Trajectory:
        """Same draws and trajectory as ``simulate_episode(patient_model(index, x), ...)`` without building the model."""
        return simulate_readmission(
            self.patient_probs(index, x), self.spec.intervention_cost, self.spec.readmission_penalty, policy, rng, features=x
        )


# Historical datasets.


@dataclass(frozen=True, eq=False)
class SampleTable:
    """Flat per-sample records; ``features`` has shape (n, d) or is None."""

    group: np.ndarray
    h: np.ndarray
    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    features: np.ndarray | None = None

    def __len__(self):
        return len(self.group)

    @classmethod
    def from_trajectories(cls, groups: Sequence[int], trajectories: Sequence[Trajectory]) -> "SampleTable":
        rows = []
        feats = []
        with_features = bool(trajectories) and trajectories[0].features is not None
        for g, traj in zip(groups, trajectories):
            for step in traj.steps:
                rows.append((g, step.h, step.state, step.action, step.reward, step.next_state))
                if with_features:
                    feats.append(traj.features)
        arr = np.array(rows, dtype=float).reshape(-1, 6)
        return cls(
            arr[:, 0].astype(np.int64),
            arr[:, 1].astype(np.int64),
            arr[:, 2].astype(np.int64),
            arr[:, 3].astype(np.int64),
            arr[:, 4].copy(),
            arr[:, 5].astype(np.int64),
            np.array(feats, dtype=float).reshape(len(rows), -1) if with_features else None,
        )

    def subset(self, mask) -> "SampleTable":
        return SampleTable(
            self.group[mask], self.h[mask], self.state[mask], self.action[mask], self.reward[mask], self.next_state[mask],
            None if self.features is None else self.features[mask],
        )


@dataclass(frozen=True, eq=False)
class HistoricalDataset:
    aggregates: AggregateStats
    samples: SampleTable | None = None

    @property
    def groups(self) -> tuple[str, ...]:
        return self.aggregates.groups

    @property
    def privacy(self) -> str:
        return "samples" if self.samples is not None else "aggregates-only"

    def aggregates_only(self) -> "HistoricalDataset":
        return HistoricalDataset(self.aggregates, None)


def counts_from_samples(samples: SampleTable, group: int, shape: tuple[int, int, int]) -> TrajectoryCounts:
    counts = TrajectoryCounts(*shape)
    mask = samples.group == group
    idx = (samples.h[mask] - 1, samples.state[mask], samples.action[mask])
    np.add.at(counts.visits, idx, 1)
    np.add.at(counts.reward_sum, idx, samples.reward[mask])
    np.add.at(counts.transitions, idx + (samples.next_state[mask],), 1)
    return counts


def behavior_policy(kind: str, mdp: FiniteHorizonMdp) -> Callable[[np.random.Generator], DeterministicPolicy]:
    """Behavior policy factory: 'zero', 'uniform' (fresh random actions per episode), 'optimal' or a binary sequence."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    if kind == "zero":
        fixed = DeterministicPolicy(np.zeros((H, S), dtype=np.int64))
        return lambda rng: fixed
    if kind == "uniform":
        return lambda rng: DeterministicPolicy(rng.integers(0, A, size=(H, S)))
    if kind == "optimal":
        fixed = value_iteration(mdp)[1]
        return lambda rng: fixed
    if len(kind) == H and set(kind) <= {"0", "1"}:
        fixed = DeterministicPolicy.from_sequence(kind, S)
        return lambda rng: fixed
    raise ValidationError(f"unknown behavior policy '{kind}'")


def generate_historical_dataset(
    env: Environment,
    behavior: str,
    sizes: dict[str, int] | None,
    rng: np.random.Generator,
    privacy: str = "samples",
    groups: Sequence[int] | None = None,
) -> HistoricalDataset:
    """Simulate historical episodes for each history class of ``env``.

    ``sizes`` maps class name to episode count (defaults to each class's
    history_size). In "aggregates-only" mode the per-sample records are
    dropped after the aggregate statistics are derived from them.
    """
    if privacy not in ("samples", "aggregates-only"):
        raise ValidationError(f"unknown privacy mode '{privacy}'")
    if groups is None:
        groups = env.indices(HISTORY)
    shape = env.structure.horizon, env.structure.num_states, env.structure.num_actions
    names = [env.classes[i].name for i in groups]
    labels, trajectories = [], []
    for g, i in enumerate(groups):
        size = env.classes[i].history_size if sizes is None or env.classes[i].name not in sizes else sizes[env.classes[i].name]
        if size < 0:
            raise ValidationError("historical sizes must be nonnegative")
        draw = behavior_policy(behavior, env.class_mdps[i])
        for _ in range(size):
            x = env.draw_features(i, rng)
            trajectories.append(env.simulate_patient(i, x, draw(rng), rng))
            labels.append(g)
    samples = SampleTable.from_trajectories(labels, trajectories)
    aggregates = AggregateStats.from_counts(names, [counts_from_samples(samples, g, shape) for g in range(len(groups))])
    dataset = HistoricalDataset(aggregates, samples)
    return dataset if privacy == "samples" else dataset.aggregates_only()
