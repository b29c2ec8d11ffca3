"""Finite-horizon tabular MDPs and exact solvers.

Epochs are 1-based in every public signature (``h = 1..H``) and 0-based in
array indexing. Rewards are always stored in the reward frame: cost-framed
models keep ``mean_reward = -cost`` and carry ``sense = "minimize"`` so values
can be reported back as costs with :meth:`FiniteHorizonMdp.objective`.
Solvers therefore only ever maximize, and ties go to the lowest action index
in both frames.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DimensionError, SearchSpaceError, ConvergenceError, ValidationError
from .textio import Document, parse_document, parse_floats, render_document

ROW_TOL = 1e-9
MAXIMIZE = "maximize"
MINIMIZE = "minimize"


def _frozen(array, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MdpStructure:
    """What an agent is allowed to know about an environment up front."""

    horizon: int
    num_states: int
    num_actions: int
    initial_state: int = 0
    absorbing: tuple[bool, ...] = ()
    sense: str = MAXIMIZE

    def is_absorbing(self, s: int) -> bool:
        return bool(self.absorbing) and self.absorbing[s]


@dataclass(frozen=True, eq=False)
class FiniteHorizonMdp:
    """Complete tabular model.

    mean_reward has shape (H, S, A) and transition has shape (H, S, A, S).
    transition_reward, when present, gives the realized reward of each
    (h, s, a, s') outcome; its expectation under the transition row must equal
    mean_reward. Readmission models use it so the realized cost depends on
    whether the patient was readmitted.
    """

    mean_reward: np.ndarray
    transition: np.ndarray
    initial_state: int = 0
    sense: str = MAXIMIZE
    absorbing: tuple[bool, ...] = ()
    transition_reward: np.ndarray | None = None

    def __post_init__(self):
        r = _frozen(self.mean_reward)
        p = _frozen(self.transition)
        if r.ndim != 3:
            raise DimensionError(f"mean_reward must have shape (H, S, A), got {r.shape}")
        H, S, A = r.shape
        if H < 1 or S < 1 or A < 1:
            raise DimensionError(f"empty model shape {r.shape}")
        if p.shape != (H, S, A, S):
            raise DimensionError(f"transition must have shape {(H, S, A, S)}, got {p.shape}")
        if not np.all(np.isfinite(r)):
            raise ValidationError("mean_reward has non-finite entries")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("transition has negative or non-finite entries")
        sums = p.sum(axis=-1)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            h, s, a = bad[0]
            raise ValidationError(f"transition row (h={h + 1}, s={s}, a={a}) sums to {sums[h, s, a]!r}")
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ValidationError(f"unknown objective sense '{self.sense}'")
        if not 0 <= self.initial_state < S:
            raise ValidationError(f"initial_state {self.initial_state} out of range")
        absorbing = tuple(bool(x) for x in self.absorbing) if len(self.absorbing) else ()
        if absorbing and len(absorbing) != S:
            raise DimensionError("absorbing flags must cover every state")
        for s, flag in enumerate(absorbing):
            if flag and np.any(np.abs(p[:, s, :, s] - 1.0) > ROW_TOL):
                raise ValidationError(f"state {s} is flagged absorbing but does not self-transition")
        tr = None
        if self.transition_reward is not None:
            tr = _frozen(self.transition_reward)
            if tr.shape != p.shape:
                raise DimensionError(f"transition_reward must have shape {p.shape}, got {tr.shape}")
            if np.max(np.abs((tr * p).sum(axis=-1) - r)) > 1e-9:
                raise ValidationError("transition_reward does not average to mean_reward")
        object.__setattr__(self, "mean_reward", r)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "absorbing", absorbing)
        object.__setattr__(self, "transition_reward", tr)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def horizon(self) -> int:
        return self.mean_reward.shape[0]

    @property
    def num_states(self) -> int:
        return self.mean_reward.shape[1]

    @property
    def num_actions(self) -> int:
        return self.mean_reward.shape[2]

    @property
    def structure(self) -> MdpStructure:
        return MdpStructure(self.horizon, self.num_states, self.num_actions, self.initial_state, self.absorbing, self.sense)

    def objective(self, value):
        """Convert a reward-frame value into the model's own units (cost when minimizing)."""
        return -value if self.sense == MINIMIZE else value


@dataclass(frozen=True, eq=False)
class DeterministicPolicy:
    """Action index per (h, s), stored with shape (H, S)."""

    actions: np.ndarray

    def __post_init__(self):
        a = _frozen(self.actions, dtype=np.int64)
        if a.ndim != 2:
            raise DimensionError(f"policy must have shape (H, S), got {a.shape}")
        if np.any(a < 0):
            raise ValidationError("negative action index in policy")
        object.__setattr__(self, "actions", a)

    @classmethod
    def from_sequence(cls, sequence, num_states: int = 2, state: int = 0) -> "DeterministicPolicy":
        """Policy that plays ``sequence[h-1]`` in ``state`` and action 0 elsewhere."""
        if isinstance(sequence, str):
            sequence = [int(c) for c in sequence]
        actions = np.zeros((len(sequence), num_states), dtype=np.int64)
        actions[:, state] = sequence
        return cls(actions)

    def at(self, h: int, s: int) -> int:
        return int(self.actions[h - 1, s])

    def sequence(self, state: int = 0) -> str:
        return "".join(str(int(a)) for a in self.actions[:, state])

    def check(self, mdp: FiniteHorizonMdp) -> None:
        if self.actions.shape != (mdp.horizon, mdp.num_states):
            raise DimensionError(f"policy shape {self.actions.shape} does not match model {(mdp.horizon, mdp.num_states)}")
        if np.any(self.actions >= mdp.num_actions):
            raise ValidationError("policy uses an action index outside the model")

    def __eq__(self, other):
        return isinstance(other, DeterministicPolicy) and np.array_equal(self.actions, other.actions)

    def __hash__(self):
        return hash(self.actions.tobytes())

    def __repr__(self):
        return f"DeterministicPolicy({self.actions.tolist()})"


@dataclass(frozen=True, eq=False)
class QTable:
    """Q values with shape (H, S, A); the terminal layer at H+1 is implicitly zero."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q))

    def layer(self, h: int) -> np.ndarray:
        if h == self.q.shape[0] + 1:
            return np.zeros(self.q.shape[1:])
        return self.q[h - 1]

    def values(self) -> np.ndarray:
        """V_h(s) = max_a Q(h, s, a), shape (H, S)."""
        return self.q.max(axis=-1)

    def greedy(self) -> DeterministicPolicy:
        return DeterministicPolicy(np.argmax(self.q, axis=-1))


class Step(NamedTuple):
    h: int
    state: int
    action: int
    reward: float
    next_state: int


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    initial_state: int
    features: tuple[float, ...] | None = None

    def __post_init__(self):
        state = self.initial_state
        last_h = 0
        for step in self.steps:
            if step.h <= last_h:
                raise ValidationError("trajectory epochs must be strictly increasing")
            if step.state != state:
                raise ValidationError("trajectory steps are not chained")
            state = step.next_state
            last_h = step.h

    @property
    def final_state(self) -> int:
        return self.steps[-1].next_state if self.steps else self.initial_state

    @property
    def total_reward(self) -> float:
        return float(sum(step.reward for step in self.steps))

    def __len__(self):
        return len(self.steps)


def bellman_backup(mdp: FiniteHorizonMdp, next_values, h: int) -> np.ndarray:
    """Layer q(h, s, a) = r(h, s, a) + sum_s' P(s'; h, s, a) next_values(s'), shape (S, A)."""
    v = np.asarray(next_values, dtype=float)
    if v.shape != (mdp.num_states,):
        raise DimensionError(f"next_values must have length {mdp.num_states}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("next_values must be finite")
    if not 1 <= h <= mdp.horizon:
        raise DimensionError(f"epoch {h} outside 1..{mdp.horizon}")
    return mdp.mean_reward[h - 1] + mdp.transition[h - 1] @ v


def value_iteration(mdp: FiniteHorizonMdp) -> tuple[QTable, DeterministicPolicy, float]:
    """Backward induction. Returns the Q table, greedy policy and V_1(s_1) in the reward frame."""
    H, S, A = mdp.mean_reward.shape
    q = np.empty((H, S, A))
    v = np.zeros(S)
    for h in range(H, 0, -1):
        q[h - 1] = bellman_backup(mdp, v, h)
        v = q[h - 1].max(axis=-1)
    table = QTable(q)
    return table, table.greedy(), float(v[mdp.initial_state])


def policy_evaluation(mdp: FiniteHorizonMdp, policy: DeterministicPolicy) -> np.ndarray:
    """Exact V_h(s) under a fixed policy, shape (H, S), reward frame."""
    policy.check(mdp)
    H, S = mdp.horizon, mdp.num_states
    values = np.empty((H, S))
    v = np.zeros(S)
    rows = np.arange(S)
    for h in range(H, 0, -1):
        # Same arithmetic path as value_iteration so optimal values agree exactly.
        v = bellman_backup(mdp, v, h)[rows, policy.actions[h - 1]]
        values[h - 1] = v
    return values


def policy_value(mdp: FiniteHorizonMdp, policy: DeterministicPolicy) -> float:
    return float(policy_evaluation(mdp, policy)[0, mdp.initial_state])


def policy_iteration(mdp: FiniteHorizonMdp, max_sweeps: int = 1000, tol: float = 1e-12) -> DeterministicPolicy:
    """Alternate exact evaluation and greedy improvement until the policy is stable.

    An action is only replaced when another one improves its Q value by more
    than ``tol``, which rules out cycling between tied actions.
    """
    H, S, A = mdp.mean_reward.shape
    actions = np.zeros((H, S), dtype=np.int64)
    rows = np.arange(S)
    for _ in range(max_sweeps):
        policy = DeterministicPolicy(actions)
        values = policy_evaluation(mdp, policy)
        new = actions.copy()
        for h in range(1, H + 1):
            nxt = values[h] if h < H else np.zeros(S)
            q = bellman_backup(mdp, nxt, h)
            best = np.argmax(q, axis=-1)
            improve = q[rows, best] > q[rows, actions[h - 1]] + tol
            new[h - 1] = np.where(improve, best, actions[h - 1])
        if np.array_equal(new, actions):
            return policy
        actions = new
    raise ConvergenceError(f"policy iteration did not stabilize within {max_sweeps} sweeps", best=DeterministicPolicy(actions))


def iter_policies(mdp: FiniteHorizonMdp, cap: int = 10**6) -> Iterator[DeterministicPolicy]:
    H, S, A = mdp.mean_reward.shape
    if A ** (S * H) > cap:
        raise SearchSpaceError(f"{A}^({S}*{H}) policies exceeds the enumeration cap {cap}")
    for combo in itertools.product(range(A), repeat=S * H):
        yield DeterministicPolicy(np.array(combo, dtype=np.int64).reshape(H, S))


def enumerate_policies_oracle(mdp: FiniteHorizonMdp, cap: int = 10**6, tol: float = 1e-9):
    """Exhaustive search. Returns (best value, optimal policies, worst value, worst policies).

    Values are in the reward frame, so "worst" is the largest cost for a
    minimizing model.
    """
    scored = [(policy_value(mdp, pi), pi) for pi in iter_policies(mdp, cap)]
    best = max(v for v, _ in scored)
    worst = min(v for v, _ in scored)
    optimal = [pi for v, pi in scored if v >= best - tol]
    pessimal = [pi for v, pi in scored if v <= worst + tol]
    return best, optimal, worst, pessimal


def simulate_episode(
    mdp: FiniteHorizonMdp,
    policy: DeterministicPolicy,
    rng: np.random.Generator,
    reward_mode: str | None = None,
    features=None,
) -> Trajectory:
    """Roll out one episode from the initial state.

    reward_mode is "mean" (realized reward equals the mean), "bernoulli"
    (a {0,1} draw with the mean as success probability, for rewards in [0,1])
    or "transition" (read from transition_reward given the sampled next
    state). The default is "transition" when the model carries outcome rewards
    and "mean" otherwise. The episode stops once an absorbing state is
    entered; every later epoch would carry zero reward.
    """
    if reward_mode is None:
        reward_mode = "transition" if mdp.transition_reward is not None else "mean"
    if reward_mode == "transition" and mdp.transition_reward is None:
        raise ValidationError("model has no transition_reward table")
    if reward_mode not in ("mean", "bernoulli", "transition"):
        raise ValidationError(f"unknown reward mode '{reward_mode}'")
    state = mdp.initial_state
    steps = []
    feats = None if features is None else tuple(float(x) for x in np.atleast_1d(features))
    for h in range(1, mdp.horizon + 1):
        if mdp.absorbing and mdp.absorbing[state]:
            break
        a = int(policy.actions[h - 1, state])
        row = mdp.transition[h - 1, state, a]
        # Inverse-CDF draw; much cheaper than Generator.choice for short rows.
        nxt = min(int(np.searchsorted(np.cumsum(row), rng.random(), side="right")), mdp.num_states - 1)
        if reward_mode == "mean":
            reward = float(mdp.mean_reward[h - 1, state, a])
        elif reward_mode == "bernoulli":
            reward = float(rng.random() < mdp.mean_reward[h - 1, state, a])
        else:
            reward = float(mdp.transition_reward[h - 1, state, a, nxt])
        steps.append(Step(h, state, a, reward, nxt))
        state = nxt
    return Trajectory(tuple(steps), mdp.initial_state, feats)


# MDP definition files. Tables are written in the model's own units, so a
# minimizing model lists costs and the loader negates them.

def mdp_to_text(mdp: FiniteHorizonMdp) -> str:
    H, S, A = mdp.mean_reward.shape
    sign = -1.0 if mdp.sense == MINIMIZE else 1.0
    header = {
        "horizon": H,
        "states": S,
        "actions": A,
        "sense": mdp.sense,
        "initial_state": mdp.initial_state,
    }
    if mdp.absorbing and any(mdp.absorbing):
        header["absorbing"] = " ".join(str(s) for s, flag in enumerate(mdp.absorbing) if flag)
    label = "cost" if mdp.sense == MINIMIZE else "reward"
    reward_rows, trans_rows, outcome_rows = [], [], []
    for h, s, a in itertools.product(range(H), range(S), range(A)):
        reward_rows.append([h + 1, s, a, sign * mdp.mean_reward[h, s, a] + 0.0])
        trans_rows.append([h + 1, s, a, *mdp.transition[h, s, a]])
        if mdp.transition_reward is not None:
            outcome_rows.append([h + 1, s, a, *(sign * mdp.transition_reward[h, s, a] + 0.0)])
    sections = {
        "reward": (f"h s a {label}", reward_rows),
        "transition": ("h s a " + " ".join(f"p({j})" for j in range(S)), trans_rows),
    }
    if outcome_rows:
        sections["outcome_reward"] = (f"h s a {label} given next state " + " ".join(str(j) for j in range(S)), outcome_rows)
    return render_document(header, sections)


def _fill_table(doc: Document, name: str, shape, width: int, required: bool = True):
    H, S, A = shape
    table = np.full((H, S, A, width), np.nan)
    rows = doc.rows(name, required)
    if not rows:
        return None
    for lineno, tokens in rows:
        if len(tokens) != 3 + width:
            doc.fail(f"[{name}] row needs {3 + width} columns, got {len(tokens)}", lineno)
        vals = parse_floats(doc, lineno, tokens)
        h, s, a = (int(x) for x in vals[:3])
        if vals[:3] != [h, s, a] or not (1 <= h <= H and 0 <= s < S and 0 <= a < A):
            doc.fail(f"[{name}] index ({tokens[0]}, {tokens[1]}, {tokens[2]}) out of range", lineno)
        if not np.all(np.isnan(table[h - 1, s, a])):
            doc.fail(f"[{name}] duplicate row for h={h} s={s} a={a}", lineno)
        table[h - 1, s, a] = vals[3:]
        if name == "transition":
            row = np.array(vals[3:])
            if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_TOL:
                doc.fail(f"transition row for h={h} s={s} a={a} is not a probability vector (sum {row.sum()!r})", lineno)
    if np.any(np.isnan(table)):
        h, s, a, _ = np.argwhere(np.isnan(table))[0]
        doc.fail(f"[{name}] has no row for h={h + 1} s={s} a={a}")
    return table


def mdp_from_text(text: str, source: str | None = None) -> FiniteHorizonMdp:
    doc = parse_document(text, source)
    H = doc.get_int("horizon")
    S = doc.get_int("states")
    A = doc.get_int("actions")
    if min(H, S, A) < 1:
        doc.fail("horizon, states and actions must be positive")
    sense = doc.header.get("sense", MAXIMIZE)
    if sense not in (MAXIMIZE, MINIMIZE):
        doc.fail(f"sense must be '{MAXIMIZE}' or '{MINIMIZE}'", doc.header_lines["sense"])
    sign = -1.0 if sense == MINIMIZE else 1.0
    absorbing = [False] * S
    for tok in doc.header.get("absorbing", "").replace(",", " ").split():
        if not tok.isdigit() or int(tok) >= S:
            doc.fail(f"absorbing state '{tok}' out of range", doc.header_lines["absorbing"])
        absorbing[int(tok)] = True
    reward = _fill_table(doc, "reward", (H, S, A), 1)[..., 0] * sign
    transition = _fill_table(doc, "transition", (H, S, A), S)
    outcome = _fill_table(doc, "outcome_reward", (H, S, A), S, required=False)
    try:
        return FiniteHorizonMdp(
            mean_reward=reward + 0.0,
            transition=transition,
            initial_state=doc.get_int("initial_state", 0),
            sense=sense,
            absorbing=tuple(absorbing) if any(absorbing) else (),
            transition_reward=None if outcome is None else outcome * sign + 0.0,
        )
    except ValidationError as exc:
        raise ValidationError(exc.message, source=source) from None


def load_mdp(path) -> FiniteHorizonMdp:
    path = Path(path)
    return mdp_from_text(path.read_text(), source=str(path))


def save_mdp(mdp: FiniteHorizonMdp, path) -> None:
    Path(path).write_text(mdp_to_text(mdp))
