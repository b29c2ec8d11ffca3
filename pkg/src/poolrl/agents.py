"""Online learning agents built on perturbed least-squares value iteration.

Every agent follows the same loop. ``policy_for_iteration(t)`` plans with
the current estimates plus a random (or optimistic) perturbation and returns
the policy to play in iteration t. The harness then simulates the iteration's
episodes and hands them back through ``absorb``.

Tabular agents differ only in how they form the per-cell estimates
(r_hat, P_hat) and the sample count that scales their perturbation.
Contextual agents fit linear models on features instead and return a
:class:`ContextualPolicy` that yields one policy per patient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .environments import HistoricalDataset, SampleTable, readmission_mdp
from .errors import MissingDataError, ValidationError
from .estimators import (
    CASE_STUDY,
    THEORETICAL,
    Estimate,
    RadiusParams,
    TrajectoryCounts,
    cluster_membership,
    estimate_delta,
    hoeffding_radii,
    js_weights,
    mle_tables,
    multi_group_weights,
    pooling_radii,
    pooling_weight,
)
from .mdp import DeterministicPolicy, MdpStructure, Trajectory

UCB = "ucb-constant"
GAUSSIAN_TS = "gaussian-ts"
CASE_STUDY_GAUSSIAN = "case-study-gaussian"
NO_PERTURBATION = "none"
PERTURBATION_KINDS = (UCB, GAUSSIAN_TS, CASE_STUDY_GAUSSIAN, NO_PERTURBATION)


@dataclass(frozen=True)
class PerturbationSpec:
    """How exploration noise is added to the estimated Q values.

    ucb-constant:        w = min(H - h + 1, L * eps_V(n)), deterministic.
    gaussian-ts:         w = eps_V(n) * xi, xi ~ N(0, ts_variance), default S * H.
    case-study-gaussian: w ~ N(0, explore_sigma^2 / n) per (h, a), shared over states.
    none:                w = 0.

    ``clip`` bounds |xi| when set. ``value_scale`` rescales the first two
    kinds for models whose values are not in [0, H] (for example costs).
    """

    kind: str = GAUSSIAN_TS
    ucb_multiplier: float = 1.0
    ts_variance: float | None = None
    explore_sigma: float = 0.1
    clip: float | None = None
    value_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValidationError(f"unknown perturbation kind '{self.kind}'")
        for name in ("ucb_multiplier", "explore_sigma", "value_scale"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and nonnegative")
        for name in ("ts_variance", "clip"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise ValidationError(f"{name} must be finite and nonnegative")


@dataclass(frozen=True)
class AgentParams:
    """Hyper-parameters shared by all agents; each agent reads the ones it needs."""

    delta: float = 0.1
    gap: float = 0.1
    gamma: float = 1.0
    cluster_c: float = 0.5
    ridge: float = 1e-6
    p_floor: float = 1e-4
    mode: str = THEORETICAL
    pool_groups: str = "separate"
    contextual_noise: str = "cell"
    intervention_cost: float = 0.0
    readmission_penalty: float = 1.0

    def __post_init__(self):
        if self.mode not in (THEORETICAL, CASE_STUDY):
            raise ValidationError(f"unknown mode '{self.mode}'")
        if self.pool_groups not in ("separate", "merged"):
            raise ValidationError("pool_groups must be 'separate' or 'merged'")
        if self.contextual_noise not in ("cell", "patient"):
            raise ValidationError("contextual_noise must be 'cell' or 'patient'")
        if self.ridge < 0 or self.p_floor < 0 or self.p_floor >= 0.5:
            raise ValidationError("ridge must be nonnegative and p_floor in [0, 0.5)")


def draw_perturbation(
    spec: PerturbationSpec,
    eps_v: np.ndarray,
    counts: np.ndarray,
    horizon: int,
    num_states: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Perturbation table w with the shape of ``eps_v`` (H, S, A).

    ``eps_v`` holds the capped value radii per cell; ``counts`` the sample
    counts per cell used by the case-study kind, which sums them over states.
    Random draws happen in a fixed order and amount for a given shape, so two
    agents sharing a stream see the same noise.
    """
    H, S, A = eps_v.shape
    if spec.kind == NO_PERTURBATION:
        return np.zeros_like(eps_v)
    if spec.kind == UCB:
        remaining = (horizon - np.arange(H) )[:, None, None].astype(float)
        return spec.value_scale * np.minimum(remaining, spec.ucb_multiplier * eps_v)
    if spec.kind == GAUSSIAN_TS:
        variance = spec.ts_variance if spec.ts_variance is not None else num_states * horizon
        xi = rng.standard_normal((H, S, A)) * math.sqrt(variance)
        if spec.clip is not None:
            xi = np.clip(xi, -spec.clip, spec.clip)
        return spec.value_scale * eps_v * xi
    z = rng.standard_normal((H, A))
    if spec.clip is not None:
        z = np.clip(z, -spec.clip, spec.clip)
    n = np.maximum(counts.sum(axis=1), 1)
    w = spec.explore_sigma * z / np.sqrt(n)
    return spec.value_scale * np.broadcast_to(w[:, None, :], (H, S, A)).copy()


def perturbed_q_values(reward: np.ndarray, transition: np.ndarray, perturbation: np.ndarray, structure: MdpStructure) -> np.ndarray:
    """Backward recursion Q(h) = r + w + P V(h + 1) with V(H + 1) = 0.

    Known absorbing states keep value 0: episodes stop on entry, so they are
    reward-free and never explored.
    """
    H, S, A = reward.shape
    q = np.empty((H, S, A))
    v = np.zeros(S)
    absorbing = np.array(structure.absorbing, dtype=bool) if structure.absorbing else np.zeros(S, dtype=bool)
    for h in range(H - 1, -1, -1):
        q[h] = reward[h] + perturbation[h] + transition[h] @ v
        q[h, absorbing] = 0.0
        v = q[h].max(axis=-1)
    return q


class Agent:
    """Common state: target counts, iteration counter and a private random stream."""

    tag = "agent"

    def __init__(
        self,
        structure: MdpStructure,
        iterations: int,
        params: AgentParams | None = None,
        perturbation: PerturbationSpec | None = None,
        rng: np.random.Generator | None = None,
        historical: HistoricalDataset | None = None,
    ):
        self.structure = structure
        self.iterations = iterations
        self.params = params or AgentParams()
        if perturbation is None:
            kind = CASE_STUDY_GAUSSIAN if self.params.mode == CASE_STUDY else GAUSSIAN_TS
            perturbation = PerturbationSpec(kind=kind)
        self.perturbation = perturbation
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.historical = historical
        H, S, A = structure.horizon, structure.num_states, structure.num_actions
        self.counts = TrajectoryCounts(H, S, A)
        self.radius_params = RadiusParams(self.params.delta, H, S, A, iterations, self.params.gap, self.params.gamma)
        self.t = 0
        self._samples: list[tuple] = []
        self.last_perturbation: np.ndarray | None = None

    def policy_for_iteration(self, t: int):
        raise NotImplementedError

    def absorb(self, trajectories: Sequence[Trajectory]) -> None:
        for traj in trajectories:
            self.counts.add_trajectory(traj)
            feats = traj.features if traj.features is not None else ()
            for step in traj.steps:
                self._samples.append((step.h, step.state, step.action, step.reward, step.next_state, feats))
        self.t += 1

    def target_samples(self) -> SampleTable:
        """Target data gathered so far as a flat table (group label 0)."""
        if not self._samples:
            return SampleTable(*(np.zeros(0, dtype=np.int64) for _ in range(4)), np.zeros(0), np.zeros(0, dtype=np.int64), None)
        h, s, a, r, nxt, feats = zip(*self._samples)
        features = np.array(feats, dtype=float) if len(feats[0]) else None
        return SampleTable(
            np.zeros(len(h), dtype=np.int64), np.array(h), np.array(s), np.array(a), np.array(r, dtype=float), np.array(nxt), features
        )


class FixedPolicyAgent(Agent):
    """Plays one policy forever; used for oracle and anti-oracle runs."""

    tag = "fixed"

    def __init__(self, structure, iterations, policy: DeterministicPolicy, **kwargs):
        super().__init__(structure, iterations, **kwargs)
        self.policy = policy

    def policy_for_iteration(self, t: int) -> DeterministicPolicy:
        return self.policy


class TabularAgent(Agent):
    """Perturbed LSVI on per-cell estimates; subclasses override ``estimates``."""

    tag = "personalized"

    def estimates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(reward (H,S,A), transition (H,S,A,S), capped value radius (H,S,A))."""
        reward, transition, _ = mle_tables(self.counts)
        return reward, transition, self.hoeffding_value_radii(self.counts.visits)

    def hoeffding_value_radii(self, n: np.ndarray) -> np.ndarray:
        out = np.empty(n.shape)
        cache: dict[int, float] = {}
        H = self.structure.horizon
        for idx, count in np.ndenumerate(n):
            count = int(count)
            if count not in cache:
                cache[count] = hoeffding_radii(count, self.radius_params).capped(H).eps_V
            out[idx] = cache[count]
        return out

    def noise_counts(self) -> np.ndarray:
        return self.counts.visits

    def plan(self) -> np.ndarray:
        reward, transition, eps_v = self.estimates()
        w = draw_perturbation(self.perturbation, eps_v, self.noise_counts(), self.structure.horizon, self.structure.num_states, self.rng)
        self.last_perturbation = w
        return perturbed_q_values(reward, transition, w, self.structure)

    def policy_for_iteration(self, t: int) -> DeterministicPolicy:
        q = self.plan()
        self.last_q = q
        return DeterministicPolicy(np.argmax(q, axis=-1))

    def _cells(self):
        H, S, A = self.counts.shape
        for h in range(H):
            for s in range(S):
                if self.structure.is_absorbing(s):
                    continue
                for a in range(A):
                    yield h, s, a


class PersonalizedAgent(TabularAgent):
    """Target data only."""

    tag = "personalized"


class DataPoolingAgent(TabularAgent):
    """Pools target estimates with historical aggregates cell by cell.

    Theoretical mode uses the fixed gap from the parameters and the
    closed-form weight (one merged group) or the multi-group optimizer, and
    scales the perturbation by the pooled value radius. Case-study mode
    re-estimates a gap per group and cell every iteration from the L1
    distance between transition estimates and uses the case-study objective.
    """

    tag = "data-pooling"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.historical is None:
            raise MissingDataError("data pooling needs historical aggregate statistics")
        stats = self.historical.aggregates
        if stats.shape != self.counts.shape:
            raise ValidationError("historical aggregates do not match the model dimensions")
        self.stats = stats.merged() if self.params.pool_groups == "merged" else stats
        self.last_weights: np.ndarray | None = None

    def estimates(self):
        reward, transition, _ = mle_tables(self.counts)
        eps_v = self.hoeffding_value_radii(self.counts.visits)
        stats = self.stats
        K = stats.num_groups
        H = self.structure.horizon
        weights = np.zeros(self.counts.shape + (K + 1,))
        weights[..., 0] = 1.0
        for h, s, a in self._cells():
            n = int(self.counts.visits[h, s, a])
            sizes = stats.sample_size[:, h, s, a]
            if sizes.sum() == 0:
                continue
            if self.params.mode == THEORETICAL:
                if K == 1:
                    N = int(sizes[0])
                    lam = pooling_weight(n, N, self.radius_params)
                    if lam == 1.0:
                        continue
                    w = np.array([lam, 1.0 - lam])
                    eps_v[h, s, a] = pooling_radii(lam, n, N, self.radius_params).capped(H).eps_V
                else:
                    gaps = np.full(K, self.params.gap)
                    res = multi_group_weights(n, sizes, gaps, self.radius_params, THEORETICAL)
                    w = res.all_weights
                    eps_v[h, s, a] = min(H * res.objective, float(H))
            else:
                target = Estimate(reward[h, s, a], transition[h, s, a], n > 0)
                gaps = np.array([estimate_delta(target, stats.estimate(k, h + 1, s, a), self.params.gamma) for k in range(K)])
                res = multi_group_weights(n, sizes, gaps, self.radius_params, CASE_STUDY, h=h + 1)
                w = res.all_weights
            # With no target samples the target weight is 0, so the sentinel drops out.
            weights[h, s, a] = w
            reward[h, s, a] = w[0] * reward[h, s, a] + w[1:] @ stats.mean_reward[:, h, s, a]
            pooled = w[0] * transition[h, s, a] + w[1:] @ stats.transition[:, h, s, a]
            transition[h, s, a] = pooled / pooled.sum()
        self.last_weights = weights
        return reward, transition, eps_v


class CompleteAgent(TabularAgent):
    """Treats every historical sample as if it came from the target."""

    tag = "complete"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.historical is None:
            raise MissingDataError("complete pooling needs historical data")
        self.stats = self.historical.aggregates

    def estimates(self):
        N, rs, ts = self.stats.sums()
        n = self.counts.visits + N.sum(axis=0)
        seen = n > 0
        safe = np.where(seen, n, 1)
        reward = np.where(seen, (self.counts.reward_sum + rs.sum(axis=0)) / safe, 0.0)
        S = self.structure.num_states
        transition = np.where(seen[..., None], (self.counts.transitions + ts.sum(axis=0)) / safe[..., None], 1.0 / S)
        return reward, transition, self.hoeffding_value_radii(self.counts.visits)


class ClusteringAgent(TabularAgent):
    """Merges the target with every group whose transition estimate is within C / sqrt(n)."""

    tag = "clustering"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.historical is None:
            raise MissingDataError("clustering needs historical data")
        self.stats = self.historical.aggregates
        self.last_members: np.ndarray | None = None

    def estimates(self):
        t_reward, t_transition, _ = mle_tables(self.counts)
        reward, transition = t_reward.copy(), t_transition.copy()
        N, rs, ts = self.stats.sums()
        K = self.stats.num_groups
        members = np.zeros(self.counts.shape + (K,), dtype=bool)
        for h, s, a in self._cells():
            n = int(self.counts.visits[h, s, a])
            total_n = float(n)
            r_sum = float(self.counts.reward_sum[h, s, a])
            t_sum = self.counts.transitions[h, s, a].astype(float)
            for k in range(K):
                if N[k, h, s, a] == 0:
                    continue
                if cluster_membership(self.stats.transition[k, h, s, a], t_transition[h, s, a], n, self.params.cluster_c):
                    members[h, s, a, k] = True
                    total_n += N[k, h, s, a]
                    r_sum += rs[k, h, s, a]
                    t_sum = t_sum + ts[k, h, s, a]
            if total_n > 0:
                reward[h, s, a] = r_sum / total_n
                transition[h, s, a] = t_sum / t_sum.sum()
        self.last_members = members
        return reward, transition, self.hoeffding_value_radii(self.counts.visits)


class JamesSteinAgent(TabularAgent):
    """Per-cell James-Stein weights over the target and each historical class.

    The weights need the spread of observed Q values r_i + V(s'_i) inside
    each class, so per-sample historical records are required. V comes from
    the agent's own backward recursion.
    """

    tag = "james-stein"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.historical is None or self.historical.samples is None:
            raise MissingDataError("the James-Stein agent needs per-sample historical records")
        self.stats = self.historical.aggregates
        hist = self.historical.samples
        self._hist_index = self._index(hist)
        self._hist = hist
        self.last_diagnostics: list[str] = []

    @staticmethod
    def _index(samples: SampleTable) -> dict[tuple, np.ndarray]:
        keys = np.stack([samples.group, samples.h, samples.state, samples.action], axis=1)
        out: dict[tuple, list[int]] = {}
        for i, key in enumerate(map(tuple, keys)):
            out.setdefault(key, []).append(i)
        return {k: np.array(v) for k, v in out.items()}

    def plan(self) -> np.ndarray:
        H, S, A = self.counts.shape
        K = self.stats.num_groups
        t_reward, t_transition, _ = mle_tables(self.counts)
        eps_v = self.hoeffding_value_radii(self.counts.visits)
        w = draw_perturbation(self.perturbation, eps_v, self.noise_counts(), H, S, self.rng)
        self.last_perturbation = w
        target = self.target_samples()
        t_index = self._index(target)
        absorbing = np.array(self.structure.absorbing, dtype=bool) if self.structure.absorbing else np.zeros(S, dtype=bool)
        q = np.zeros((H, S, A))
        v = np.zeros(S)
        self.last_diagnostics = []
        for h in range(H - 1, -1, -1):
            for s in range(S):
                if absorbing[s]:
                    continue
                for a in range(A):
                    classes = []
                    idx = t_index.get((0, h + 1, s, a))
                    classes.append(np.zeros(0) if idx is None else target.reward[idx] + v[target.next_state[idx]])
                    for k in range(K):
                        idx = self._hist_index.get((k, h + 1, s, a))
                        classes.append(np.zeros(0) if idx is None else self._hist.reward[idx] + v[self._hist.next_state[idx]])
                    lam, diag = js_weights(classes)
                    if diag:
                        self.last_diagnostics.append(f"h={h + 1} s={s} a={a}: {diag}")
                    r_hat = lam[0] * t_reward[h, s, a] + lam[1:] @ self.stats.mean_reward[:, h, s, a]
                    p_hat = lam[0] * t_transition[h, s, a] + lam[1:] @ self.stats.transition[:, h, s, a]
                    p_hat = p_hat / p_hat.sum()
                    q[h, s, a] = r_hat + w[h, s, a] + p_hat @ v
            v = q[h].max(axis=-1)
        return q


# Contextual agents.


@dataclass(frozen=True)
class LinearModel:
    """Coefficients over (action indicator, features..., intercept)."""

    coef: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float))

    @property
    def feature_dim(self) -> int:
        return len(self.coef) - 2

    def predict(self, action, features) -> np.ndarray:
        features = np.atleast_1d(np.asarray(features, dtype=float))
        return self.coef[0] * np.asarray(action, dtype=float) + features @ self.coef[1:-1] + self.coef[-1]


def linear_least_squares(design, targets, ridge: float = 0.0) -> np.ndarray:
    """argmin ||X b - y||^2 + ridge ||b||^2 via the normal equations (lstsq at ridge 0)."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    if ridge < 0:
        raise ValidationError("ridge must be nonnegative")
    if ridge == 0:
        return np.linalg.lstsq(X, y, rcond=None)[0]
    gram = X.T @ X + ridge * np.eye(X.shape[1])
    return np.linalg.solve(gram, X.T @ y)


def design_matrix(actions, features) -> np.ndarray:
    actions = np.asarray(actions, dtype=float)
    features = np.asarray(features, dtype=float).reshape(len(actions), -1)
    return np.column_stack([actions, features, np.ones(len(actions))])


def fit_linear(actions, features, targets, ridge: float) -> tuple[LinearModel, float]:
    """Ridge fit on (a, x, 1); returns the model and the condition number of the Gram matrix."""
    X = design_matrix(actions, features)
    gram = X.T @ X + ridge * np.eye(X.shape[1])
    return LinearModel(linear_least_squares(X, targets, ridge), ridge), float(np.linalg.cond(gram))


@dataclass(frozen=True, eq=False)
class ContextualPolicy:
    """Per-patient policy: ``for_features(x)`` returns the policy for a patient with features x."""

    agent: "ContextualAgent"
    models: tuple[LinearModel, ...]
    perturbation: np.ndarray  # (H, A), reward frame

    def q_values(self, features) -> np.ndarray:
        return self.agent.patient_q(self, features)

    def for_features(self, features) -> DeterministicPolicy:
        policy = self
        if self.agent.params.contextual_noise == "patient":
            policy = ContextualPolicy(self.agent, self.models, self.agent.draw_noise())
        q = policy.q_values(features)
        actions = np.zeros((self.agent.structure.horizon, self.agent.structure.num_states), dtype=np.int64)
        actions[:, 0] = np.argmax(q, axis=-1)
        return DeterministicPolicy(actions)


class ContextualAgent(Agent):
    """Shared plumbing for the two linear-feature agents on readmission models."""

    tag = "contextual"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        st = self.structure
        if st.num_states != 2 or st.num_actions != 2 or not st.is_absorbing(1):
            raise ValidationError("contextual agents need the two-state readmission structure")
        if self.historical is None or self.historical.samples is None or self.historical.samples.features is None:
            raise MissingDataError("contextual agents need per-sample historical records with features")
        self.condition_numbers: list[float] = []

    def merged_samples(self) -> SampleTable:
        hist = self.historical.samples
        target = self.target_samples()
        if len(target) == 0:
            data = hist
        else:
            if target.features is None:
                raise MissingDataError("target trajectories carry no features")
            data = SampleTable(
                np.concatenate([hist.group, target.group]),
                np.concatenate([hist.h, target.h]),
                np.concatenate([hist.state, target.state]),
                np.concatenate([hist.action, target.action]),
                np.concatenate([hist.reward, target.reward]),
                np.concatenate([hist.next_state, target.next_state]),
                np.concatenate([hist.features, target.features]),
            )
        return data.subset(data.state == 0)

    def draw_noise(self) -> np.ndarray:
        """Reward-frame perturbation per (h, a) from the target counts at state 0."""
        H = self.structure.horizon
        eps_v = np.full((H, 1, 2), float(H))
        counts = self.counts.visits[:, :1, :]
        if self.perturbation.kind in (UCB, GAUSSIAN_TS):
            eps_v = np.vectorize(lambda n: hoeffding_radii(int(n), self.radius_params).capped(H).eps_V)(counts).astype(float)
        w = draw_perturbation(self.perturbation, eps_v, counts, H, 2, self.rng)
        return w[:, 0, :]

    def policy_for_iteration(self, t: int) -> ContextualPolicy:
        noise = self.draw_noise()
        return ContextualPolicy(self, tuple(self.fit(noise)), noise)

    def fit(self, noise: np.ndarray) -> list[LinearModel]:
        raise NotImplementedError

    def patient_q(self, policy: ContextualPolicy, features) -> np.ndarray:
        raise NotImplementedError


class ContextualPAgent(ContextualAgent):
    """Linear readmission probability per week, then exact planning per patient."""

    tag = "contextual-p"

    def fit(self, noise: np.ndarray) -> list[LinearModel]:
        data = self.merged_samples()
        models = []
        for h in range(1, self.structure.horizon + 1):
            mask = data.h == h
            y = (data.next_state[mask] == 1).astype(float)
            model, cond = fit_linear(data.action[mask], data.features[mask], y, self.params.ridge)
            self.condition_numbers.append(cond)
            models.append(model)
        return models

    def fitted_probs(self, models: Sequence[LinearModel], features) -> np.ndarray:
        floor = self.params.p_floor
        probs = np.array([[m.predict(a, features) for a in (0, 1)] for m in models], dtype=float).reshape(len(models), 2)
        return np.clip(probs, floor, 1 - floor)

    def patient_q(self, policy: ContextualPolicy, features) -> np.ndarray:
        p = self.fitted_probs(policy.models, features)
        mdp = readmission_mdp(p, self.params.intervention_cost, self.params.readmission_penalty)
        w = np.zeros((self.structure.horizon, 2, 2))
        w[:, 0, :] = policy.perturbation
        q = perturbed_q_values(mdp.mean_reward, mdp.transition, w, self.structure)
        return q[:, 0, :]


class ContextualQAgent(ContextualAgent):
    """Backward fitted-Q on (a, x, 1) with one-step cost targets."""

    tag = "contextual-q"

    def fit(self, noise: np.ndarray) -> list[LinearModel]:
        data = self.merged_samples()
        c_a, c_r = self.params.intervention_cost, self.params.readmission_penalty
        H = self.structure.horizon
        models: list[LinearModel | None] = [None] * H
        for h in range(H, 0, -1):
            mask = data.h == h
            a = data.action[mask]
            x = data.features[mask]
            readmitted = data.next_state[mask] == 1
            target = c_a * a + c_r * readmitted
            if h < H:
                nxt = models[h]
                # Cost-frame continuation: min over actions of the perturbed fitted Q.
                cont = np.minimum(nxt.predict(0, x) - noise[h, 0], nxt.predict(1, x) - noise[h, 1])
                target = target + np.where(readmitted, 0.0, cont)
            model, cond = fit_linear(a, x, target, self.params.ridge)
            self.condition_numbers.append(cond)
            models[h - 1] = model
        return models

    def patient_q(self, policy: ContextualPolicy, features) -> np.ndarray:
        costs = np.array([[m.predict(a, features) for a in (0, 1)] for m in policy.models], dtype=float).reshape(-1, 2)
        return -costs + policy.perturbation


AGENTS = {
    "personalized": PersonalizedAgent,
    "data-pooling": DataPoolingAgent,
    "complete": CompleteAgent,
    "clustering": ClusteringAgent,
    "james-stein": JamesSteinAgent,
    "contextual-p": ContextualPAgent,
    "contextual-q": ContextualQAgent,
}


def make_agent(tag: str, structure: MdpStructure, iterations: int, **kwargs) -> Agent:
    if tag not in AGENTS:
        raise ValidationError(f"unknown agent '{tag}'; choose from {', '.join(AGENTS)}")
    return AGENTS[tag](structure, iterations, **kwargs)
