"""Sufficient statistics, confidence radii and pooling weights.

Two sources of data meet here. Target data is tracked as raw
:class:`TrajectoryCounts`. Historical data is only ever seen through
:class:`AggregateStats`: per-group sample size, mean reward and empirical
transition vector for every (h, s, a). The pooling agent needs nothing else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError, PoolRLError, ValidationError
from .mdp import ROW_TOL, Trajectory
from .textio import parse_document, parse_floats, render_document

THEORETICAL = "theoretical"
CASE_STUDY = "case-study"


class TrajectoryCounts:
    """Visit counts, reward sums and transition counts per (h, s, a)."""

    def __init__(self, horizon: int, num_states: int, num_actions: int):
        self.visits = np.zeros((horizon, num_states, num_actions), dtype=np.int64)
        self.reward_sum = np.zeros((horizon, num_states, num_actions))
        self.transitions = np.zeros((horizon, num_states, num_actions, num_states), dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.visits.shape

    def add(self, h: int, s: int, a: int, reward: float, next_state: int) -> None:
        self.visits[h - 1, s, a] += 1
        self.reward_sum[h - 1, s, a] += reward
        self.transitions[h - 1, s, a, next_state] += 1

    def add_trajectory(self, trajectory: Trajectory) -> None:
        for step in trajectory.steps:
            self.add(step.h, step.state, step.action, step.reward, step.next_state)

    def add_trajectories(self, trajectories: Iterable[Trajectory]) -> None:
        for trajectory in trajectories:
            self.add_trajectory(trajectory)

    def copy(self) -> "TrajectoryCounts":
        out = TrajectoryCounts(*self.shape)
        out.visits[...] = self.visits
        out.reward_sum[...] = self.reward_sum
        out.transitions[...] = self.transitions
        return out


@dataclass(frozen=True)
class Estimate:
    """A per-cell estimate. ``informative`` is False for the zero-sample sentinel."""

    reward: float
    transition: np.ndarray
    informative: bool = True


def sentinel_estimate(num_states: int) -> Estimate:
    return Estimate(0.0, np.full(num_states, 1.0 / num_states), informative=False)


def mle(counts: TrajectoryCounts, h: int, s: int, a: int) -> Estimate:
    n = int(counts.visits[h - 1, s, a])
    if n == 0:
        return sentinel_estimate(counts.shape[1])
    return Estimate(counts.reward_sum[h - 1, s, a] / n, counts.transitions[h - 1, s, a] / n)


def mle_tables(counts: TrajectoryCounts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized MLE: (reward (H,S,A), transition (H,S,A,S), informative mask)."""
    n = counts.visits
    seen = n > 0
    safe = np.where(seen, n, 1)
    reward = np.where(seen, counts.reward_sum / safe, 0.0)
    S = counts.shape[1]
    transition = np.where(seen[..., None], counts.transitions / safe[..., None], 1.0 / S)
    return reward, transition, seen


@dataclass(frozen=True, eq=False)
class AggregateStats:
    """Historical summaries, arrays indexed (group, h, s, a[, s']).

    Cells with sample_size 0 carry mean_reward 0 and an all-zero transition
    vector.
    """

    groups: tuple[str, ...]
    sample_size: np.ndarray
    mean_reward: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        N = np.array(self.sample_size, dtype=np.int64, copy=True)
        r = np.array(self.mean_reward, dtype=float, copy=True)
        p = np.array(self.transition, dtype=float, copy=True)
        if N.ndim != 4 or r.shape != N.shape or p.shape[:4] != N.shape or p.ndim != 5:
            raise DimensionError("aggregate arrays must be (K, H, S, A) and (K, H, S, A, S)")
        if len(self.groups) != N.shape[0]:
            raise DimensionError("one group name per aggregate block is required")
        if np.any(N < 0):
            raise ValidationError("negative sample size")
        sums = p.sum(axis=-1)
        if np.any(np.abs(sums[N > 0] - 1.0) > ROW_TOL) or np.any(p[N == 0] != 0) or np.any(r[N == 0] != 0):
            raise ValidationError("transition estimates must sum to 1 where N > 0 and be zero where N = 0")
        for arr in (N, r, p):
            arr.setflags(write=False)
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "sample_size", N)
        object.__setattr__(self, "mean_reward", r)
        object.__setattr__(self, "transition", p)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.sample_size.shape[1:]

    @classmethod
    def from_counts(cls, groups: Sequence[str], counts: Sequence[TrajectoryCounts]) -> "AggregateStats":
        N = np.stack([c.visits for c in counts])
        safe = np.where(N > 0, N, 1)
        reward = np.where(N > 0, np.stack([c.reward_sum for c in counts]) / safe, 0.0)
        trans = np.stack([c.transitions for c in counts]) / safe[..., None]
        return cls(tuple(groups), N, reward, trans)

    @classmethod
    def empty(cls, horizon: int, num_states: int, num_actions: int, groups: Sequence[str] = ("history",)) -> "AggregateStats":
        K = len(groups)
        return cls(
            tuple(groups),
            np.zeros((K, horizon, num_states, num_actions), dtype=np.int64),
            np.zeros((K, horizon, num_states, num_actions)),
            np.zeros((K, horizon, num_states, num_actions, num_states)),
        )

    def sums(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(N, reward sums, expected transition counts) per group, reconstructed from means."""
        return self.sample_size, self.mean_reward * self.sample_size, self.transition * self.sample_size[..., None]

    def select(self, indices: Sequence[int]) -> "AggregateStats":
        idx = list(indices)
        return AggregateStats(
            tuple(self.groups[i] for i in idx), self.sample_size[idx], self.mean_reward[idx], self.transition[idx]
        )

    def merged(self, name: str = "merged") -> "AggregateStats":
        """Collapse every group into one by summing sample counts."""
        N, rs, ts = self.sums()
        total = N.sum(axis=0)
        safe = np.where(total > 0, total, 1)
        reward = np.where(total > 0, rs.sum(axis=0) / safe, 0.0)
        trans = np.where(total[..., None] > 0, ts.sum(axis=0) / safe[..., None], 0.0)
        return AggregateStats((name,), total[None], reward[None], trans[None])

    def estimate(self, k: int, h: int, s: int, a: int) -> Estimate:
        if self.sample_size[k, h - 1, s, a] == 0:
            return sentinel_estimate(self.shape[1])
        return Estimate(float(self.mean_reward[k, h - 1, s, a]), self.transition[k, h - 1, s, a])

    # Text format: one row per (group, h, s, a) with N, mean reward and the
    # empirical transition vector. This file is the whole historical interface.

    def to_text(self) -> str:
        K, (H, S, A) = self.num_groups, self.shape
        rows = []
        for k, h, s, a in itertools.product(range(K), range(H), range(S), range(A)):
            rows.append(
                [self.groups[k], h + 1, s, a, int(self.sample_size[k, h, s, a]), float(self.mean_reward[k, h, s, a]), *map(float, self.transition[k, h, s, a])]
            )
        header = {"horizon": H, "states": S, "actions": A}
        cols = "group h s a N mean_reward " + " ".join(f"p({j})" for j in range(S))
        return render_document(header, {"aggregates": (cols, rows)})

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "AggregateStats":
        doc = parse_document(text, source)
        H, S, A = doc.get_int("horizon"), doc.get_int("states"), doc.get_int("actions")
        rows = doc.rows("aggregates")
        names: list[str] = []
        table: dict[tuple, tuple] = {}
        for lineno, tokens in rows:
            if len(tokens) != 6 + S:
                doc.fail(f"aggregate row needs {6 + S} columns, got {len(tokens)}", lineno)
            name = tokens[0]
            vals = parse_floats(doc, lineno, tokens[1:])
            h, s, a, n = (int(v) for v in vals[:4])
            if vals[:4] != [h, s, a, n] or not (1 <= h <= H and 0 <= s < S and 0 <= a < A) or n < 0:
                doc.fail("bad index or sample size in aggregate row", lineno)
            p = np.array(vals[5:])
            if n > 0 and (np.any(p < 0) or abs(p.sum() - 1.0) > ROW_TOL):
                doc.fail("transition estimate does not sum to 1", lineno)
            if n == 0 and (np.any(p != 0) or vals[4] != 0):
                doc.fail("rows with N = 0 must carry zero estimates", lineno)
            if name not in names:
                names.append(name)
            key = (name, h, s, a)
            if key in table:
                doc.fail(f"duplicate aggregate row for {key}", lineno)
            table[key] = (n, vals[4], p)
        N = np.zeros((len(names), H, S, A), dtype=np.int64)
        r = np.zeros(N.shape)
        p = np.zeros(N.shape + (S,))
        for (name, h, s, a), (n, rew, trans) in table.items():
            k = names.index(name)
            N[k, h - 1, s, a] = n
            r[k, h - 1, s, a] = rew
            p[k, h - 1, s, a] = trans
        return cls(tuple(names), N, r, p)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "AggregateStats":
        path = Path(path)
        return cls.from_text(path.read_text(), source=str(path))


@dataclass(frozen=True)
class RadiusParams:
    delta: float
    horizon: int
    num_states: int
    num_actions: int
    iterations: int
    gap: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValidationError(f"confidence delta must lie in (0, 1), got {self.delta}")
        if min(self.horizon, self.num_states, self.num_actions, self.iterations) < 1:
            raise ValidationError("horizon, states, actions and iterations must be positive")
        for name in ("gap", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and nonnegative, got {value}")

    @property
    def log_term(self) -> float:
        """log(2HSAT/delta), the union-bound log factor shared by every radius."""
        return math.log(2 * self.horizon * self.num_states * self.num_actions * self.iterations / self.delta)

    @property
    def sample_threshold(self) -> float:
        """Target sample count at and above which pooling stops paying off."""
        if self.gap == 0:
            return math.inf
        return self.log_term / (2 * self.gap**2)

    def with_gap(self, gap: float) -> "RadiusParams":
        return RadiusParams(self.delta, self.horizon, self.num_states, self.num_actions, self.iterations, gap, self.gamma)


@dataclass(frozen=True)
class ConfidenceRadii:
    """Raw (uncapped) radii. ``capped`` applies the trivial bounds 1, 2 and H."""

    eps_R: float
    eps_P: float
    eps_V: float

    def capped(self, horizon: int) -> "ConfidenceRadii":
        return ConfidenceRadii(min(self.eps_R, 1.0), min(self.eps_P, 2.0), min(self.eps_V, float(horizon)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.eps_R, self.eps_P, self.eps_V)


def trivial_radii(horizon: int) -> ConfidenceRadii:
    return ConfidenceRadii(1.0, 2.0, float(horizon))


def hoeffding_radii(n: int, params: RadiusParams) -> ConfidenceRadii:
    if n < 0:
        raise ValidationError("sample count must be nonnegative")
    if n == 0:
        return trivial_radii(params.horizon)
    lg = params.log_term
    eps_r = math.sqrt(lg / (2 * n))
    eps_p = math.sqrt(2 * (params.num_states * math.log(2) + lg) / n)
    return ConfidenceRadii(eps_r, eps_p, params.horizon * eps_r)


def pooling_weight(n: int, N: int, params: RadiusParams, return_flag: bool = False):
    """Closed-form weight on the target estimate when pooling with one historical group.

    With no target samples the weight is 0 whenever history exists (the
    limit of the closed form at n = 0). ``return_flag`` additionally returns
    True when the radicand guard fired and the weight fell back to 1.
    """
    if n < 0 or N < 0:
        raise ValidationError("sample counts must be nonnegative")
    flagged = False
    if N == 0:
        lam = 1.0
    elif n == 0:
        lam = 0.0
    elif n >= params.sample_threshold:
        lam = 1.0
    else:
        lg, gap = params.log_term, params.gap
        radicand = (N + n) * lg / 2 - gap**2 * N * n
        if not radicand > 0 or not math.isfinite(radicand):
            lam, flagged = 1.0, True
        else:
            lam = (n + N * n * gap / math.sqrt(radicand)) / (N + n)
            lam = min(max(lam, 0.0), 1.0)
    return (lam, flagged) if return_flag else lam


def pooling_radii(lam: float, n: int, N: int, params: RadiusParams) -> ConfidenceRadii:
    """Radii of the pooled estimator lam * target + (1 - lam) * history."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"weight must lie in [0, 1], got {lam}")
    if N == 0 and lam < 1.0:
        raise PoolRLError("a weight below 1 needs historical samples (N = 0)")
    if n == 0 and lam > 0.0:
        if lam == 1.0:
            return trivial_radii(params.horizon)
        raise PoolRLError("a positive target weight needs target samples (n = 0)")
    lg, gap, S = params.log_term, params.gap, params.num_states
    target_part = lam**2 / n if lam > 0 else 0.0
    hist_part = (1 - lam) ** 2 / N if lam < 1 else 0.0
    eps_r = math.sqrt(lg * (target_part + hist_part) / 2) + gap * (1 - lam)
    eps_p = math.sqrt(2 * (S * math.log(2) + lg) * (target_part + hist_part)) + (1 - lam) * gap
    return ConfidenceRadii(eps_r, eps_p, params.horizon * eps_r)


def pool_estimates(lam: float, target: Estimate, history: Estimate) -> Estimate:
    """Convex combination lam * target + (1 - lam) * history."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"weight must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return target
    if lam == 0.0:
        return history
    reward = lam * target.reward + (1 - lam) * history.reward
    transition = lam * np.asarray(target.transition) + (1 - lam) * np.asarray(history.transition)
    return Estimate(reward, transition, target.informative or history.informative)


def estimate_delta(target: Estimate, group: Estimate, gamma: float) -> float:
    """gamma times the L1 distance between transition estimates; 2 gamma if either is uninformative."""
    if not (target.informative and group.informative):
        return 2.0 * gamma
    return gamma * float(np.abs(np.asarray(group.transition) - np.asarray(target.transition)).sum())


# Multi-group weights.
#
# Both objectives share one shape. Writing w_0 = 1 - sum(lam) for the target
# weight and w_k = lam_k for group k, they read
#     f(w) = sqrt(c * sum_j v_j w_j^2) + sum_j b_j w_j,   w on the simplex,
# with v_0 = 1/n, v_k = 1/N_k and b_0 = 0. The KKT conditions give
# w_j proportional to (mu - b_j)_+ / v_j where mu solves
# sum_j (mu - b_j)_+^2 / v_j = c, a monotone piecewise quadratic.


@dataclass(frozen=True)
class MultiGroupWeights:
    weights: np.ndarray
    target_weight: float
    objective: float
    steps: int = 0

    @property
    def all_weights(self) -> np.ndarray:
        return np.concatenate([[self.target_weight], self.weights])


def _objective_terms(n, sizes, gaps, params: RadiusParams, mode: str, h: int | None):
    sizes = np.asarray(sizes, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if sizes.shape != gaps.shape or sizes.ndim != 1:
        raise DimensionError("sizes and gaps must be matching vectors")
    if np.any(sizes < 0) or np.any(gaps < 0) or n < 0:
        raise ValidationError("sample sizes and gaps must be nonnegative")
    if mode == THEORETICAL:
        c = params.log_term / 2
        b = gaps.copy()
    elif mode == CASE_STUDY:
        if h is None or not 1 <= h <= params.horizon:
            raise ValidationError("case-study mode needs the epoch h in 1..H")
        H = params.horizon
        hsa = 2 * H * params.num_states * params.num_actions
        c = math.log(hsa * max(n, 1) ** 2) * (1 + (H - h) ** 2)
        b = (1 + H - h) * gaps
    else:
        raise ValidationError(f"unknown mode '{mode}'")
    return c, sizes, b


def multi_group_objective(lam, n, sizes, gaps, params: RadiusParams, mode: str = THEORETICAL, h: int | None = None) -> float:
    """Radius of the multi-group pooled estimator at historical weights ``lam``."""
    c, sizes, b = _objective_terms(n, sizes, gaps, params, mode, h)
    lam = np.asarray(lam, dtype=float)
    L = 1.0 - lam.sum()
    var = 0.0
    if L > 0:
        if n == 0:
            return math.inf
        var += L**2 / n
    for lk, Nk in zip(lam, sizes):
        if lk > 0:
            if Nk == 0:
                return math.inf
            var += lk**2 / Nk
    return math.sqrt(c * var) + float(b @ lam)


def _water_fill(c: float, v: np.ndarray, b: np.ndarray) -> np.ndarray:
    order = np.argsort(b, kind="stable")
    bs, inv_v = b[order], 1.0 / v[order]
    m = len(bs)
    mu = None
    for k in range(1, m + 1):
        a = inv_v[:k].sum()
        bsum = (bs[:k] * inv_v[:k]).sum()
        csum = (bs[:k] ** 2 * inv_v[:k]).sum()
        disc = max(bsum**2 - a * (csum - c), 0.0)
        root = (bsum + math.sqrt(disc)) / a
        if k == m or root <= bs[k]:
            mu = root
            break
    raw = np.maximum(mu - bs, 0.0) * inv_v
    w = np.zeros(m)
    w[order] = raw / raw.sum()
    return w


def _project_capped_simplex(x: np.ndarray, total_fixed: bool) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x <= 1} (or sum x = 1)."""
    clipped = np.maximum(x, 0.0)
    if not total_fixed and clipped.sum() <= 1.0:
        return clipped
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(x) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(x - theta, 0.0)


def _projected_gradient(c, n, sizes, b, max_steps: int, tol: float):
    K = len(sizes)
    fixed = n == 0

    def f(lam):
        L = 1.0 - lam.sum()
        var = (L**2 / n if n > 0 else 0.0) + float((lam**2 / sizes).sum())
        return math.sqrt(c * var) + float(b @ lam)

    def grad(lam):
        L = 1.0 - lam.sum()
        var = (L**2 / n if n > 0 else 0.0) + float((lam**2 / sizes).sum())
        g = math.sqrt(c * var)
        d_var = 2 * lam / sizes - (2 * L / n if n > 0 else 0.0)
        return c * d_var / (2 * g) + b

    lam = _project_capped_simplex(np.full(K, 1.0 / (K + 1)), fixed)
    val = f(lam)
    step = 1.0
    for it in range(1, max_steps + 1):
        g = grad(lam)
        while True:
            cand = _project_capped_simplex(lam - step * g, fixed)
            diff = cand - lam
            new_val = f(cand)
            if new_val <= val + g @ diff + (diff @ diff) / (2 * step) or step < 1e-20:
                break
            step *= 0.5
        moved = float(np.abs(diff).max())
        lam, val = cand, new_val
        if moved < tol:
            return lam, val, it
        step *= 2.0
    raise ConvergenceError(f"projected gradient did not converge in {max_steps} steps", best=lam, objective=val)


def multi_group_weights(
    n: int,
    sizes,
    gaps,
    params: RadiusParams,
    mode: str = THEORETICAL,
    h: int | None = None,
    method: str = "exact",
    max_steps: int = 10_000,
    tol: float = 1e-13,
) -> MultiGroupWeights:
    """Minimize the multi-group radius over {lam >= 0, sum lam <= 1}.

    ``method="exact"`` solves the KKT system by water-filling; the
    ``"projected-gradient"`` method runs a backtracking projected gradient and
    raises ConvergenceError (carrying the best iterate) at the step cap. Groups
    with no samples get weight 0. With no target samples the target weight is
    forced to 0.
    """
    c, sizes, b = _objective_terms(n, sizes, gaps, params, mode, h)
    K = len(sizes)
    active = np.nonzero(sizes > 0)[0]
    weights = np.zeros(K)
    if len(active) == 0:
        target = 1.0
        obj = multi_group_objective(weights, n, sizes, np.asarray(gaps, float), params, mode, h) if n > 0 else math.inf
        return MultiGroupWeights(weights, target, obj)
    steps = 0
    if method == "exact":
        if n > 0:
            v = np.concatenate([[1.0 / n], 1.0 / sizes[active]])
            bb = np.concatenate([[0.0], b[active]])
            w = _water_fill(c, v, bb)
            weights[active] = w[1:]
        else:
            weights[active] = _water_fill(c, 1.0 / sizes[active], b[active])
    elif method == "projected-gradient":
        lam, _, steps = _projected_gradient(c, n, sizes[active], b[active], max_steps, tol)
        weights[active] = lam
    else:
        raise ValidationError(f"unknown solver method '{method}'")
    target = 0.0 if n == 0 else max(0.0, 1.0 - weights.sum())
    obj = multi_group_objective(weights, n, sizes, np.asarray(gaps, float), params, mode, h)
    return MultiGroupWeights(weights, target, obj, steps)


def merged_group(sizes, gaps) -> tuple[int, float]:
    """Single group equivalent: N = sum N_k, gap = size-weighted mean gap."""
    sizes = np.asarray(sizes, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    total = sizes.sum()
    if total == 0:
        return 0, 0.0
    return int(total), float((sizes * gaps).sum() / total)


def js_weights(samples: Sequence[np.ndarray]) -> tuple[np.ndarray, str | None]:
    """James-Stein weights over classes 0..K, class 0 being the target.

    ``samples[k]`` holds the observed Q values of class k. The overall mean
    is taken over every sample of every class. Returns the weight vector and a
    diagnostic string (None when the formula applied cleanly).
    """
    K = len(samples) - 1
    weights = np.zeros(K + 1)
    weights[0] = 1.0
    if K < 3:
        return weights, "fewer than three historical classes; shrinkage factor degenerate, target only"
    present = [np.asarray(q, dtype=float) for q in samples]
    sizes = np.array([len(q) for q in present])
    if sizes[1:].sum() == 0:
        return weights, "no historical samples"
    means = np.array([q.mean() if len(q) else np.nan for q in present])
    grand = np.concatenate(present).mean()
    spread = np.nansum((means - grand) ** 2)
    if spread == 0:
        return weights, "all class means equal; shrinkage undefined, target only"
    lam = np.zeros(K + 1)
    for k in range(1, K + 1):
        if sizes[k] == 0:
            continue
        within = ((present[k] - means[k]) ** 2).sum()
        lam[k] = min(max(1.0 - (K - 2) * within / (sizes[k] * spread), 0.0), 1.0)
    hist = lam[1:].sum()
    diagnostic = None
    if sizes[0] == 0:
        # Nothing to keep on the target side: spread the mass over history.
        if hist == 0:
            lam[1:] = sizes[1:] / sizes[1:].sum()
        else:
            lam[1:] /= hist
        lam[0] = 0.0
        diagnostic = "no target samples; weights renormalized over historical classes"
    elif hist > 1.0:
        lam[1:] /= hist
        lam[0] = 0.0
        diagnostic = "historical weights exceeded 1 and were renormalized"
    else:
        lam[0] = 1.0 - hist
    return lam, diagnostic


def cluster_membership(group_transition, target_transition, n_target: int, C: float) -> bool:
    """True when the L2 distance is within C / sqrt(n_target); always true at n_target = 0."""
    if n_target <= 0:
        return True
    dist = float(np.linalg.norm(np.asarray(group_transition, float) - np.asarray(target_transition, float)))
    return dist <= C / math.sqrt(n_target)


def regret_bound(radii_fn, params: RadiusParams, p0: float, w_bar: float) -> float:
    """Evaluate the regret-bound expression for a radius schedule ``radii_fn(n)``.

    (1 + 2/p0) H S A sum_{n=1}^{ceil(T/SA)} (eps_R + H (w_bar + 1) eps_P + w_bar eps_V) + 4 H T delta.
    """
    H, S, A, T = params.horizon, params.num_states, params.num_actions, params.iterations
    total = 0.0
    for n in range(1, math.ceil(T / (S * A)) + 1):
        r = radii_fn(n)
        total += r.eps_R + H * (w_bar + 1) * r.eps_P + w_bar * r.eps_V
    return (1 + 2 / p0) * H * S * A * total + 4 * H * T * params.delta


def thompson_p0() -> float:
    """Probability that a standard normal falls below -1."""
    return 0.5 * math.erfc(1 / math.sqrt(2))
