"""Structural results for the two-state readmission model, as executable checks.

All functions take readmission specs (weekly probabilities p[h, a], costs
c_a and c_R) and compare closed-form conditions against the optimum found by
value iteration. Epochs are 1-based in every report.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .agents import AgentParams, ContextualQAgent, PerturbationSpec, fit_linear
from .environments import (
    Environment,
    ReadmissionClass,
    ReadmissionSpec,
    SyntheticSpec,
    build_readmission_mdp,
    generate_historical_dataset,
    sample_feature,
)
from .errors import ValidationError
from .mdp import DeterministicPolicy, value_iteration

PATTERN = re.compile(r"0*1*0*")
BOUND_TOL = 1e-9


def _class_index(spec: ReadmissionSpec, which) -> int:
    return spec.index(which) if isinstance(which, str) else int(which)


def _tail_survival(p: np.ndarray) -> np.ndarray:
    """out[h-1] = prod_{i=h}^{H} (1 - p_i) for h = 1..H+1 (last entry is 1)."""
    return np.append(np.cumprod((1 - p)[::-1])[::-1], 1.0)


def optimal_costs(spec: ReadmissionSpec, which=0) -> tuple[DeterministicPolicy, np.ndarray]:
    """Optimal policy and the optimal expected cost-to-go V_h(0), h = 1..H."""
    q, policy, _ = value_iteration(build_readmission_mdp(spec, _class_index(spec, which)))
    return policy, -q.values()[:, 0]


def verify_temporal_pattern(policy) -> bool:
    """True iff the state-0 action sequence has the form 0...0 1...1 0...0 (blocks may be empty)."""
    seq = policy.sequence(0) if isinstance(policy, DeterministicPolicy) else "".join(str(int(a)) for a in policy)
    return PATTERN.fullmatch(seq) is not None


@dataclass(frozen=True)
class TemporalConditionsReport:
    peak: int
    monotone: bool
    margins: tuple[float, ...]
    holds: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _unimodal(values: np.ndarray, peak: int) -> bool:
    d = np.diff(values)
    return bool(np.all(d[: peak - 1] >= 0) and np.all(d[peak - 1 :] <= 0))


def _conditions_at(p: np.ndarray, beta: float, peak: int) -> TemporalConditionsReport:
    H = len(p)
    monotone = _unimodal(p[:, 0], peak) and _unimodal(p[:, 1], peak)
    survive_treated = _tail_survival(p[:, 1])
    survive_untreated = _tail_survival(p[:, 0])
    relative = (p[:, 0] - p[:, 1]) / p[:, 0]
    margins = []
    for h in range(1, H):
        change = relative[h - 1] - relative[h]
        if h <= peak - 1:
            margins.append(float(beta / survive_treated[h] - change))
        else:
            margins.append(float(change - beta / survive_untreated[h]))
    # Equality at the boundary counts as a failure.
    holds = monotone and all(m > 0 for m in margins)
    return TemporalConditionsReport(peak, monotone, tuple(margins), holds)


def check_temporal_conditions(spec: ReadmissionSpec, which=0, peak: int | None = None) -> TemporalConditionsReport:
    """Evaluate the monotonicity and relative-effect conditions for the start/stop pattern.

    Without an explicit ``peak`` every candidate peak week is tried and the
    first one satisfying both conditions is reported; if none does, the
    report for the week of highest untreated risk is returned.
    """
    cls = spec.classes[_class_index(spec, which)]
    p = cls.probs
    H = spec.horizon
    if H == 1:
        return TemporalConditionsReport(1, True, (), True, "single epoch")
    if np.any(p[:, 0] <= 0) or np.any(p >= 1):
        return TemporalConditionsReport(cls.peak_epoch, False, (), False, "untreated risk must lie in (0, 1)")
    if np.any(p[:, 1] > p[:, 0]):
        return TemporalConditionsReport(cls.peak_epoch, False, (), False, "intervention must not raise the risk")
    candidates = [peak] if peak is not None else list(range(1, H + 1))
    for c in candidates:
        if not 1 <= c <= H:
            raise ValidationError(f"peak week must be in 1..{H}, got {c}")
        report = _conditions_at(p, spec.beta, c)
        if report.holds:
            return report
    return _conditions_at(p, spec.beta, peak if peak is not None else cls.peak_epoch)


def _unimodal_draw(rng: np.random.Generator, H: int, peak: int, high: float) -> np.ndarray:
    draws = np.sort(rng.uniform(0.0, high, size=H))
    out = np.empty(H)
    out[peak - 1] = draws[-1]
    rest = rng.permutation(draws[:-1])
    out[: peak - 1] = np.sort(rest[: peak - 1])
    out[peak:] = np.sort(rest[peak - 1 :])[::-1]
    return out


def random_readmission_spec(rng: np.random.Generator, horizon: int | None = None, max_risk: float = 0.6) -> ReadmissionSpec:
    """Random single-class spec whose two risk curves share one peak and satisfy p[h, 0] >= p[h, 1]."""
    H = int(horizon if horizon is not None else rng.integers(2, 7))
    peak = int(rng.integers(1, H + 1))
    a = _unimodal_draw(rng, H, peak, max_risk)
    b = _unimodal_draw(rng, H, peak, max_risk)
    probs = np.column_stack([np.maximum(a, b), np.minimum(a, b)])
    c_R = 10.0
    c_a = float(rng.uniform(0.0, 0.3)) * c_R
    return ReadmissionSpec(H, c_a, c_R, (ReadmissionClass("random", probs),))


def _spec_dict(spec: ReadmissionSpec) -> dict:
    return {
        "horizon": spec.horizon,
        "intervention_cost": spec.intervention_cost,
        "readmission_penalty": spec.readmission_penalty,
        "probs": spec.classes[0].probs.tolist(),
    }


@dataclass
class SuiteReport:
    name: str
    instances: int
    checked: int
    passed: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and self.passed == self.checked and not self.failures

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instances": self.instances,
            "checked": self.checked,
            "passed": self.passed,
            "rate_checked": self.checked / self.instances if self.instances else 0.0,
            "ok": self.ok,
            "failures": self.failures[:10],
        }


def temporal_pattern_suite(num_instances: int, rng: np.random.Generator, target_checked: bool = False) -> SuiteReport:
    """Sample random specs, keep those meeting the start/stop conditions and check the optimal pattern.

    With ``target_checked`` sampling continues until ``num_instances``
    condition-satisfying specs have been checked; otherwise ``num_instances``
    specs are drawn in total.
    """
    report = SuiteReport("temporal-pattern", 0, 0, 0)
    while (report.checked if target_checked else report.instances) < num_instances:
        spec = random_readmission_spec(rng)
        report.instances += 1
        if not check_temporal_conditions(spec).holds:
            continue
        report.checked += 1
        policy, _ = optimal_costs(spec)
        if verify_temporal_pattern(policy):
            report.passed += 1
        else:
            report.failures.append({"spec": _spec_dict(spec), "policy": policy.sequence(0)})
    return report


@dataclass(frozen=True)
class ValueBoundsReport:
    lower: tuple[float, ...]
    values: tuple[float, ...]
    upper: tuple[float, ...]
    holds: bool
    skipped: bool = False

    def __bool__(self) -> bool:
        return self.holds


def value_envelope(spec: ReadmissionSpec, which=0) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds on the optimal cost-to-go from the all-treat and no-treat survival products."""
    p = spec.classes[_class_index(spec, which)].probs
    c_R = spec.readmission_penalty
    lower = (1 - _tail_survival(p[:, 1])[:-1]) * c_R
    upper = (1 - _tail_survival(p[:, 0])[:-1]) * c_R
    return lower, upper


def value_bounds_check(spec: ReadmissionSpec, which=0, values=None, tol: float = BOUND_TOL) -> ValueBoundsReport:
    """Check that optimal costs V_h(0) lie inside the survival-product envelope.

    ``values`` defaults to the value-iteration optimum. Specs where
    intervention raises the risk in some week are skipped (``skipped=True``,
    ``holds=False``).
    """
    p = spec.classes[_class_index(spec, which)].probs
    if values is None:
        _, values = optimal_costs(spec, which)
    values = np.asarray(values, dtype=float)
    lower, upper = value_envelope(spec, which)
    as_tuple = lambda a: tuple(float(v) for v in a)
    if np.any(p[:, 0] < p[:, 1]):
        return ValueBoundsReport(as_tuple(lower), as_tuple(values), as_tuple(upper), False, skipped=True)
    holds = bool(np.all(lower - tol <= values) and np.all(values <= upper + tol))
    return ValueBoundsReport(as_tuple(lower), as_tuple(values), as_tuple(upper), holds)


def value_bounds_suite(num_instances: int, rng: np.random.Generator) -> SuiteReport:
    report = SuiteReport("value-envelope", 0, 0, 0)
    for _ in range(num_instances):
        spec = random_readmission_spec(rng)
        report.instances += 1
        result = value_bounds_check(spec)
        if result.skipped:
            continue
        report.checked += 1
        if result.holds:
            report.passed += 1
        else:
            report.failures.append({"spec": _spec_dict(spec), "values": result.values})
    return report


@dataclass(frozen=True)
class PrioritizationReport:
    high_policy: str
    low_policy: str
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]
    condition: tuple[bool, ...]
    implication: tuple[bool, ...]

    @property
    def condition_holds(self) -> bool:
        return all(self.condition)

    @property
    def implication_holds(self) -> bool:
        return all(self.implication)

    @property
    def consistent(self) -> bool:
        """The implication must hold whenever the condition holds in every week."""
        return self.implication_holds or not self.condition_holds

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(condition_holds=self.condition_holds, implication_holds=self.implication_holds, consistent=self.consistent)
        return out


def prioritization_check(spec: ReadmissionSpec, high="high", low="low") -> PrioritizationReport:
    """Compare the high-risk and low-risk optimal policies against the prioritization condition.

    Per week h the condition is
    gap_low - gap_high < beta / prod_{i>h}(1 - p_low[i, 1]) - beta / prod_{i>h}(1 - p_high[i, 0]),
    and the implication is ``low treats => high treats``.
    """
    hi, lo = _class_index(spec, high), _class_index(spec, low)
    p_hi, p_lo = spec.classes[hi].probs, spec.classes[lo].probs
    beta = spec.beta
    lhs = spec.classes[lo].gaps - spec.classes[hi].gaps
    rhs = beta / _tail_survival(p_lo[:, 1])[1:] - beta / _tail_survival(p_hi[:, 0])[1:]
    high_policy, _ = optimal_costs(spec, hi)
    low_policy, _ = optimal_costs(spec, lo)
    hs, ls = high_policy.sequence(0), low_policy.sequence(0)
    return PrioritizationReport(
        hs,
        ls,
        tuple(float(v) for v in lhs),
        tuple(float(v) for v in rhs),
        tuple(bool(v) for v in lhs < rhs),
        tuple(not (b == "1" and a == "0") for a, b in zip(hs, ls)),
    )


@dataclass(frozen=True)
class MisspecificationReport:
    sample_size: int
    outcome: str
    recovery_error: dict
    max_recovery_error: float
    mixed_deviation: float
    worst_cell: dict
    floor: float
    demonstrative: bool

    @property
    def exceeds_floor(self) -> bool:
        return self.mixed_deviation > self.floor

    def to_dict(self) -> dict:
        out = asdict(self)
        out["exceeds_floor"] = self.exceeds_floor
        return out


def _normal_pdf(x, mean, std):
    return np.exp(-0.5 * ((x - mean) / std) ** 2) / (std * math.sqrt(2 * math.pi))


def _weekly_samples(cls, n, rng, outcome):
    x = np.array([sample_feature(cls, rng) for _ in range(n)])
    a = rng.integers(0, 2, size=n)
    p = np.asarray(cls.split)[:, None] * cls.risk(a, x)[None, :]
    y = p if outcome == "expected" else (rng.random(p.shape) < p).astype(float)
    return a, x, y


def misspecification_demo(
    spec: SyntheticSpec,
    sample_size: int,
    rng: np.random.Generator,
    classes=("target0", "target1"),
    mixture=(0.5, 0.5),
    outcome: str = "expected",
    floor: float = 0.01,
    grid_points: int = 81,
    ridge: float = 0.0,
) -> MisspecificationReport:
    """Fit weekly linear risk models per class and on pooled data from two classes.

    Each class's week-h risk is split[h] * (c1 a + c2 x + c3), so a per-class
    fit should recover split[h] * (c1, c2, c3). The pooled fit is compared
    with the true pooled risk g1(x) p1 + g2(x) p2, where g_i is the posterior
    class probability given x, over a feature grid covering both classes.
    ``outcome="expected"`` regresses the noise-free risk of each sampled
    patient; ``"bernoulli"`` regresses simulated weekly readmission flags.
    """
    if outcome not in ("expected", "bernoulli"):
        raise ValidationError("outcome must be 'expected' or 'bernoulli'")
    if len(classes) != 2 or len(mixture) != 2 or not math.isclose(sum(mixture), 1.0):
        raise ValidationError("the demo mixes exactly two classes with weights summing to one")
    chosen = [spec.classes[_synthetic_index(spec, c)] for c in classes]
    H = spec.horizon

    recovery = {}
    fits = []
    for cls in chosen:
        a, x, y = _weekly_samples(cls, sample_size, rng, outcome)
        truth = np.asarray(cls.split)[:, None] * np.array([cls.treatment_coef, cls.feature_coef, cls.intercept])[None, :]
        errs = []
        for h in range(H):
            model, _ = fit_linear(a, x, y[h], ridge)
            errs.append(float(np.max(np.abs(model.coef - truth[h]))))
        recovery[cls.name] = errs
        fits.append((a, x, y))

    counts = [int(round(q * sample_size)) for q in mixture]
    a = np.concatenate([f[0][:k] for f, k in zip(fits, counts)])
    x = np.concatenate([f[1][:k] for f, k in zip(fits, counts)])
    y = np.concatenate([f[2][:, :k] for f, k in zip(fits, counts)], axis=1)

    lo = min(c.feature_mean - 3 * c.feature_std for c in chosen)
    hi = max(c.feature_mean + 3 * c.feature_std for c in chosen)
    grid = np.linspace(lo, hi, grid_points)
    dens = [q * _normal_pdf(grid, c.feature_mean, c.feature_std) for q, c in zip(mixture, chosen)]
    g1 = dens[0] / (dens[0] + dens[1])
    worst = {"deviation": 0.0}
    for h in range(H):
        model, _ = fit_linear(a, x, y[h], ridge)
        for act in (0, 1):
            true = g1 * chosen[0].split[h] * chosen[0].risk(act, grid) + (1 - g1) * chosen[1].split[h] * chosen[1].risk(act, grid)
            fitted = model.coef[0] * act + model.coef[1] * grid + model.coef[2]
            dev = np.abs(fitted - true)
            i = int(np.argmax(dev))
            if dev[i] > worst["deviation"]:
                worst = {"deviation": float(dev[i]), "week": h + 1, "action": act, "feature": float(grid[i]), "fitted": float(fitted[i]), "true": float(true[i])}

    same_split = np.allclose(chosen[0].split, chosen[1].split)
    same_features = math.isclose(chosen[0].feature_mean, chosen[1].feature_mean) and math.isclose(chosen[0].feature_std, chosen[1].feature_std)
    return MisspecificationReport(
        sample_size=sample_size,
        outcome=outcome,
        recovery_error=recovery,
        max_recovery_error=max(max(v) for v in recovery.values()),
        mixed_deviation=worst["deviation"],
        worst_cell=worst,
        floor=floor,
        demonstrative=not (same_split or same_features),
    )


def _synthetic_index(spec: SyntheticSpec, which) -> int:
    if isinstance(which, str):
        for i, cls in enumerate(spec.classes):
            if cls.name == which:
                return i
        raise KeyError(which)
    return int(which)


@dataclass(frozen=True)
class SignCheckReport:
    fitted: tuple[float, ...]  # action coefficient of the fitted cost model per week
    true_gap: dict  # class name -> Q_cost(h, 1) - Q_cost(h, 0) at the class mean feature
    wrong_weeks: dict  # class name -> 1-based weeks where the signs disagree

    @property
    def any_wrong(self) -> bool:
        return any(self.wrong_weeks.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["any_wrong"] = self.any_wrong
        return out


def contextual_sign_check(env: Environment, history_size: int, rng: np.random.Generator, behavior: str = "uniform") -> SignCheckReport:
    """Fit the contextual-Q model on historical data alone and compare action signs per target class.

    The fit is noise-free. A week counts as wrong-signed for a class when the
    fitted action coefficient and the class's true cost difference between
    treating and not treating are both nonzero and point opposite ways.
    """
    sizes = {env.classes[i].name: history_size for i in env.indices("history")}
    data = generate_historical_dataset(env, behavior, sizes, rng)
    params = AgentParams(intervention_cost=env.spec.intervention_cost, readmission_penalty=env.spec.readmission_penalty)
    agent = ContextualQAgent(env.structure, 1, params=params, perturbation=PerturbationSpec(kind="none"), historical=data)
    H = env.structure.horizon
    fitted = tuple(float(m.coef[0]) for m in agent.fit(np.zeros((H, 2))))
    true_gap, wrong = {}, {}
    for i in env.indices("target"):
        q = value_iteration(env.class_mdps[i])[0]
        gap = [float(-(q.layer(h)[0, 1] - q.layer(h)[0, 0])) for h in range(1, H + 1)]
        name = env.classes[i].name
        true_gap[name] = gap
        wrong[name] = [h + 1 for h in range(H) if fitted[h] * gap[h] < 0]
    return SignCheckReport(fitted, true_gap, wrong)
