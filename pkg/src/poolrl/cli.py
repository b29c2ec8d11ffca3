"""Command-line front end: run, solve, radii, check and sweep."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis
from .environments import Environment, environment_from_text, load_environment
from .errors import PoolRLError
from .estimators import CASE_STUDY, THEORETICAL, RadiusParams, hoeffding_radii, pooling_radii, pooling_weight
from .harness import ExperimentConfig, emit, load_config, metrics_csv, run_experiment, summarize, summary_json
from .mdp import enumerate_policies_oracle, mdp_from_text, policy_iteration, policy_value, value_iteration

EXIT_INVALID = 2
EXIT_CHECK_FAILED = 1


def load_presets() -> dict:
    return json.loads((resources.files("poolrl") / "data" / "presets.json").read_text())


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override its fields")
    p.add_argument("--environment", help="environment file or shipped environment name")
    p.add_argument("--agent", help="agent tag, or 'oracle' / 'anti-oracle'")
    p.add_argument("--iterations", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--arrivals", type=int, help="episodes per target class per iteration")
    p.add_argument("--history-size", type=int, help="samples per historical class")
    p.add_argument("--behavior", help="historical behavior policy: zero, uniform, optimal or a 0/1 string")
    p.add_argument("--mode", choices=(THEORETICAL, CASE_STUDY))
    p.add_argument("--privacy", choices=("samples", "aggregates-only"))
    p.add_argument("--workers", type=int)
    p.add_argument("--param", type=_key_value, action="append", default=[], metavar="KEY=VALUE", help="agent parameter")
    p.add_argument("--perturb", type=_key_value, action="append", default=[], metavar="KEY=VALUE", help="perturbation setting")
    p.add_argument("--tuned", action="store_true", help="apply the tuned hyper-parameters for the agent")


def _config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    for name in ("environment", "agent", "iterations", "replications", "seed", "arrivals", "history_size", "behavior", "mode", "privacy", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    params = dict(config.params)
    perturbation = dict(config.perturbation)
    agent = changes.get("agent", config.agent)
    if getattr(args, "tuned", False):
        for key, value in load_presets()["tuned"].get(agent, {}).items():
            (perturbation if key == "explore_sigma" else params)[key] = value
    params.update(dict(args.param))
    perturbation.update(dict(args.perturb))
    changes["params"] = params
    changes["perturbation"] = perturbation
    return config.replace(**changes)


def cmd_run(args) -> int:
    config = _config_from_args(args)
    if args.out_csv:
        config = config.replace(out_csv=args.out_csv)
    if args.out_json:
        config = config.replace(out_json=args.out_json)
    record = run_experiment(config)
    summary = emit(record, config.out_csv, config.out_json)
    if config.out_json is None:
        sys.stdout.write(summary_json(record, summary))
    if config.out_csv is None and args.print_csv:
        sys.stdout.write(metrics_csv(summary))
    return 0


def _solve_mdp(mdp, method: str) -> dict:
    if method == "value":
        _, policy, value = value_iteration(mdp)
    elif method == "policy":
        policy = policy_iteration(mdp)
        value = policy_value(mdp, policy)
    else:
        value, optimal, _, _ = enumerate_policies_oracle(mdp)
        policy = optimal[0]
    return {
        "policy": policy.actions.tolist(),
        "sequence": policy.sequence(mdp.initial_state),
        "value": float(mdp.objective(value)),
        "sense": mdp.sense,
    }


def cmd_solve(args) -> int:
    path = Path(args.model)
    text = path.read_text() if path.exists() else None
    if text is None:
        spec = load_environment(args.model)
    elif "kind" in _header_keys(text):
        spec = environment_from_text(text, source=str(path))
    else:
        spec = None
    if spec is None:
        out = {"model": _solve_mdp(mdp_from_text(text, source=str(path)), args.method)}
    else:
        env = Environment(spec)
        out = {}
        for cls, mdp in zip(env.classes, env.class_mdps):
            entry = _solve_mdp(mdp, args.method)
            if getattr(cls, "reported_policy", None) is not None:
                entry["reported"] = cls.reported_policy
            out[cls.name] = entry
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def _header_keys(text: str) -> set[str]:
    keys = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line.startswith("["):
            break
        if "=" in line:
            keys.add(line.split("=", 1)[0].strip())
    return keys


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def cmd_radii(args) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "N", "gap", "delta", "weight", "hoeffding_R", "hoeffding_P", "hoeffding_V", "pooled_R", "pooled_P", "pooled_V"])
    for delta, gap, N, n in itertools.product(args.delta, args.gap, args.N, args.n):
        params = RadiusParams(delta, args.horizon, args.states, args.actions, args.iterations, gap=gap)
        hoeff = hoeffding_radii(n, params)
        lam = pooling_weight(n, N, params)
        pooled = pooling_radii(lam, n, N, params) if N > 0 or lam == 1.0 else hoeff
        if args.capped:
            hoeff, pooled = hoeff.capped(args.horizon), pooled.capped(args.horizon)
        writer.writerow([n, N, repr(gap), repr(delta), repr(lam), *map(repr, hoeff.as_tuple()), *map(repr, pooled.as_tuple())])
    sys.stdout.write(buf.getvalue())
    return 0


SUITES = ("temporal", "envelope", "prioritization", "misspecification")


def cmd_check(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    rng = np.random.default_rng(args.seed)
    report, ok = {}, True
    for name in suites:
        if name == "temporal":
            result = analysis.temporal_pattern_suite(args.instances, rng, target_checked=True)
            report[name], passed = result.to_dict(), result.ok
        elif name == "envelope":
            result = analysis.value_bounds_suite(args.instances, rng)
            report[name], passed = result.to_dict(), result.ok
        elif name == "prioritization":
            entries = {}
            passed = True
            for fixture in ("priority_pair_a", "priority_pair_b"):
                spec = load_environment(fixture)
                result = analysis.prioritization_check(spec)
                reported = {cls.name: cls.reported_policy for cls in spec.classes}
                matches = result.high_policy == reported["high"] and result.low_policy == reported["low"]
                entries[fixture] = dict(result.to_dict(), matches_reported=matches)
                passed = passed and matches and result.consistent
            report[name] = entries
        else:
            spec = load_environment(args.environment)
            result = analysis.misspecification_demo(spec, args.sample_size, rng)
            signs = analysis.contextual_sign_check(Environment(spec), args.history_size, rng)
            report[name] = dict(result.to_dict(), contextual_signs=signs.to_dict())
            passed = result.max_recovery_error <= 1e-2 and result.exceeds_floor and signs.any_wrong
        report[name]["passed"] = passed
        ok = ok and passed
    report["ok"] = ok
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out_json:
        Path(args.out_json).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else EXIT_CHECK_FAILED


def cmd_sweep(args) -> int:
    base = _config_from_args(args)
    presets = load_presets()
    sigmas = args.sigma or presets["grids"]["explore_sigma"]
    extra_name = presets["extra_grid"].get(base.agent)
    extras = [None]
    if extra_name is not None:
        extras = args.extra or presets["grids"][extra_name]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "explore_sigma", "extra_name", "extra_value", "total_regret", "total_regret_ci_half", "total_cost"])
    for sigma, extra in itertools.product(sigmas, extras):
        params = dict(base.params)
        if extra is not None:
            params[extra_name] = extra
        config = base.replace(perturbation=dict(base.perturbation, explore_sigma=sigma), params=params)
        totals = summarize(run_experiment(config)).totals
        ci = totals["total_regret_ci_half"]
        writer.writerow(
            [base.agent, repr(float(sigma)), extra_name or "", "" if extra is None else repr(float(extra)),
             repr(totals["total_regret"]), "" if ci is None else repr(ci), repr(totals["total_cost"])]
        )
        if args.out_csv is None:
            sys.stdout.write(buf.getvalue())
            buf.seek(0)
            buf.truncate()
    if args.out_csv is not None:
        Path(args.out_csv).write_text(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolrl", description="Data-pooling reinforcement learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded multi-replication experiment")
    _add_experiment_flags(run)
    run.add_argument("--out-csv", help="per-iteration metrics CSV")
    run.add_argument("--out-json", help="summary JSON (printed to stdout when omitted)")
    run.add_argument("--print-csv", action="store_true", help="also print the CSV when --out-csv is omitted")
    run.set_defaults(func=cmd_run)

    solve = sub.add_parser("solve", help="solve an MDP file or every class of an environment")
    solve.add_argument("model", help="MDP file, environment file or shipped environment name")
    solve.add_argument("--method", choices=("value", "policy", "enumerate"), default="value")
    solve.set_defaults(func=cmd_solve)

    radii = sub.add_parser("radii", help="tabulate Hoeffding and data-pooling radii")
    radii.add_argument("--n", type=_int_list, default=_int_list("0:10"), help="target counts, e.g. 0:20 or 1,5,10")
    radii.add_argument("--N", type=_int_list, default=[100], help="historical counts")
    radii.add_argument("--gap", type=_float_list, default=[0.1])
    radii.add_argument("--delta", type=_float_list, default=[0.1])
    radii.add_argument("--horizon", type=int, default=4)
    radii.add_argument("--states", type=int, default=2)
    radii.add_argument("--actions", type=int, default=2)
    radii.add_argument("--iterations", type=int, default=50)
    radii.add_argument("--capped", action="store_true", help="apply the trivial caps 1, 2 and H")
    radii.set_defaults(func=cmd_radii)

    check = sub.add_parser("check", help="run the structural-result suites and print a JSON report")
    check.add_argument("--suite", choices=SUITES + ("all",), default="all")
    check.add_argument("--instances", type=int, default=1000)
    check.add_argument("--sample-size", type=int, default=100_000)
    check.add_argument("--environment", default="synthetic", help="synthetic spec for the misspecification demo")
    check.add_argument("--history-size", type=int, default=1000, help="episodes per history class for the contextual sign check")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--out-json")
    check.set_defaults(func=cmd_check)

    sweep = sub.add_parser("sweep", help="grid over exploration scale and the agent's extra hyper-parameter")
    _add_experiment_flags(sweep)
    sweep.add_argument("--sigma", type=_float_list, help="exploration scales (default: preset grid)")
    sweep.add_argument("--extra", type=_float_list, help="values for gamma or cluster_c (default: preset grid)")
    sweep.add_argument("--out-csv")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PoolRLError, FileNotFoundError, KeyError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"poolrl {args.command}: error: {message}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
