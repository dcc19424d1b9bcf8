"""Command-line surface: generate, validate, solve, verify, oracle,
bench, and sweep.

Exit codes: 0 ok, 2 validation failure, 3 no feasible solution (or an
infeasible verdict), 4 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path

from . import generators
from .coordinator import RunResult, SolverConfig, solve, write_trace
from .instance import Instance, load_instance, save_instance, validate
from .model import objective
from .schedule import Solution, solution_from_json_dict, solution_to_json_dict
from .verify import OracleLimits, brute_force_optimum, verify

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_FEASIBLE = 3
EXIT_BUDGET = 4

CONFIG_FIELDS = (
    "zeta",
    "rho0",
    "beta",
    "multiplier_init",
    "init_low",
    "init_high",
    "seed",
    "iteration_limit",
    "time_limit_s",
    "cost_target",
    "stall_limit",
    "window_cap",
    "strategy",
    "lr_delta0",
    "lr_path_budget",
    "lr_reduction",
)


def _load_config(args) -> SolverConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        for key, value in data.items():
            if key not in CONFIG_FIELDS:
                raise SystemExit(f"unknown config field {key!r}")
            values[key] = value
    for key in ("seed", "strategy"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "iter_limit", None) is not None:
        values["iteration_limit"] = args.iter_limit
    if getattr(args, "time_limit_s", None) is not None:
        values["time_limit_s"] = args.time_limit_s
    if values.get("strategy") == "lr":
        values.setdefault("multiplier_init", "zeros")
    if "seed" in values and values.get("multiplier_init") is None and values["seed"]:
        values.setdefault("multiplier_init", "uniform")
    return SolverConfig(**values).validated()


def _read_instance(path: str) -> Instance:
    instance = load_instance(path)
    report = validate(instance)
    if not report.ok:
        print("instance validation failed:", file=sys.stderr)
        print(report.summary(), file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    return instance


def write_solution_file(path, instance: Instance, solution: Solution, feasible: bool, meta=None):
    data = solution_to_json_dict(solution)
    cost = objective(instance, solution)
    data["cost"] = {
        "labor": cost.labor,
        "charging": cost.charging,
        "tardiness": cost.tardiness,
        "total": cost.total,
    }
    data["feasible"] = feasible
    data["meta"] = dict(meta or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_validate(args) -> int:
    instance = load_instance(args.instance)
    report = validate(instance)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _parse_travel_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    return {(int(u), int(v)): int(t) for u, v, t in rows}


def cmd_gen(args) -> int:
    kind = args.family
    if kind == "example1":
        table = _parse_travel_file(args.travel_times) if args.travel_times else None
        instance = generators.example1_instance(travel_times=table)
    elif kind == "example3":
        if not args.topology:
            print("example3 requires --topology", file=sys.stderr)
            return EXIT_VALIDATION
        with open(args.topology, "r", encoding="utf-8") as fh:
            topology = json.load(fh)
        instance = generators.example3_instance(
            topology, scenario=args.scenario, period_minutes=args.period_minutes
        )
    elif kind == "example3-topology":
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(generators.example3_default_topology(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
        return EXIT_OK
    elif kind == "random":
        instance = generators.random_tiny_instance(args.seed)
    elif kind == "detour":
        full, restricted = generators.detour_pair(args.seed)
        save_instance(full, args.out)
        restricted_path = args.out_restricted or str(args.out) + ".restricted.json"
        save_instance(restricted, restricted_path)
        print(f"wrote {args.out} and {restricted_path}")
        return EXIT_OK
    else:  # pragma: no cover - argparse restricts choices
        return EXIT_VALIDATION
    save_instance(instance, args.out)
    placeholders = instance.meta.get("placeholder_data", [])
    if placeholders:
        print(f"wrote {args.out} (placeholder fields: {', '.join(placeholders)})")
    else:
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = _read_instance(args.instance)
    config = _load_config(args)
    started = time.monotonic()
    result = solve(instance, config)
    elapsed = time.monotonic() - started
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace(result.trace, out_dir / "trace.csv")
    if result.best_solution is not None:
        write_solution_file(
            out_dir / "solution.json",
            instance,
            result.best_solution,
            feasible=True,
            meta={"strategy": config.strategy, "iterations": result.iterations,
                  "wall_time_s": round(elapsed, 3)},
        )
    print(
        f"status={result.status} best={result.best_cost} iterations={result.iterations} "
        f"subproblem_solves={result.counters['subproblem_calls']} wall={elapsed:.2f}s"
    )
    if result.status != "ok":
        return EXIT_NO_FEASIBLE
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = _read_instance(args.instance)
    with open(args.solution, "r", encoding="utf-8") as fh:
        solution = solution_from_json_dict(json.load(fh))
    report = verify(instance, solution)
    print(f"verdict: {'feasible' if report.feasible else 'infeasible'}")
    cost = report.cost
    print(f"cost: labor={cost.labor} charging={cost.charging} tardiness={cost.tardiness} total={cost.total}")
    if not report.feasible:
        for tag, count in sorted(report.counts.items()):
            print(f"  {tag}: {count} violation(s), e.g. {report.residuals[tag][0]}")
        return EXIT_NO_FEASIBLE
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = _read_instance(args.instance)
    limits = OracleLimits(node_budget=args.budget)
    result = brute_force_optimum(instance, limits)
    if result.status == "budget_exceeded":
        print(f"budget exceeded after {result.nodes_explored} nodes")
        return EXIT_BUDGET
    if result.status == "infeasible":
        print("infeasible")
        return EXIT_NO_FEASIBLE
    print(f"optimal cost: {result.cost}")
    if args.out:
        write_solution_file(args.out, instance, result.solution, feasible=True, meta={"oracle": True})
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    """Coordination-strategy shootout over seeded multiplier starts.

    Work is counted in label expansions and reported both raw and as
    exact-solve equivalents (expansions divided by the mean cost of one
    cold exact subproblem solve at the shared starting multipliers)."""
    instance = _read_instance(args.instance)
    if args.target is not None:
        target = args.target
    else:
        ref = solve(instance, SolverConfig(
            iteration_limit=args.iter_limit, stall_limit=args.stall_limit,
            time_limit_s=args.time_limit_s))
        if ref.status != "ok":
            print("reference run found no feasible solution", file=sys.stderr)
            return EXIT_NO_FEASIBLE
        target = ref.best_cost
    print(f"target feasible cost: {target}")

    rows = []
    wins = 0
    for seed in range(1, args.seeds + 1):
        slblr = solve(instance, SolverConfig(
            iteration_limit=args.iter_limit, stall_limit=args.stall_limit,
            time_limit_s=args.time_limit_s, multiplier_init="uniform", seed=seed,
            cost_target=target))
        base = solve(instance, SolverConfig(
            strategy="lr", iteration_limit=args.lr_iter_limit,
            time_limit_s=args.time_limit_s, multiplier_init="uniform", seed=seed,
            cost_target=target))
        e_s = slblr.expansions_to_cost(target)
        e_b = base.expansions_to_cost(target)
        base_spent = e_b if e_b is not None else base.counters["expansions_total"]
        exact_unit = base.counters["expansions_total"] / max(1, base.counters["subproblem_calls"])
        win = e_s is not None and e_s < base_spent
        wins += int(win)
        rows.append((seed, e_s, e_b, base_spent, exact_unit, win))
        print(
            f"seed {seed}: slblr_expansions={e_s} baseline_expansions="
            f"{e_b if e_b is not None else f'>{base_spent} (target not reached)'} "
            f"slblr_solves={slblr.counters['subproblem_calls']} "
            f"baseline_solves={base.counters['subproblem_calls']} win={win}"
        )
    print(f"slblr reached the target with less work in {wins}/{args.seeds} seeds")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("seed,slblr_expansions,baseline_expansions_to_target,baseline_expansions_spent,mean_exact_solve_expansions,slblr_win\n")
            for seed, e_s, e_b, spent, unit, win in rows:
                fh.write(f"{seed},{e_s},{e_b if e_b is not None else ''},{spent},{unit:.1f},{int(win)}\n")
        print(f"wrote {args.out}")
    return EXIT_OK


SWEEP_PARAMETERS = ("batteryCapacityScale", "chargePowerScale", "chargersPerNode")


def apply_sweep_point(instance: Instance, parameter: str, factor: float) -> Instance:
    if parameter == "batteryCapacityScale":
        return generators.scale_battery_capacity(instance, factor)
    if parameter == "chargePowerScale":
        return generators.scale_charge_power(instance, factor)
    if parameter == "chargersPerNode":
        return generators.set_chargers_per_node(instance, int(factor))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def cmd_sweep(args) -> int:
    instance = _read_instance(args.instance)
    factors = [float(f) for f in args.factors.split(",")]
    if any(b >= a for a, b in zip(factors[1:], factors)):
        print("scale factors must be strictly increasing", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for factor in factors:
        point = apply_sweep_point(instance, args.parameter, factor)
        started = time.monotonic()
        if args.backend == "oracle":
            result = brute_force_optimum(point, OracleLimits(node_budget=args.budget))
            if result.status == "budget_exceeded":
                print(f"factor {factor}: oracle budget exceeded", file=sys.stderr)
                return EXIT_BUDGET
            if result.status == "infeasible":
                print(f"factor {factor}: infeasible", file=sys.stderr)
                return EXIT_NO_FEASIBLE
            cost, used = result.cost, result.solution.trucks_used()
        else:
            run_result = solve(point, _load_config(args))
            if run_result.status != "ok":
                print(f"factor {factor}: no feasible solution", file=sys.stderr)
                return EXIT_NO_FEASIBLE
            cost, used = run_result.best_cost, run_result.best_solution.trucks_used()
        rows.append((factor, cost, used, time.monotonic() - started))
    lines = ["scale,best_cost,trucks_used,wall_time_s"]
    for factor, cost, used, wall in rows:
        lines.append(f"{factor},{cost},{used},{wall:.3f}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jrc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an instance file")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="generate instances")
    p.add_argument("family", choices=["example1", "example3", "example3-topology", "random", "detour"])
    p.add_argument("--out", required=True)
    p.add_argument("--out-restricted")
    p.add_argument("--travel-times", help="JSON list of [from, to, periods] rows")
    p.add_argument("--topology")
    p.add_argument("--scenario", default="base")
    p.add_argument("--period-minutes", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run the decomposition solver")
    p.add_argument("--instance", required=True)
    p.add_argument("--config")
    p.add_argument("--strategy", choices=["slblr", "lr"])
    p.add_argument("--seed", type=int)
    p.add_argument("--iter-limit", type=int)
    p.add_argument("--time-limit-s", type=float)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="verify a solution file")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="exact optimum by brute force (tiny instances)")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", type=int, default=5_000_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="compare coordination strategies over seeds")
    p.add_argument("--instance", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--target", type=float)
    p.add_argument("--iter-limit", type=int, default=2000)
    p.add_argument("--lr-iter-limit", type=int, default=60)
    p.add_argument("--stall-limit", type=int, default=800)
    p.add_argument("--time-limit-s", type=float, default=60.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="resource sweeps (plot-ready CSV)")
    p.add_argument("--instance", required=True)
    p.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--factors", required=True, help="comma-separated, strictly increasing")
    p.add_argument("--backend", choices=["oracle", "slblr"], default="oracle")
    p.add_argument("--budget", type=int, default=5_000_000)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=["slblr", "lr"])
    p.add_argument("--iter-limit", type=int)
    p.add_argument("--time-limit-s", type=float)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
