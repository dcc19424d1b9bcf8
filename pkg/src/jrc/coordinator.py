"""Coordination loops: surrogate level-based relaxation and baseline LR.

One iteration of the main loop solves a single truck's subproblem under
the surrogate stopping rule, recomputes the violation vector with that
fresh solution substituted into the pool, prices the pool with the
absolute-value Lagrangian, takes a Polyak step scaled by the current
level value, and keeps a window of multiplier iterates whose divergence
(decided exactly by :mod:`jrc.lpfeas`) triggers the next level value.
Whenever the violation vector hits zero the pool is a feasible fleet
solution: its cost is recorded and the penalty coefficient decays.

The baseline strategy re-solves every truck exactly each iteration and
adjusts its level by the classical path-length rule; it shares the trace
schema so the two coordination styles compare row for row.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .instance import Instance, eligible_trucks
from .lpfeas import window_diverges
from .model import (
    CouplingSpace,
    coupling_space,
    coupling_violations,
    lagrangian_value,
    objective,
)
from .schedule import Solution, empty_solution
from .subproblem import (
    affine_pricing,
    build_truck_graph,
    fixed_context,
    solve_exact,
    solve_priced,
    solve_surrogate,
)

BOOTSTRAP_DELTA = 0.1
# relative gap below which the current level cannot drive further steps
REFRESH_TOL = 0.05
# growth of the refresh offset while no divergence is provable
REFRESH_ESCALATION = 4.0


@dataclass(frozen=True)
class SolverConfig:
    zeta: float = 0.5
    rho0: float = 5.0
    beta: float = 1.05
    multiplier_init: str = "zeros"  # "zeros" | "uniform"
    init_low: float = -50.0
    init_high: float = 50.0
    seed: int = 0
    iteration_limit: int = 2000
    time_limit_s: Optional[float] = None
    cost_target: Optional[float] = None
    stall_limit: Optional[int] = None
    window_cap: int = 30
    strategy: str = "slblr"  # "slblr" | "lr"
    # baseline level adjustment (path-length rule)
    lr_delta0: Optional[float] = None
    lr_path_budget: float = 20.0
    lr_reduction: float = 2.0

    def validated(self) -> "SolverConfig":
        if not 0.0 < self.zeta < 1.0:
            raise ValueError("zeta must lie in (0, 1)")
        if self.beta <= 1.0:
            raise ValueError("beta must exceed 1")
        if self.rho0 <= 0.0:
            raise ValueError("rho0 must be positive")
        if self.multiplier_init not in ("zeros", "uniform"):
            raise ValueError("multiplier_init must be 'zeros' or 'uniform'")
        if self.strategy not in ("slblr", "lr"):
            raise ValueError("strategy must be 'slblr' or 'lr'")
        return self


@dataclass
class TraceRow:
    k: int
    v: int
    L_rho: float
    H_l1: int
    H_l2sq: int
    alpha: float
    q_max: float
    q_bar: float
    rho: float
    best_feasible: float
    event: str  # "level_update" | "feasible" | "none"
    detail: str = ""  # not part of the CSV: divergence vs refresh etc.


TRACE_COLUMNS = (
    "k",
    "v",
    "L_rho",
    "H_l1",
    "H_l2sq",
    "alpha",
    "q_max",
    "q_bar",
    "rho",
    "best_feasible",
    "event",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_trace(rows: list[TraceRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, col)) for col in TRACE_COLUMNS])


def trace_csv_bytes(rows: list[TraceRow]) -> bytes:
    lines = [",".join(TRACE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in TRACE_COLUMNS))
    return ("\n".join(lines) + "\n").encode()


@dataclass
class RunResult:
    status: str  # "ok" | "no_feasible"
    best_cost: Optional[float]
    best_solution: Optional[Solution]
    multipliers: np.ndarray
    space: CouplingSpace
    trace: list[TraceRow]
    counters: dict
    iterations: int

    def iterations_to_cost(self, target: float, tol: float = 1e-9) -> Optional[int]:
        for row in self.trace:
            if row.best_feasible <= target + tol:
                return row.k
        return None

    def expansions_to_cost(self, target: float, tol: float = 1e-9) -> Optional[int]:
        by_iter = self.counters["expansions_by_iter"]
        total = 0
        for row in self.trace:
            total += by_iter[row.k - 1]
            if row.best_feasible <= target + tol:
                return total
        return None


# ---------------------------------------------------------------------------
# Coordination arithmetic (unit-testable pieces)
# ---------------------------------------------------------------------------


def step_size(zeta: float, fleet_size: int, q_bar: float, level_gap_value: float, h_sq: float) -> float:
    """Polyak step scaled by the fleet size and the level surplus."""
    if h_sq <= 0:
        raise ValueError("step size undefined at zero violation (feasibility path)")
    if q_bar < level_gap_value:
        raise ValueError("level value below the surrogate dual value; refresh required")
    return zeta * (q_bar - level_gap_value) / fleet_size / h_sq


def update_multipliers(space: CouplingSpace, lam: np.ndarray, alpha: float, h: np.ndarray) -> np.ndarray:
    """Step along the violation direction, then clip the capacity block."""
    return space.project(lam + alpha * np.asarray(h, dtype=np.float64))


def level_candidate(alpha: float, fleet_size: int, h_sq: float, level_gap_value: float) -> float:
    return alpha * fleet_size * h_sq + level_gap_value


def bootstrap_level(surrogate_value: float) -> float:
    """Level used before the first divergence detection (and whenever the
    surrogate dual value overtakes the current level)."""
    if surrogate_value > 0:
        return surrogate_value * (1.0 + BOOTSTRAP_DELTA)
    return surrogate_value + BOOTSTRAP_DELTA * max(1.0, abs(surrogate_value))


@dataclass
class LevelState:
    """Level bookkeeping: running candidate maximum and iterate window."""

    q_bar: Optional[float] = None
    q_max: float = -math.inf
    window: list = field(default_factory=list)
    updates: int = 0
    offset: float = BOOTSTRAP_DELTA  # escalating refresh offset

    def record_candidate(self, candidate: float) -> None:
        if candidate > self.q_max:
            self.q_max = candidate

    def push_iterate(self, lam: np.ndarray, cap: int) -> None:
        self.window.append(lam.copy())
        if len(self.window) > cap:
            del self.window[0]


def maybe_update_level(state: LevelState, lam: np.ndarray) -> bool:
    """Divergence check over the iterate window; on infeasibility adopt
    the running candidate maximum as the new level and restart the
    window from the current iterate."""
    if len(state.window) < 2:
        return False
    if not window_diverges(state.window):
        return False
    state.q_bar = state.q_max
    state.q_max = -math.inf
    state.window = [lam.copy()]
    state.updates += 1
    return True


def _init_multipliers(space: CouplingSpace, config: SolverConfig) -> np.ndarray:
    if config.multiplier_init == "zeros":
        return space.zeros()
    rng = np.random.default_rng(config.seed)
    lam = rng.uniform(config.init_low, config.init_high, space.size)
    return space.project(lam)


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def run(instance: Instance, config: SolverConfig = SolverConfig()) -> RunResult:
    """Surrogate level-based coordination of the truck subproblems."""
    config = config.validated()
    space = coupling_space(instance)
    lam = _init_multipliers(space, config)
    pool = empty_solution(instance)
    fleet = list(instance.fleet)
    graphs = {t.id: build_truck_graph(instance, t) for t in fleet}
    incumbents = {t.id: pool.schedule_for(t.id) for t in fleet}

    rho = config.rho0
    level = LevelState(window=[lam.copy()])
    best_cost: Optional[float] = None
    best_solution: Optional[Solution] = None
    best_iteration = 0
    trace: list[TraceRow] = []
    expansions_by_iter: list[int] = []
    counters = {
        "subproblem_calls": 0,
        "improved": 0,
        "exact_optimal": 0,
        "expansions_total": 0,
    }
    started = time.monotonic()
    cursor = 0
    k = 0

    while k < config.iteration_limit and fleet:
        if config.time_limit_s is not None and time.monotonic() - started > config.time_limit_s:
            break
        k += 1
        truck = fleet[cursor]
        ctx = fixed_context(instance, truck, pool)
        result = solve_surrogate(
            instance, truck, lam, rho, ctx, incumbents[truck.id], space, graphs[truck.id]
        )
        counters["subproblem_calls"] += 1
        counters["expansions_total"] += result.expansions
        counters["improved" if result.flag == "improved" else "exact_optimal"] += 1
        expansions_by_iter.append(result.expansions)
        incumbents[truck.id] = result.schedule
        pool = pool.replace(result.schedule)

        h = coupling_violations(instance, pool, space)
        surrogate_dual = lagrangian_value(instance, pool, lam, rho, space)
        h_l1 = int(np.abs(h).sum())
        h_sq = int(h @ h)
        alpha = 0.0
        event, detail = "none", ""

        if h_sq == 0:
            cost = objective(instance, pool).total
            if best_cost is None or cost < best_cost - 1e-12:
                best_cost, best_solution, best_iteration = cost, pool, k
            rho = rho / config.beta
            event = "feasible"
            level.record_candidate(level_candidate(0.0, len(fleet), 0, surrogate_dual))
        else:
            if level.q_bar is None:
                level.q_bar = bootstrap_level(surrogate_dual)
                level.offset = level.q_bar - surrogate_dual
                detail = "bootstrap"
            elif level.q_bar - surrogate_dual <= REFRESH_TOL * max(1.0, abs(level.q_bar)):
                # level exhausted before any divergence was provable:
                # raise it by a doubling offset so a too-low level cannot
                # freeze the multipliers (detection brings it back down)
                level.offset = max(level.offset * REFRESH_ESCALATION, BOOTSTRAP_DELTA)
                level.q_bar = surrogate_dual + level.offset
                level.q_max = -math.inf
                level.window = [lam.copy()]
                event, detail = "level_update", "refresh"
            alpha = step_size(config.zeta, len(fleet), level.q_bar, surrogate_dual, h_sq)
            lam = update_multipliers(space, lam, alpha, h)
            level.record_candidate(level_candidate(alpha, len(fleet), h_sq, surrogate_dual))
            level.push_iterate(lam, config.window_cap)
            if maybe_update_level(level, lam):
                event, detail = "level_update", "divergence"
                level.offset = BOOTSTRAP_DELTA * max(1.0, abs(level.q_bar))

        trace.append(
            TraceRow(
                k=k,
                v=truck.id,
                L_rho=surrogate_dual,
                H_l1=h_l1,
                H_l2sq=h_sq,
                alpha=alpha,
                q_max=level.q_max,
                q_bar=level.q_bar if level.q_bar is not None else math.inf,
                rho=rho,
                best_feasible=best_cost if best_cost is not None else math.inf,
                event=event,
                detail=detail,
            )
        )

        if best_cost is not None:
            if config.cost_target is not None and best_cost <= config.cost_target + 1e-9:
                break
            if best_cost <= 0.0:
                break  # every cost term is nonnegative, so zero is optimal
            if config.stall_limit is not None and k - best_iteration >= config.stall_limit:
                break
        cursor = (cursor + 1) % len(fleet)

    counters["expansions_by_iter"] = expansions_by_iter
    counters["level_updates"] = level.updates
    status = "ok" if best_cost is not None else "no_feasible"
    return RunResult(
        status=status,
        best_cost=best_cost,
        best_solution=best_solution,
        multipliers=lam,
        space=space,
        trace=trace,
        counters=counters,
        iterations=k,
    )


# ---------------------------------------------------------------------------
# Dual lower bound (exact subproblem pass at zero penalty)
# ---------------------------------------------------------------------------


def dual_lower_bound(instance: Instance, lam: np.ndarray, space: Optional[CouplingSpace] = None) -> float:
    """Valid lower bound on the optimal fleet cost at fixed multipliers.

    With the penalty off, trucks decouple once each product's tardiness
    is attributed to a single designated carrier (the smallest eligible
    truck id); the attributed tardiness never exceeds the joint
    tardiness, so the bound stays on the safe side.  Demand and capacity
    constants complete the dual value.
    """
    space = space or coupling_space(instance)
    lam = space.project(np.asarray(lam, dtype=np.float64))

    designated: dict[int, set[str]] = {}
    for demand in instance.demands:
        eligible = eligible_trucks(demand.product, instance)
        if eligible:
            owner = min(eligible)
            designated.setdefault(owner, set()).add(demand.product)

    total = 0.0
    for truck in instance.fleet:
        counted = frozenset(designated.get(truck.id, set()))
        pricing = affine_pricing(instance, space, truck, lam, counted)
        total += solve_priced(instance, truck, pricing).value

    constant = 0.0
    for demand in instance.demands:
        idx = space.demand_index(demand.destination, demand.product)
        constant -= float(lam[idx]) * demand.quantity
    for node, period in space.capacity_keys:
        idx = space.capacity_index(node, period)
        constant -= float(lam[idx]) * instance.network.charger_at(node).count
    return total + constant


# ---------------------------------------------------------------------------
# Baseline: classical LR with the subgradient-level stepsize rule
# ---------------------------------------------------------------------------


def run_baseline_lr(instance: Instance, config: SolverConfig = SolverConfig(strategy="lr")) -> RunResult:
    """Every iteration solves all subproblems exactly against the
    previous pool, then takes one multiplier step; the level is the best
    value seen plus an offset that halves when the multiplier path since
    the last reset exceeds its budget."""
    config = config.validated()
    space = coupling_space(instance)
    lam = _init_multipliers(space, config)
    pool = empty_solution(instance)
    fleet = list(instance.fleet)
    graphs = {t.id: build_truck_graph(instance, t) for t in fleet}

    rho = config.rho0
    best_cost: Optional[float] = None
    best_solution: Optional[Solution] = None
    best_iteration = 0
    record_value = -math.inf
    delta: Optional[float] = None
    path_length = 0.0
    trace: list[TraceRow] = []
    expansions_by_iter: list[int] = []
    counters = {"subproblem_calls": 0, "improved": 0, "exact_optimal": 0, "expansions_total": 0}
    started = time.monotonic()
    k = 0

    while k < config.iteration_limit and fleet:
        if config.time_limit_s is not None and time.monotonic() - started > config.time_limit_s:
            break
        k += 1
        expansions = 0
        # one full pass of independent cold exact solves against the
        # previous pool (order-independent, so the pass can fan out),
        # then a single multiplier update
        fresh = []
        for truck in fleet:
            ctx = fixed_context(instance, truck, pool)
            res = solve_exact(instance, truck, lam, rho, ctx, space, graphs[truck.id])
            counters["subproblem_calls"] += 1
            counters["exact_optimal"] += 1
            expansions += res.expansions
            fresh.append(res.schedule)
        pool = Solution(tuple(fresh))
        counters["expansions_total"] += expansions
        expansions_by_iter.append(expansions)

        h = coupling_violations(instance, pool, space)
        value = lagrangian_value(instance, pool, lam, rho, space)
        h_l1 = int(np.abs(h).sum())
        h_sq = int(h @ h)
        alpha = 0.0
        event = "none"

        if h_sq == 0:
            cost = objective(instance, pool).total
            if best_cost is None or cost < best_cost - 1e-12:
                best_cost, best_solution, best_iteration = cost, pool, k
            rho = rho / config.beta
            event = "feasible"
        else:
            if value > record_value:
                record_value = value
            if delta is None:
                delta = config.lr_delta0 if config.lr_delta0 is not None else 0.1 * max(1.0, abs(value))
            q_lev = record_value + delta
            alpha = config.zeta * (q_lev - value) / h_sq
            lam = update_multipliers(space, lam, alpha, h)
            path_length += alpha * math.sqrt(h_sq)
            if path_length > config.lr_path_budget:
                delta /= config.lr_reduction
                path_length = 0.0
                event = "level_update"

        trace.append(
            TraceRow(
                k=k,
                v=0,
                L_rho=value,
                H_l1=h_l1,
                H_l2sq=h_sq,
                alpha=alpha,
                q_max=record_value,
                q_bar=(record_value + delta) if delta is not None else math.inf,
                rho=rho,
                best_feasible=best_cost if best_cost is not None else math.inf,
                event=event,
            )
        )

        if best_cost is not None:
            if config.cost_target is not None and best_cost <= config.cost_target + 1e-9:
                break
            if best_cost <= 0.0:
                break
            if config.stall_limit is not None and k - best_iteration >= config.stall_limit:
                break

    counters["expansions_by_iter"] = expansions_by_iter
    status = "ok" if best_cost is not None else "no_feasible"
    return RunResult(
        status=status,
        best_cost=best_cost,
        best_solution=best_solution,
        multipliers=lam,
        space=space,
        trace=trace,
        counters=counters,
        iterations=k,
    )


def solve(instance: Instance, config: SolverConfig = SolverConfig()) -> RunResult:
    """Dispatch on the configured coordination strategy."""
    if config.strategy == "lr":
        return run_baseline_lr(instance, config)
    return run(instance, config)
