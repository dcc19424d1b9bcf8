import math

import numpy as np
import pytest

from jrc.coordinator import (
    LevelState,
    SolverConfig,
    bootstrap_level,
    dual_lower_bound,
    level_candidate,
    maybe_update_level,
    run,
    run_baseline_lr,
    solve,
    step_size,
    trace_csv_bytes,
    update_multipliers,
)
from jrc.model import CouplingSpace, coupling_space, lagrangian_value
from jrc.schedule import Solution, empty_solution
from jrc.subproblem import fixed_context, solve_exact
from jrc.verify import brute_force_optimum, verify

from conftest import make_two_node_instance
from test_model import round_trip_schedule


def test_step_size_examples_bit_exact():
    assert step_size(0.5, 5, 30.0, 20.0, 4) == 0.25
    assert step_size(0.5, 5, 20.0, 20.0, 4) == 0.0
    # zeta * (1/V) * (10-4)/9 with V=2
    assert step_size(0.5, 2, 10.0, 4.0, 9) == 0.5 * 6.0 / 2 / 9


def test_step_size_error_paths():
    with pytest.raises(ValueError):
        step_size(0.5, 2, 10.0, 4.0, 0)  # feasibility path, no step
    with pytest.raises(ValueError):
        step_size(0.5, 2, 4.0, 10.0, 4)  # level below the dual value


def synthetic_space():
    return CouplingSpace(
        port_keys=((2, "exp"),), depot_keys=((1, "imp"),), capacity_keys=((1, 1),)
    )


def test_update_multipliers_with_projection():
    space = synthetic_space()
    lam = np.array([0.0, 0.0, 1.0])
    out = update_multipliers(space, lam, 0.25, np.array([2, -1, -8]))
    assert out.tolist() == [0.5, -0.25, 0.0]
    assert update_multipliers(space, lam, 0.0, np.array([2, -1, -8])).tolist() == lam.tolist()
    assert update_multipliers(space, lam, 0.25, np.zeros(3)).tolist() == lam.tolist()


def test_level_candidate_examples():
    assert level_candidate(0.25, 5, 4, 20.0) == 25.0
    assert level_candidate(0.7, 5, 0, 13.0) == 13.0
    state = LevelState()
    state.record_candidate(25.0)
    state.record_candidate(23.0)
    assert state.q_max == 25.0


def test_maybe_update_level_on_divergent_window():
    state = LevelState(q_bar=100.0, q_max=25.0)
    for point in (0.0, 2.0, -1.0):
        state.push_iterate(np.array([point]), cap=30)
    assert maybe_update_level(state, np.array([-1.0]))
    assert state.q_bar == 25.0
    assert state.q_max == -math.inf
    assert len(state.window) == 1 and state.updates == 1


def test_maybe_update_level_keeps_convergent_window():
    state = LevelState(q_bar=100.0, q_max=25.0)
    for point in (0.0, 1.0):
        state.push_iterate(np.array([point]), cap=30)
    assert not maybe_update_level(state, np.array([1.0]))
    assert state.q_bar == 100.0


def test_maybe_update_level_empty_window_noop():
    state = LevelState(q_bar=5.0)
    assert not maybe_update_level(state, np.array([0.0]))


def test_bootstrap_level_above_value():
    assert bootstrap_level(26.0) == pytest.approx(28.6)
    for value in (-13.0, -0.2, 0.0, 0.4, 7.0):
        assert bootstrap_level(value) > value


def test_run_zero_demand_terminates_immediately():
    inst = make_two_node_instance(export_qty=None, import_qty=None)
    result = run(inst, SolverConfig(iteration_limit=100))
    assert result.status == "ok"
    assert result.best_cost == 0.0
    assert result.iterations == 1
    assert verify(inst, result.best_solution).feasible


def test_run_single_truck_matches_oracle():
    inst = make_two_node_instance()
    oracle = brute_force_optimum(inst)
    result = run(inst, SolverConfig(iteration_limit=60, stall_limit=30))
    assert result.status == "ok"
    assert result.best_cost == pytest.approx(oracle.cost, abs=1e-9)
    assert verify(inst, result.best_solution).feasible


def test_run_two_trucks_matches_oracle():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    oracle = brute_force_optimum(inst)
    result = run(inst, SolverConfig(iteration_limit=120, stall_limit=60))
    assert result.status == "ok"
    assert result.best_cost == pytest.approx(oracle.cost, abs=1e-9)
    assert verify(inst, result.best_solution).feasible


def test_trace_invariants():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    result = run(inst, SolverConfig(iteration_limit=80))
    assert result.trace
    best_column = [row.best_feasible for row in result.trace]
    assert best_column == sorted(best_column, reverse=True)
    # rho decays exactly on feasible events
    rho_prev = SolverConfig().rho0
    for row in result.trace:
        if row.event == "feasible":
            assert row.rho < rho_prev
        else:
            assert row.rho == rho_prev
        rho_prev = row.rho
    # capacity multipliers stay in the nonnegative orthant
    assert (result.multipliers[result.space.capacity_slice] >= 0.0).all()


def test_level_value_equals_candidate_max_from_trace():
    inst = make_two_node_instance(
        n_trucks=2, export_qty=2, import_qty=2, horizon=16, import_due=6, export_due=4
    )
    result = run(inst, SolverConfig(iteration_limit=200))
    fleet = len(inst.fleet)
    window_candidates: list[float] = []
    for row in result.trace:
        window_candidates.append(level_candidate(row.alpha, fleet, row.H_l2sq, row.L_rho))
        if row.event == "level_update" and row.detail == "divergence":
            assert row.q_bar == pytest.approx(max(window_candidates))
            window_candidates = []
        elif row.event == "level_update":  # refresh rows restart the window
            window_candidates = []


def test_run_is_deterministic_byte_for_byte():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    cfg = SolverConfig(iteration_limit=60, multiplier_init="uniform", seed=9)
    a = run(inst, cfg)
    b = run(inst, cfg)
    assert trace_csv_bytes(a.trace) == trace_csv_bytes(b.trace)
    assert a.best_cost == b.best_cost


def test_weak_duality_on_final_multipliers():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    result = run(inst, SolverConfig(iteration_limit=80))
    bound = dual_lower_bound(inst, result.multipliers, result.space)
    assert bound <= result.best_cost + 1e-9


def test_dual_bound_trivial_cases():
    inst = make_two_node_instance(export_qty=None, import_qty=None)
    space = coupling_space(inst)
    assert dual_lower_bound(inst, space.zeros(), space) == 0.0
    with_demand = make_two_node_instance()
    space2 = coupling_space(with_demand)
    assert dual_lower_bound(with_demand, space2.zeros(), space2) <= 0.0


def test_subproblem_value_consistent_with_pool_lagrangian():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    space = coupling_space(inst)
    rng = np.random.default_rng(17)
    lam = space.project(rng.normal(0, 3, space.size))
    pool = Solution((round_trip_schedule(1), empty_solution(inst).schedule_for(2)))
    truck = inst.fleet[1]
    ctx = fixed_context(inst, truck, pool)
    res = solve_exact(inst, truck, lam, 2.0, ctx, space)
    new_pool = pool.replace(res.schedule)
    sched1 = pool.schedule_for(1)
    others_own = inst.labor_cost * (sched1.last_arrival - sched1.first_departure)
    assert lagrangian_value(inst, new_pool, lam, 2.0, space) == pytest.approx(
        res.value + others_own, abs=1e-9
    )


def test_baseline_lr_reaches_oracle_on_tiny():
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, horizon=16)
    oracle = brute_force_optimum(inst)
    result = run_baseline_lr(inst, SolverConfig(iteration_limit=60, strategy="lr"))
    assert result.status == "ok"
    assert result.best_cost == pytest.approx(oracle.cost, abs=1e-9)
    # one exact solve per truck per iteration
    assert result.counters["subproblem_calls"] == len(inst.fleet) * result.iterations


def test_baseline_single_iteration_cap():
    inst = make_two_node_instance()
    result = run_baseline_lr(inst, SolverConfig(iteration_limit=1, strategy="lr"))
    assert result.iterations == 1
    assert len(result.trace) == 1


def test_solve_dispatches_on_strategy():
    inst = make_two_node_instance()
    a = solve(inst, SolverConfig(iteration_limit=10))
    b = solve(inst, SolverConfig(iteration_limit=10, strategy="lr"))
    assert a.trace[0].v == 1  # per-truck cursor
    assert b.trace[0].v == 0  # whole-fleet pass


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(zeta=1.5).validated()
    with pytest.raises(ValueError):
        SolverConfig(beta=1.0).validated()
    with pytest.raises(ValueError):
        SolverConfig(rho0=0.0).validated()
    with pytest.raises(ValueError):
        SolverConfig(strategy="magic").validated()
