import numpy as np
import pytest

from jrc.instance import validate
from jrc.model import (
    assignment_from_solution,
    build_model,
    coupling_space,
    coupling_violations,
    lagrangian_value,
    objective,
)
from jrc.schedule import Leg, Solution, TripPlan, TruckSchedule, empty_solution

from conftest import make_two_node_instance


def round_trip_schedule(truck_id=1, depart=1, travel=3, charges2=(), charges1=(), dwell=0):
    """Loaded out-and-back on the two-node corridor."""
    arrive1 = depart + travel - 1
    depart2 = arrive1 + 1 + dwell + len(charges2)
    arrive2 = depart2 + travel - 1
    return TruckSchedule(
        truck_id,
        (
            TripPlan(1, True, (Leg(1, 2, depart, arrive1),), tuple((2, p) for p in charges2)),
            TripPlan(2, True, (Leg(2, 1, depart2, arrive2),), tuple((1, p) for p in charges1)),
        ),
    )


def test_toy_constraint_counts_match_hand_enumeration():
    # 1 truck, 2 nodes (both charger-equipped), 2 trips, horizon 14,
    # 2 directed segments of duration 3
    inst = make_two_node_instance()
    model = build_model(inst)
    counts = model.tag_counts()
    V, N, NC, P, T = 1, 2, 2, 14, 2
    arcs = 12  # departures p with p+3-1 <= 14, per directed segment

    assert counts["init-soc"] == V
    assert counts["eq2"] == V
    for fam in ("depart", "arrive", "chargebegin", "chargecomplete"):
        assert counts[f"eq3-{fam}"] == V * P * T
        assert counts[f"eq4-{fam}"] == V * N * T  # N == NC here
        assert counts[f"eq5-{fam}"] == V * N * T
    assert counts["eq6"] == 2 * V * N * P * T
    assert counts["eq7"] == 2 * V * N * P * T
    assert "eq8" not in counts  # every node is the truck's depot or port
    # both arc endpoints host chargers, so all battery rows carry the
    # charging term: 2 segments x 12 departures x 2 trips x le/ge pair
    assert counts["eq11"] == 2 * 2 * arcs * T
    assert counts["eq11-empty"] == 2 * 2 * arcs * T
    assert "eq9" not in counts and "eq10" not in counts
    assert counts["soc-spill"] == V * NC * T
    assert counts["soc-full"] == V * NC * T
    assert counts["eq12"] == V * NC * P * T
    assert counts["eq13"] == V * NC * P * T
    assert counts["eq14"] == V * NC * (P - 1) * T
    assert counts["eq15"] == V * NC * (P - 1) * T + V * NC * T  # horizon boundary
    assert counts["eq16"] == 2 * V * T  # le/ge pair per trip with a product
    assert counts["eq17"] == V * (T - 1)
    assert counts["eq18"] == V * (T - 1) * P
    assert counts["eq19"] == V * 1  # one outbound trip before the last
    assert counts["eq20"] == V * 1 * P
    assert "eq21" not in counts  # the only transition happens at the port
    assert counts["eq22"] == 2 * V * 1
    assert counts["eq23"] == V * T
    assert counts["eq24"] == V * (T - 1)
    assert counts["eq28"] == V * T
    assert counts["eq29"] == 2
    assert counts["eq31"] == V * T


def test_eq2_behavior_under_trip_flag():
    # taking trip 1 forces the departure time above availability; leaving
    # the trip untaken leaves the departure unconstrained
    inst = make_two_node_instance()
    model = build_model(inst)
    cat = model.catalog
    rows = [i for i, t in enumerate(model.tags) if t == "eq2"]
    assert len(rows) == 1
    x = cat.zeros()
    x[cat.idx("xtrip", 1, 1)] = 1
    x[cat.idx("d", 1, 1, 1)] = 0  # below available=1
    lhs = model.lhs_values(x)
    assert lhs[rows[0]] < model.rhs[rows[0]]
    x[cat.idx("xtrip", 1, 1)] = 0
    lhs = model.lhs_values(x)
    assert lhs[rows[0]] >= model.rhs[rows[0]]


def test_eq6_is_a_le_ge_pair_per_context():
    inst = make_two_node_instance()
    model = build_model(inst)
    pairs = [
        (model.senses[i], model.tags[i]) for i in range(model.num_rows) if model.tags[i] == "eq6"
    ]
    le = sum(1 for s, _ in pairs if s == "<=")
    ge = sum(1 for s, _ in pairs if s == ">=")
    assert le == ge == len(pairs) // 2


def test_round_trip_assignment_is_feasible():
    inst = make_two_node_instance()
    model = build_model(inst)
    sol = Solution((round_trip_schedule(),))
    x = assignment_from_solution(inst, model.catalog, sol)
    ok, violations = model.evaluate(x)
    assert ok, violations[:10]


def test_charging_with_clipping_is_feasible_and_costed():
    # arrive at the port with 8500 bp, charge twice at 1700 bp: the
    # second period clips at the cap and spills 1900 bp
    inst = make_two_node_instance()
    model = build_model(inst)
    sched = round_trip_schedule(charges2=(4, 5))
    sol = Solution((sched,))
    x = assignment_from_solution(inst, model.catalog, sol)
    cat = model.catalog
    assert x[cat.idx("s", 1, 2, 1)] == 10000
    assert x[cat.idx("ofl", 1, 2, 1)] == 1900
    assert x[cat.idx("xfull", 1, 2, 1)] == 1
    ok, violations = model.evaluate(x)
    assert ok, violations[:10]
    cost = objective(inst, sol)
    assert cost.labor == 7.0  # span 8 - 1
    assert cost.charging == 2.0
    assert cost.tardiness == 0.0


def test_overfull_soc_assignment_is_rejected():
    inst = make_two_node_instance()
    model = build_model(inst)
    sched = round_trip_schedule(charges2=(4, 5))
    x = assignment_from_solution(inst, model.catalog, Solution((sched,)))
    cat = model.catalog
    # claim the unclipped battery level: bounds + rows must refuse
    x[cat.idx("ofl", 1, 2, 1)] = 0
    ok, _ = model.evaluate(x)
    assert not ok


def test_objective_arithmetic_example():
    # span 10 at labor 1, three charging periods at price 2, import two
    # periods late at penalty 5: 10 + 6 + 10 = 26
    inst = make_two_node_instance(
        travel=5, horizon=22, price=2.0, import_due=9, export_due=9, penalty=5.0
    )
    assert validate(inst).ok
    sched = TruckSchedule(
        1,
        (
            TripPlan(1, True, (Leg(1, 2, 1, 5),), ()),
            TripPlan(2, True, (Leg(2, 1, 7, 11),), ((1, 12), (1, 13), (1, 14))),
        ),
    )
    sol = Solution((sched,))
    cost = objective(inst, sol)
    assert (cost.labor, cost.charging, cost.tardiness, cost.total) == (10.0, 6.0, 10.0, 26.0)
    model = build_model(inst)
    ok, violations = model.evaluate(assignment_from_solution(inst, model.catalog, sol))
    assert ok, violations[:10]


def test_objective_all_idle_zero_demand_is_zero():
    inst = make_two_node_instance(export_qty=None, import_qty=None)
    sol = empty_solution(inst)
    assert objective(inst, sol).total == 0.0
    space = coupling_space(inst)
    assert not coupling_violations(inst, sol, space).any()


def test_coupling_violation_components():
    # two trucks charging the same period at a capacity-1 site
    inst = make_two_node_instance(n_trucks=2, export_qty=2, import_qty=2, charger_counts=(2, 1))
    space = coupling_space(inst)
    s1 = round_trip_schedule(1, charges2=(4,))
    s2 = round_trip_schedule(2, charges2=(4,))
    sol = Solution((s1, s2))
    h = coupling_violations(inst, sol, space)
    assert h[space.capacity_index(2, 4)] == 1
    assert h[space.demand_index(2, "exp")] == 0
    assert h[space.demand_index(1, "imp")] == 0


def test_coupling_demand_shortfall_is_negative():
    inst = make_two_node_instance(export_qty=2, import_qty=2, n_trucks=2)
    space = coupling_space(inst)
    sol = Solution((round_trip_schedule(1), TruckSchedule(2)))
    h = coupling_violations(inst, sol, space)
    assert h[space.demand_index(2, "exp")] == -1
    assert h[space.demand_index(1, "imp")] == -1


def test_lagrangian_value_matches_hand_computation():
    inst = make_two_node_instance(export_qty=2, import_qty=2, n_trucks=2)
    space = coupling_space(inst)
    sol = Solution((round_trip_schedule(1), TruckSchedule(2)))
    base = objective(inst, sol).total  # labor 5, truck 2 idle
    assert base == 5.0
    lam = space.zeros()
    lam[space.demand_index(2, "exp")] = 0.5
    lam[space.demand_index(1, "imp")] = -0.25
    # H = (-1, -1) on the demand blocks; |H|_1 = 2
    value = lagrangian_value(inst, sol, lam, rho=1.0, space=space)
    assert value == pytest.approx(base + 0.5 * -1 + -0.25 * -1 + 1.0 * 2)


def test_lagrangian_zero_violations_equals_objective():
    inst = make_two_node_instance()
    sol = Solution((round_trip_schedule(),))
    space = coupling_space(inst)
    lam = space.zeros() + 3.7
    assert lagrangian_value(inst, sol, lam, rho=9.9, space=space) == objective(inst, sol).total


def test_lagrangian_dimension_mismatch_errors():
    inst = make_two_node_instance()
    sol = empty_solution(inst)
    with pytest.raises(ValueError):
        lagrangian_value(inst, sol, np.zeros(3), rho=0.0)


def test_multiplier_projection_only_touches_capacity_block():
    inst = make_two_node_instance()
    space = coupling_space(inst)
    lam = space.zeros() - 2.0
    out = space.project(lam)
    assert (out[: space.demand_size] == -2.0).all()
    assert (out[space.capacity_slice] == 0.0).all()


def test_mps_export_writes_named_rows(tmp_path):
    from jrc.model import write_mps

    inst = make_two_node_instance(horizon=8)
    model = build_model(inst)
    path = tmp_path / "toy.mps"
    write_mps(model, path)
    text = path.read_text()
    assert text.startswith("NAME")
    assert "ENDATA" in text
    assert "DEM_exp" in text and "CAP_2_4" in text
