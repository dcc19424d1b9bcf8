import json

import pytest

from jrc.instance import (
    ChargerSite,
    Demand,
    Instance,
    Network,
    Node,
    RoadSegment,
    Truck,
    canonical_json,
    derive_horizon,
    derive_trip_count,
    eligible_trucks,
    from_json_dict,
    to_json_dict,
    validate,
)

from conftest import make_two_node_instance


def five_node_network():
    # spine 1-3-5 with detour nodes 2 and 4; longest loop-free path
    # 1-2-3-4-5 has duration 3+4+4+4 = 15
    segs = []
    for u, v, tt in [(1, 2, 3), (2, 3, 4), (3, 4, 4), (4, 5, 4), (1, 3, 4), (3, 5, 5)]:
        segs.append(RoadSegment(u, v, tt))
        segs.append(RoadSegment(v, u, tt))
    return Network(
        nodes=(Node(1, "depot"), Node(2, "plain"), Node(3, "plain"), Node(4, "plain"), Node(5, "port")),
        segments=tuple(segs),
        chargers=tuple(ChargerSite(n, c, 1.0) for n, c in zip(range(1, 6), (2, 2, 1, 2, 2))),
    )


def test_validate_well_formed_instance_passes(two_node_instance):
    report = validate(two_node_instance)
    assert report.ok, report.summary()


def test_validate_port_without_charger_fails():
    inst = make_two_node_instance()
    network = Network(
        nodes=inst.network.nodes,
        segments=inst.network.segments,
        chargers=(ChargerSite(1, 2, 1.0),),  # port 2 lost its charger
    )
    bad = Instance(
        network=network,
        fleet=inst.fleet,
        demands=inst.demands,
        horizon=inst.horizon,
        trips=inst.trips,
        labor_cost=inst.labor_cost,
    )
    report = validate(bad)
    assert not report.ok
    assert any("port must host a charger" in msg for _, msg in report.failures)


def test_validate_zero_discharge_rate_fails():
    inst = make_two_node_instance(discharge_loaded=0)
    report = validate(inst)
    assert not report.ok
    assert any("positive integers" in msg for _, msg in report.failures)


def test_validate_reports_all_failures_with_paths():
    inst = make_two_node_instance(discharge_loaded=0, trips=3)
    report = validate(inst)
    paths = [p for p, _ in report.failures]
    assert "fleet[0].discharge_loaded" in paths
    assert "trips" in paths


def test_derive_trip_count_examples():
    assert derive_trip_count([18], 10) == 4
    assert derive_trip_count([0], 5) == 0
    assert derive_trip_count([7], 3) == 6


def test_derive_trip_count_accepts_demand_objects():
    demands = [Demand("a", 1, 2, 18, 10, 1.0), Demand("b", 2, 1, 12, 10, 1.0)]
    assert derive_trip_count(demands, 10) == 4


def test_derive_trip_count_zero_fleet_errors():
    with pytest.raises(ValueError):
        derive_trip_count([5], 0)


def test_derive_trip_count_monotone_and_even():
    prev = 0
    for demand in range(0, 40):
        t = derive_trip_count([demand], 7)
        assert t % 2 == 0
        assert t >= prev
        prev = t
    for fleet in range(1, 12):
        t = derive_trip_count([30], fleet)
        assert t >= derive_trip_count([30], fleet + 1)


def test_derive_horizon_five_node_example():
    assert derive_horizon(five_node_network(), 4, 5) == 65


def test_derive_horizon_zero_trips_is_cushion():
    assert derive_horizon(five_node_network(), 0, 7) == 7


def test_derive_horizon_three_node_line():
    # d-m-q line, both hops of duration 2: the only simple path each way
    # lasts 4 periods, so 2 trips plus cushion 1 gives 9
    net = Network(
        nodes=(Node(1, "depot"), Node(2, "plain"), Node(3, "port")),
        segments=(
            RoadSegment(1, 2, 2),
            RoadSegment(2, 1, 2),
            RoadSegment(2, 3, 2),
            RoadSegment(3, 2, 2),
        ),
        chargers=(ChargerSite(1, 1, 0.0), ChargerSite(3, 1, 0.0)),
    )
    assert derive_horizon(net, 2, 1) == 9


def test_derive_horizon_disconnected_pair_errors():
    net = Network(
        nodes=(Node(1, "depot"), Node(2, "port")),
        segments=(RoadSegment(1, 2, 2),),  # no way back
        chargers=(ChargerSite(1, 1, 0.0), ChargerSite(2, 1, 0.0)),
    )
    with pytest.raises(ValueError):
        derive_horizon(net, 2, 0)


def test_derive_horizon_monotone_in_trips_and_travel_times():
    base = five_node_network()
    values = [derive_horizon(base, t, 5) for t in range(0, 8, 2)]
    assert values == sorted(values)
    slower = Network(
        nodes=base.nodes,
        segments=tuple(RoadSegment(s.start, s.end, s.travel + 1) for s in base.segments),
        chargers=base.chargers,
    )
    assert derive_horizon(slower, 4, 5) > derive_horizon(base, 4, 5)


def test_eligible_trucks_matches_corridor():
    net = Network(
        nodes=(Node(1, "depot"), Node(2, "depot"), Node(3, "port")),
        segments=(
            RoadSegment(1, 3, 2),
            RoadSegment(3, 1, 2),
            RoadSegment(2, 3, 2),
            RoadSegment(3, 2, 2),
        ),
        chargers=(ChargerSite(1, 1, 0.0), ChargerSite(2, 1, 0.0), ChargerSite(3, 1, 0.0)),
    )
    trucks = (
        Truck(1, 1, 3, 1, 1700, 500, 250),
        Truck(2, 1, 3, 1, 1700, 500, 250),
        Truck(3, 2, 3, 1, 1700, 500, 250),
    )
    inst = Instance(
        network=net,
        fleet=trucks,
        demands=(Demand("exp-d1", 1, 3, 2, 10, 1.0),),
        horizon=20,
        trips=2,
        labor_cost=1.0,
    )
    assert eligible_trucks("exp-d1", inst) == {1, 2}


def test_eligible_trucks_no_match_and_unknown_product(two_node_instance):
    assert eligible_trucks("exp", two_node_instance) == {1}
    with pytest.raises(KeyError):
        eligible_trucks("nope", two_node_instance)


def test_eligible_trucks_single_corridor_gets_all():
    inst = make_two_node_instance(n_trucks=3, export_qty=2, import_qty=2)
    assert eligible_trucks("exp", inst) == {1, 2, 3}
    assert eligible_trucks("imp", inst) == {1, 2, 3}


def test_json_round_trip_preserves_canonical_bytes(two_node_instance):
    blob = canonical_json(two_node_instance)
    again = from_json_dict(json.loads(blob))
    assert canonical_json(again) == blob
    assert validate(again).ok
    assert to_json_dict(again) == to_json_dict(two_node_instance)


def test_json_rejects_unknown_schema(two_node_instance):
    data = to_json_dict(two_node_instance)
    data["schema"] = "jrc-instance/999"
    with pytest.raises(ValueError):
        from_json_dict(data)


def test_validate_is_idempotent(two_node_instance):
    first = validate(two_node_instance)
    second = validate(two_node_instance)
    assert first.ok and second.ok
    assert first.failures == second.failures


def test_validate_demand_capacity_pigeonhole():
    inst = make_two_node_instance(import_qty=3, trips=2, n_trucks=1)
    report = validate(inst)
    assert not report.ok
    assert any("exceeds capacity" in msg for _, msg in report.failures)


def test_horizon_below_derived_minimum_fails():
    inst = make_two_node_instance(horizon=5, trips=2, travel=3)
    report = validate(inst)
    assert not report.ok
    assert any("below derived minimum" in msg for _, msg in report.failures)


def test_trip_direction_and_parity():
    inst = make_two_node_instance()
    truck = inst.fleet[0]
    assert inst.is_outbound(1) and not inst.is_outbound(2)
    assert inst.trip_origin(truck, 1) == 1 and inst.trip_destination(truck, 1) == 2
    assert inst.trip_origin(truck, 2) == 2 and inst.trip_destination(truck, 2) == 1
