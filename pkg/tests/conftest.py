import pytest

from jrc.instance import (
    ChargerSite,
    Demand,
    Instance,
    Network,
    Node,
    RoadSegment,
    Truck,
)


def make_two_node_instance(
    travel=3,
    horizon=14,
    trips=2,
    export_qty=1,
    import_qty=1,
    charge_rate=1700,
    discharge_loaded=500,
    discharge_empty=250,
    labor=1.0,
    price=1.0,
    export_due=10,
    import_due=10,
    penalty=2.0,
    n_trucks=1,
    charger_counts=(2, 2),
):
    """Smallest meaningful corridor: one depot, one port, one road."""
    network = Network(
        nodes=(Node(1, "depot"), Node(2, "port")),
        segments=(RoadSegment(1, 2, travel), RoadSegment(2, 1, travel)),
        chargers=(
            ChargerSite(1, charger_counts[0], price),
            ChargerSite(2, charger_counts[1], price),
        ),
    )
    fleet = tuple(
        Truck(
            id=i + 1,
            home_depot=1,
            port=2,
            available=1,
            charge_rate=charge_rate,
            discharge_loaded=discharge_loaded,
            discharge_empty=discharge_empty,
        )
        for i in range(n_trucks)
    )
    demands = []
    if export_qty is not None:
        demands.append(Demand("exp", 1, 2, export_qty, export_due, penalty))
    if import_qty is not None:
        demands.append(Demand("imp", 2, 1, import_qty, import_due, penalty))
    return Instance(
        network=network,
        fleet=fleet,
        demands=tuple(demands),
        horizon=horizon,
        trips=trips,
        labor_cost=labor,
    )


@pytest.fixture
def two_node_instance():
    return make_two_node_instance()
