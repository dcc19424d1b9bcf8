"""Problem data model: network, fleet, demands, horizon sizing, validation.

All quantities live on exact integer lattices: times in whole periods
(1-based, ``1..P``), battery state in basis points of capacity
(``0..10000`` bp, 1 bp = 0.01%).  Instances are immutable after
construction; :func:`validate` never mutates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

SOC_CAP_BP = 10000

DEPOT = "depot"
PORT = "port"
PLAIN = "plain"
NODE_KINDS = (DEPOT, PORT, PLAIN)

ODD_OUTBOUND = "odd_outbound"
ODD_INBOUND = "odd_inbound"
TRIP_PARITIES = (ODD_OUTBOUND, ODD_INBOUND)

SCHEMA_ID = "jrc-instance/1"


@dataclass(frozen=True)
class Node:
    id: int
    kind: str


@dataclass(frozen=True)
class RoadSegment:
    """One directed segment; bidirectional roads appear twice.

    ``travel`` is either a single positive int (same duration in every
    period) or a tuple with one duration per departure period.
    """

    start: int
    end: int
    travel: Union[int, tuple[int, ...]]

    def travel_time(self, period: int) -> int:
        if isinstance(self.travel, tuple):
            idx = min(max(period, 1), len(self.travel)) - 1
            return self.travel[idx]
        return self.travel

    def max_travel_time(self) -> int:
        if isinstance(self.travel, tuple):
            return max(self.travel)
        return self.travel

    @property
    def key(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class ChargerSite:
    """Charging station at a node: charger count and per-period price."""

    node: int
    count: int
    price: Union[float, tuple[float, ...]] = 0.0

    def price_at(self, period: int) -> float:
        if isinstance(self.price, tuple):
            idx = min(max(period, 1), len(self.price)) - 1
            return self.price[idx]
        return self.price


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    segments: tuple[RoadSegment, ...]
    chargers: tuple[ChargerSite, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_node_by_id", {n.id: n for n in self.nodes})
        object.__setattr__(self, "_seg_by_key", {s.key: s for s in self.segments})
        object.__setattr__(self, "_charger_by_node", {c.node: c for c in self.chargers})

    def node(self, node_id: int) -> Node:
        return self._node_by_id[node_id]

    def has_node(self, node_id: int) -> bool:
        return node_id in self._node_by_id

    def segment(self, start: int, end: int) -> Optional[RoadSegment]:
        return self._seg_by_key.get((start, end))

    def segments_from(self, node_id: int) -> list[RoadSegment]:
        return [s for s in self.segments if s.start == node_id]

    def segments_into(self, node_id: int) -> list[RoadSegment]:
        return [s for s in self.segments if s.end == node_id]

    def charger_at(self, node_id: int) -> Optional[ChargerSite]:
        return self._charger_by_node.get(node_id)

    def charger_nodes(self) -> list[int]:
        return sorted(self._charger_by_node)

    def depots(self) -> list[int]:
        return sorted(n.id for n in self.nodes if n.kind == DEPOT)

    def ports(self) -> list[int]:
        return sorted(n.id for n in self.nodes if n.kind == PORT)


@dataclass(frozen=True)
class Truck:
    """One electric truck tied to a (home depot, designated port) corridor.

    Rates are integer basis points of battery capacity per period;
    discharge rates may be overridden per directed segment.
    """

    id: int
    home_depot: int
    port: int
    available: int
    charge_rate: int
    discharge_loaded: int
    discharge_empty: int
    discharge_overrides: Mapping[tuple[int, int], tuple[int, int]] = field(
        default_factory=dict
    )

    def discharge_rate(self, segment_key: tuple[int, int], loaded: bool) -> int:
        override = self.discharge_overrides.get(segment_key)
        if override is not None:
            return override[0] if loaded else override[1]
        return self.discharge_loaded if loaded else self.discharge_empty


@dataclass(frozen=True)
class Demand:
    """Cargo demand for one product on one corridor direction.

    ``origin``/``destination`` identify the direction: depot->port rows
    are export cargo due at the port, port->depot rows import cargo due
    at the depot.  ``due`` is a period index; ``penalty`` is charged per
    period of lateness of the latest unloading start.
    """

    product: str
    origin: int
    destination: int
    quantity: int
    due: int
    penalty: float


@dataclass(frozen=True)
class Instance:
    network: Network
    fleet: tuple[Truck, ...]
    demands: tuple[Demand, ...]
    horizon: int
    trips: int
    labor_cost: float
    trip_parity: str = ODD_OUTBOUND
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_truck_by_id", {t.id: t for t in self.fleet})
        object.__setattr__(
            self, "_demand_by_pair", {(d.origin, d.destination): d for d in self.demands}
        )
        object.__setattr__(self, "_demand_by_product", {d.product: d for d in self.demands})

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def trip_range(self) -> range:
        return range(1, self.trips + 1)

    def truck(self, truck_id: int) -> Truck:
        return self._truck_by_id[truck_id]

    def is_outbound(self, trip: int) -> bool:
        odd = trip % 2 == 1
        return odd if self.trip_parity == ODD_OUTBOUND else not odd

    def trip_origin(self, truck: Truck, trip: int) -> int:
        return truck.home_depot if self.is_outbound(trip) else truck.port

    def trip_destination(self, truck: Truck, trip: int) -> int:
        return truck.port if self.is_outbound(trip) else truck.home_depot

    def demand_for(self, origin: int, destination: int) -> Optional[Demand]:
        return self._demand_by_pair.get((origin, destination))

    def demand_by_product(self, product: str) -> Optional[Demand]:
        return self._demand_by_product.get(product)

    def corridor_demand(self, truck: Truck, outbound: bool) -> Optional[Demand]:
        """Demand row the truck serves when loaded in the given direction."""
        if outbound:
            return self.demand_for(truck.home_depot, truck.port)
        return self.demand_for(truck.port, truck.home_depot)

    def travel_time(self, start: int, end: int, period: int) -> int:
        seg = self.network.segment(start, end)
        if seg is None:
            raise KeyError(f"no road segment {start}->{end}")
        return seg.travel_time(period)


@dataclass
class ValidationReport:
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, path: str, message: str) -> None:
        self.failures.append((path, message))

    def summary(self) -> str:
        if self.ok:
            return "pass"
        return "\n".join(f"{path}: {message}" for path, message in self.failures)


def _is_positive_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def _travel_values(seg: RoadSegment) -> Iterable[int]:
    if isinstance(seg.travel, tuple):
        return seg.travel
    return (seg.travel,)


def _reachable(network: Network, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for seg in network.segments_from(node):
            if seg.end not in seen:
                seen.add(seg.end)
                stack.append(seg.end)
    return seen


def validate(instance: Instance) -> ValidationReport:
    """Check every structural invariant; report all violations at once.

    A passing instance is accepted by every downstream module without
    further checks.
    """
    report = ValidationReport()
    net = instance.network

    ids = [n.id for n in net.nodes]
    if len(set(ids)) != len(ids):
        report.add("network.nodes", "node ids must be unique")
    for i, node in enumerate(net.nodes):
        if node.kind not in NODE_KINDS:
            report.add(f"network.nodes[{i}]", f"unknown node kind {node.kind!r}")
    if not net.depots():
        report.add("network.nodes", "at least one depot required")
    if not net.ports():
        report.add("network.nodes", "at least one port required")

    seen_keys: set[tuple[int, int]] = set()
    for i, seg in enumerate(net.segments):
        path = f"network.segments[{i}]"
        if seg.start == seg.end:
            report.add(path, "segment endpoints must be distinct")
        for endpoint in (seg.start, seg.end):
            if not net.has_node(endpoint):
                report.add(path, f"unknown node {endpoint}")
        if seg.key in seen_keys:
            report.add(path, f"duplicate segment {seg.key}")
        seen_keys.add(seg.key)
        values = list(_travel_values(seg))
        if any(not _is_positive_int(v) for v in values):
            report.add(path, "travel times must be integers >= 1")
        if isinstance(seg.travel, tuple) and len(seg.travel) != instance.horizon:
            report.add(path, f"travel table must cover all {instance.horizon} periods")

    charger_nodes = set()
    for i, site in enumerate(net.chargers):
        path = f"network.chargers[{i}]"
        if not net.has_node(site.node):
            report.add(path, f"unknown node {site.node}")
        if site.node in charger_nodes:
            report.add(path, f"duplicate charger site at node {site.node}")
        charger_nodes.add(site.node)
        if not _is_positive_int(site.count):
            report.add(path, "charger count must be an integer >= 1")
        prices = site.price if isinstance(site.price, tuple) else (site.price,)
        if any(p < 0 for p in prices):
            report.add(path, "charging price must be >= 0")
        if isinstance(site.price, tuple) and len(site.price) != instance.horizon:
            report.add(path, f"price table must cover all {instance.horizon} periods")

    for node in net.nodes:
        if node.kind in (DEPOT, PORT) and node.id not in charger_nodes:
            report.add(f"network.nodes[{node.id}]", f"every {node.kind} must host a charger")

    truck_ids = [t.id for t in instance.fleet]
    if len(set(truck_ids)) != len(truck_ids):
        report.add("fleet", "truck ids must be unique")
    for i, truck in enumerate(instance.fleet):
        path = f"fleet[{i}]"
        if not net.has_node(truck.home_depot) or net.node(truck.home_depot).kind != DEPOT:
            report.add(f"{path}.home_depot", "home depot must be an existing depot node")
        if not net.has_node(truck.port) or net.node(truck.port).kind != PORT:
            report.add(f"{path}.port", "designated port must be an existing port node")
        for name in ("charge_rate", "discharge_loaded", "discharge_empty"):
            if not _is_positive_int(getattr(truck, name)):
                report.add(f"{path}.{name}", "rates must be positive integers (basis points)")
        for key, rates in truck.discharge_overrides.items():
            if net.segment(*key) is None:
                report.add(f"{path}.discharge_overrides", f"unknown segment {key}")
            if any(not _is_positive_int(r) for r in rates):
                report.add(f"{path}.discharge_overrides", "rates must be positive integers")
        if not isinstance(truck.available, int) or not 0 <= truck.available <= instance.horizon:
            report.add(f"{path}.available", "available time must lie within the horizon")

    pairs: set[tuple[int, int]] = set()
    products: set[str] = set()
    for i, demand in enumerate(instance.demands):
        path = f"demands[{i}]"
        if demand.product in products:
            report.add(f"{path}.product", f"duplicate product id {demand.product!r}")
        products.add(demand.product)
        if (demand.origin, demand.destination) in pairs:
            report.add(path, "one demand row per (origin, destination) pair")
        pairs.add((demand.origin, demand.destination))
        for endpoint, name in ((demand.origin, "origin"), (demand.destination, "destination")):
            if not net.has_node(endpoint):
                report.add(f"{path}.{name}", f"unknown node {endpoint}")
        if net.has_node(demand.destination) and net.node(demand.destination).kind not in (DEPOT, PORT):
            report.add(f"{path}.destination", "destination must be a depot or a port")
        if net.has_node(demand.origin) and net.has_node(demand.destination):
            kinds = (net.node(demand.origin).kind, net.node(demand.destination).kind)
            if kinds not in ((DEPOT, PORT), (PORT, DEPOT)):
                report.add(path, "demand must run depot->port or port->depot")
        if not isinstance(demand.quantity, int) or demand.quantity < 0:
            report.add(f"{path}.quantity", "quantity must be an integer >= 0")
        if not isinstance(demand.due, int) or demand.due < 0:
            report.add(f"{path}.due", "due time must be an integer period >= 0")
        if demand.penalty < 0:
            report.add(f"{path}.penalty", "tardiness penalty must be >= 0")

    if instance.trips < 0 or instance.trips % 2 != 0:
        report.add("trips", "trip count must be even and >= 0")
    if instance.trip_parity not in TRIP_PARITIES:
        report.add("trip_parity", f"must be one of {TRIP_PARITIES}")
    if instance.labor_cost < 0:
        report.add("labor_cost", "labor cost must be >= 0")

    if not report.ok:
        return report

    for truck in instance.fleet:
        reach = _reachable(net, truck.home_depot)
        if truck.port not in reach:
            report.add(f"fleet[{truck.id}]", f"no path from depot {truck.home_depot} to port {truck.port}")
        back = _reachable(net, truck.port)
        if truck.home_depot not in back:
            report.add(f"fleet[{truck.id}]", f"no path from port {truck.port} back to depot {truck.home_depot}")

    try:
        min_horizon = derive_horizon(net, instance.trips, 0)
    except ValueError as exc:
        report.add("network", str(exc))
    else:
        if instance.horizon < min_horizon:
            report.add("horizon", f"horizon {instance.horizon} below derived minimum {min_horizon}")

    round_trips = instance.trips // 2
    for i, demand in enumerate(instance.demands):
        eligible = eligible_trucks(demand.product, instance)
        if demand.quantity > len(eligible) * round_trips:
            report.add(
                f"demands[{i}].quantity",
                f"quantity {demand.quantity} exceeds capacity "
                f"{len(eligible)} trucks x {round_trips} round trips",
            )

    return report


def derive_trip_count(demands: Sequence, fleet_size: int) -> int:
    """Even trip count sized so the fleet can cover the largest demand.

    Two one-way trips per round trip; round trips needed are the largest
    single demand split across the whole fleet.
    """
    if fleet_size < 1:
        raise ValueError("fleet must contain at least one truck")
    quantities = [getattr(d, "quantity", d) for d in demands]
    max_demand = max(quantities, default=0)
    if max_demand <= 0:
        return 0
    return 2 * math.ceil(max_demand / fleet_size)


def _longest_simple_path(network: Network, start: int, goal: int) -> Optional[int]:
    """Worst-case duration of the longest loop-free start->goal path."""
    best: Optional[int] = None
    stack = [(start, {start}, 0)]
    while stack:
        node, visited, dur = stack.pop()
        if node == goal:
            if best is None or dur > best:
                best = dur
            continue
        for seg in network.segments_from(node):
            if seg.end not in visited:
                stack.append((seg.end, visited | {seg.end}, dur + seg.max_travel_time()))
    return best


def derive_horizon(network: Network, trips: int, cushion: int) -> int:
    """Periods needed for the longest loop-free depot<->port path per trip.

    The duration is maximised over every (depot, port) pair and both
    directions, then multiplied by the trip count, plus a slack cushion.
    """
    if trips < 0:
        raise ValueError("trip count must be >= 0")
    if trips == 0:
        return cushion
    longest = 0
    for depot in network.depots():
        for port in network.ports():
            out = _longest_simple_path(network, depot, port)
            back = _longest_simple_path(network, port, depot)
            if out is None or back is None:
                raise ValueError(f"depot {depot} and port {port} are not connected")
            longest = max(longest, out, back)
    return longest * trips + cushion


def eligible_trucks(product: str, instance: Instance) -> set[int]:
    """Trucks whose corridor matches the product's origin-destination pair."""
    demand = instance.demand_by_product(product)
    if demand is None:
        raise KeyError(f"unknown product {product!r}")
    if instance.network.node(demand.destination).kind == PORT:
        depot, port = demand.origin, demand.destination
    else:
        depot, port = demand.destination, demand.origin
    return {t.id for t in instance.fleet if t.home_depot == depot and t.port == port}


# ---------------------------------------------------------------------------
# JSON serialization (schema jrc-instance/1)
# ---------------------------------------------------------------------------


def _travel_to_json(value):
    return list(value) if isinstance(value, tuple) else value


def to_json_dict(instance: Instance) -> dict:
    net = instance.network
    return {
        "schema": SCHEMA_ID,
        "nodes": [{"id": n.id, "kind": n.kind} for n in net.nodes],
        "segments": [
            {"from": s.start, "to": s.end, "travel": _travel_to_json(s.travel)}
            for s in net.segments
        ],
        "chargers": [
            {"node": c.node, "count": c.count, "price": _travel_to_json(c.price)}
            for c in net.chargers
        ],
        "trucks": [
            {
                "id": t.id,
                "depot": t.home_depot,
                "port": t.port,
                "available": t.available,
                "chargeRate": t.charge_rate,
                "dischargeLoaded": t.discharge_loaded,
                "dischargeEmpty": t.discharge_empty,
                **(
                    {
                        "dischargeOverrides": [
                            {"from": k[0], "to": k[1], "loaded": v[0], "empty": v[1]}
                            for k, v in sorted(t.discharge_overrides.items())
                        ]
                    }
                    if t.discharge_overrides
                    else {}
                ),
            }
            for t in instance.fleet
        ],
        "demands": [
            {
                "product": d.product,
                "origin": d.origin,
                "destination": d.destination,
                "quantity": d.quantity,
                "due": d.due,
                "penalty": d.penalty,
            }
            for d in instance.demands
        ],
        "horizon": instance.horizon,
        "trips": instance.trips,
        "costs": {"labor": instance.labor_cost},
        "tripParity": instance.trip_parity,
        "meta": dict(instance.meta),
    }


def _travel_from_json(value):
    return tuple(value) if isinstance(value, list) else value


def from_json_dict(data: Mapping) -> Instance:
    if data.get("schema") != SCHEMA_ID:
        raise ValueError(f"unsupported schema {data.get('schema')!r}, expected {SCHEMA_ID!r}")
    network = Network(
        nodes=tuple(Node(n["id"], n["kind"]) for n in data["nodes"]),
        segments=tuple(
            RoadSegment(s["from"], s["to"], _travel_from_json(s["travel"]))
            for s in data["segments"]
        ),
        chargers=tuple(
            ChargerSite(c["node"], c["count"], _travel_from_json(c.get("price", 0.0)))
            for c in data["chargers"]
        ),
    )
    trucks = []
    for t in data["trucks"]:
        overrides = {
            (o["from"], o["to"]): (o["loaded"], o["empty"])
            for o in t.get("dischargeOverrides", [])
        }
        trucks.append(
            Truck(
                id=t["id"],
                home_depot=t["depot"],
                port=t["port"],
                available=t["available"],
                charge_rate=t["chargeRate"],
                discharge_loaded=t["dischargeLoaded"],
                discharge_empty=t["dischargeEmpty"],
                discharge_overrides=overrides,
            )
        )
    demands = tuple(
        Demand(d["product"], d["origin"], d["destination"], d["quantity"], d["due"], d["penalty"])
        for d in data["demands"]
    )
    return Instance(
        network=network,
        fleet=tuple(trucks),
        demands=demands,
        horizon=data["horizon"],
        trips=data["trips"],
        labor_cost=data["costs"]["labor"],
        trip_parity=data.get("tripParity", ODD_OUTBOUND),
        meta=dict(data.get("meta", {})),
    )


def canonical_json(instance: Instance) -> str:
    """Stable byte representation: sorted keys, 2-space indent."""
    return json.dumps(to_json_dict(instance), sort_keys=True, indent=2) + "\n"


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(instance))


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
