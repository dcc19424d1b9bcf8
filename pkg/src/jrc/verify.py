"""Independent verifier and brute-force oracle.

Everything here re-derives feasibility and cost from first principles,
on purpose: the constraint interpreter checks the *logical* form of each
trip-wise family (the canonical model checks the big-M expansion), the
enumerator walks the schedule space by plain depth-first search (the
production solver uses label-setting with dominance), and the oracle
optimizes the cross product by branch and bound with admissible bounds
only.  A bug in either route is caught by disagreement with the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .instance import SOC_CAP_BP, Instance, Truck
from .model import VariableCatalog, assignment_from_solution
from .schedule import Leg, Solution, TripPlan, TruckSchedule


@dataclass
class VerificationReport:
    feasible: bool
    residuals: dict[str, list]          # constraint tag -> violation notes
    coupling: dict[tuple, int]          # (family, *key) -> residual
    cost: Optional[object] = None       # recomputed CostBreakdown
    counts: dict[str, int] = field(default_factory=dict)

    def violated_tags(self) -> set[str]:
        return set(self.residuals)


class _Collector:
    def __init__(self, limit: int = 200):
        self.residuals: dict[str, list] = {}
        self.counts: dict[str, int] = {}
        self.limit = limit

    def hit(self, tag: str, note) -> None:
        self.counts[tag] = self.counts.get(tag, 0) + 1
        bucket = self.residuals.setdefault(tag, [])
        if len(bucket) < self.limit:
            bucket.append(note)

    @property
    def clean(self) -> bool:
        return not self.counts


def interpret_assignment(
    instance: Instance, catalog: VariableCatalog, x: np.ndarray
) -> VerificationReport:
    """Check every trip-wise constraint in its logical form, plus the
    coupling families, directly against a complete assignment."""
    if x.shape != (catalog.size,):
        raise ValueError("assignment length does not match the catalog")
    if not np.issubdtype(x.dtype, np.integer):
        raise ValueError("assignments are integer vectors")

    out = _Collector()
    net = instance.network
    nodes = sorted(n.id for n in net.nodes)
    chargers = net.charger_nodes()
    charger_set = set(chargers)
    P, T = instance.horizon, instance.trips
    cap = SOC_CAP_BP

    def g(*key) -> int:
        return int(x[catalog.idx(*key)])

    for name, value in catalog.check_bounds(x):
        out.hit("bounds", (name, value))

    for truck in instance.fleet:
        v = truck.id
        if T == 0:
            break
        trips = range(1, T + 1)

        if g("s", v, truck.home_depot, 1) != cap:
            out.hit("init-soc", (v,))
        if g("xtrip", v, 1) == 1 and g("d", v, truck.home_depot, 1) < truck.available:
            out.hit("eq2", (v,))

        for fam, nodeset in (("xd", nodes), ("xa", nodes), ("xcb", chargers), ("xcc", chargers)):
            suf = {"xd": "depart", "xa": "arrive", "xcb": "chargebegin", "xcc": "chargecomplete"}[fam]
            for t in trips:
                for p in range(1, P + 1):
                    if sum(g(fam, v, n, p, t) for n in nodeset) > 1:
                        out.hit(f"eq3-{suf}", (v, p, t))
                for n in nodeset:
                    if sum(g(fam, v, n, p, t) for p in range(1, P + 1)) > 1:
                        out.hit(f"eq4-{suf}", (v, n, t))

        for fam, timevar, nodeset in (
            ("xd", "d", nodes),
            ("xa", "a", nodes),
            ("xcb", "b", chargers),
            ("xcc", "c", chargers),
        ):
            suf = {"xd": "depart", "xa": "arrive", "xcb": "chargebegin", "xcc": "chargecomplete"}[fam]
            for n in nodeset:
                for t in trips:
                    linked = sum(p * g(fam, v, n, p, t) for p in range(1, P + 1))
                    if linked != g(timevar, v, n, t):
                        out.hit(f"eq5-{suf}", (v, n, t))

        for n in nodes:
            for t in trips:
                for p in range(1, P + 1):
                    if g("xd", v, n, p, t) == 1:
                        arrivals = 0
                        for seg in net.segments_from(n):
                            arr = p + seg.travel_time(p) - 1
                            if arr <= P:
                                arrivals += g("xa", v, seg.end, arr, t)
                        if arrivals != 1:
                            out.hit("eq6", (v, n, p, t))
                    if g("xa", v, n, p, t) == 1:
                        departures = 0
                        for seg in net.segments_into(n):
                            for pp in range(1, p + 1):
                                if pp + seg.travel_time(pp) - 1 == p:
                                    departures += g("xd", v, seg.start, pp, t)
                        if departures != 1:
                            out.hit("eq7", (v, n, p, t))
                        if n not in (truck.home_depot, truck.port):
                            later = sum(g("xd", v, n, pp, t) for pp in range(p + 1, P + 1))
                            if later != 1:
                                out.hit("eq8", (v, n, p, t))

        for seg in net.segments:
            n, e = seg.start, seg.end
            for p in range(1, P + 1):
                arr = p + seg.travel_time(p) - 1
                if arr > P:
                    continue
                for t in trips:
                    if g("xd", v, n, p, t) != 1 or g("xa", v, e, arr, t) != 1:
                        continue
                    loaded = g("xld", v, t) == 1
                    drop = truck.discharge_rate(seg.key, loaded) * seg.travel_time(p)
                    expected = g("s", v, n, t) - drop
                    if e in charger_set:
                        expected += truck.charge_rate * sum(
                            g("xc", v, e, pp, t) for pp in range(1, P + 1)
                        )
                        expected -= g("ofl", v, e, t)
                        tag = "eq11" if loaded else "eq11-empty"
                    else:
                        tag = "eq9" if loaded else "eq10"
                    if g("s", v, e, t) != expected:
                        out.hit(tag, (v, seg.key, p, t))

        for n in chargers:
            for t in trips:
                if g("xfull", v, n, t) == 0 and g("ofl", v, n, t) != 0:
                    out.hit("soc-spill", (v, n, t))
                if g("xfull", v, n, t) == 1 and g("s", v, n, t) < cap:
                    out.hit("soc-full", (v, n, t))
                for p in range(1, P + 1):
                    if g("xc", v, n, p, t) == 1:
                        if sum(g("xa", v, n, pp, t) for pp in range(1, p)) < 1:
                            out.hit("eq12", (v, n, p, t))
                        if sum(g("xd", v, n, pp, t) for pp in range(1, p + 1)) > 0:
                            out.hit("eq13", (v, n, p, t))
                for p in range(2, P + 1):
                    if g("xcb", v, n, p, t) < g("xc", v, n, p, t) - g("xc", v, n, p - 1, t):
                        out.hit("eq14", (v, n, p, t))
                    if g("xcc", v, n, p - 1, t) < g("xc", v, n, p - 1, t) - g("xc", v, n, p, t):
                        out.hit("eq15", (v, n, p, t))
                if g("xcc", v, n, P, t) < g("xc", v, n, P, t):
                    out.hit("eq15", (v, n, P + 1, t))

        for t in trips:
            demand = instance.corridor_demand(truck, instance.is_outbound(t))
            if demand is not None and g("xld", v, t) == 1:
                dest = instance.trip_destination(truck, t)
                if g("u", v, t) != g("a", v, dest, t):
                    out.hit("eq16", (v, t))

        for t in range(1, T):
            n_star = instance.trip_destination(truck, t)
            if g("xtrip", v, t + 1) == 1:
                if g("d", v, n_star, t + 1) < g("a", v, n_star, t) + 1:
                    out.hit("eq17", (v, t))
                for p in range(1, P + 1):
                    if g("xc", v, n_star, p, t) == 1 and g("d", v, n_star, t + 1) < p + 1:
                        out.hit("eq18", (v, t, p))

        for t in trips:
            if not instance.is_outbound(t):
                continue
            if t + 1 > T:
                if g("xtrip", v, t) == 1:
                    out.hit("eq19", (v, t))
                continue
            if g("xtrip", v, t) == 1:
                port = truck.port
                if g("d", v, port, t + 1) < g("a", v, port, t) + 1:
                    out.hit("eq19", (v, t))
                for p in range(1, P + 1):
                    if g("xc", v, port, p, t) == 1 and g("d", v, port, t + 1) < p + 1:
                        out.hit("eq20", (v, t, p))

        for t in range(1, T):
            n_star = instance.trip_destination(truck, t)
            if instance.is_outbound(t):
                tag, gated = "eq22", g("xtrip", v, t)
            else:
                tag, gated = "eq21", g("xtrip", v, t + 1)
            if gated == 1 and g("s", v, n_star, t + 1) != g("s", v, n_star, t):
                out.hit(tag, (v, t))

        for t in trips:
            if g("xld", v, t) > g("xtrip", v, t):
                out.hit("eq23", (v, t))
        for t in range(1, T):
            if g("xtrip", v, t + 1) > g("xtrip", v, t):
                out.hit("eq24", (v, t))

        for t in trips:
            demand = instance.corridor_demand(truck, instance.is_outbound(t))
            if demand is not None and g("ubar", demand.product) < g("u", v, t):
                out.hit("eq28", (v, t))
            if g("abar", v) < g("a", v, truck.home_depot, t):
                out.hit("eq31", (v, t))

    for demand in instance.demands:
        if g("ubar", demand.product) - demand.due > g("tard", demand.product):
            out.hit("eq29", (demand.product,))

    coupling: dict[tuple, int] = {}
    for demand in instance.demands:
        delivered = 0
        for truck in instance.fleet:
            for t in range(1, T + 1):
                if instance.corridor_demand(truck, instance.is_outbound(t)) == demand:
                    delivered += g("xld", truck.id, t)
        residual = delivered - demand.quantity
        family = "eq25" if net.node(demand.destination).kind == "port" else "eq26"
        coupling[(family, demand.destination, demand.product)] = residual
        if residual != 0:
            out.hit(family, (demand.product, residual))
    for n in chargers:
        site = net.charger_at(n)
        for p in range(1, P + 1):
            occupancy = sum(
                g("xc", truck.id, n, p, t)
                for truck in instance.fleet
                for t in range(1, T + 1)
            )
            over = max(0, occupancy - site.count)
            if over:
                coupling[("eq27", n, p)] = over
                out.hit("eq27", (n, p, over))

    cost = _cost_from_assignment(instance, catalog, x)
    return VerificationReport(
        feasible=out.clean,
        residuals=out.residuals,
        coupling=coupling,
        cost=cost,
        counts=out.counts,
    )


def _cost_from_assignment(instance: Instance, catalog: VariableCatalog, x: np.ndarray):
    from .model import CostBreakdown

    def g(*key) -> int:
        return int(x[catalog.idx(*key)])

    labor = 0.0
    charging = 0.0
    if instance.trips:
        for truck in instance.fleet:
            if g("xtrip", truck.id, 1) == 1:
                labor += instance.labor_cost * (
                    g("abar", truck.id) - g("d", truck.id, truck.home_depot, 1)
                )
            for n in instance.network.charger_nodes():
                site = instance.network.charger_at(n)
                for p in instance.periods:
                    for t in instance.trip_range:
                        if g("xc", truck.id, n, p, t) == 1:
                            charging += site.price_at(p)
    tardiness = 0.0
    for demand in instance.demands:
        latest = 0
        for truck in instance.fleet:
            for t in range(1, instance.trips + 1):
                if instance.corridor_demand(truck, instance.is_outbound(t)) == demand:
                    if g("xld", truck.id, t) == 1:
                        latest = max(latest, g("u", truck.id, t))
        tardiness += demand.penalty * max(0, latest - demand.due)
    return CostBreakdown(labor=labor, charging=charging, tardiness=tardiness)


def verify(instance: Instance, solution: Solution) -> VerificationReport:
    """Full independent verdict on an event-level fleet solution."""
    if len(solution.schedules) != len(instance.fleet):
        raise ValueError("solution must carry one schedule per truck")
    for truck in instance.fleet:
        solution.schedule_for(truck.id)
    catalog = VariableCatalog(instance)
    x = assignment_from_solution(instance, catalog, solution)
    return interpret_assignment(instance, catalog, x)


# ---------------------------------------------------------------------------
# Exhaustive schedule enumeration (plain DFS, no cost pruning)
# ---------------------------------------------------------------------------


class BudgetExceeded(Exception):
    pass


def enumerate_truck_schedules(
    instance: Instance, truck: Truck, node_budget: int = 2_000_000
) -> list[TruckSchedule]:
    """Every feasible schedule of one truck, by depth-first search.

    Hard-infeasible branches (battery below zero, horizon overrun,
    revisits within a trip) are the only pruning.  Two zero-benefit
    families are excluded from the schedule space by construction:
    charging periods that add nothing because the battery is already at
    the cap, and charging after the final arrival home.
    """
    P, T = instance.horizon, instance.trips
    net = instance.network
    cap = SOC_CAP_BP
    results: list[TruckSchedule] = []
    steps = [0]

    def tick() -> None:
        steps[0] += 1
        if steps[0] > node_budget:
            raise BudgetExceeded(f"enumeration exceeded {node_budget} steps")

    def stop_options(node: int, last: int, soc: int, allow_charge: bool):
        """Yield (depart_period, charge_periods, soc_after) for one stay."""
        site = net.charger_at(node) if allow_charge else None
        for depart in range(last + 1, P + 1):
            yield depart, (), soc
        if site is None or soc >= cap:
            return
        max_k = -(-(cap - soc) // truck.charge_rate)  # ceil division
        for start in range(last + 1, P + 1):
            gained = soc
            for k in range(1, max_k + 1):
                end = start + k - 1
                if end > P:
                    break
                gained = min(cap, gained + truck.charge_rate)
                periods = tuple((node, p) for p in range(start, end + 1))
                for depart in range(end + 1, P + 1):
                    yield depart, periods, gained

    def drive_out(trip_idx, loaded, node, depart, soc, visited, legs, charges, done, pending):
        tick()
        dest = instance.trip_destination(truck, trip_idx)
        for seg in sorted(net.segments_from(node), key=lambda s: s.end):
            tt = seg.travel_time(depart)
            arr = depart + tt - 1
            if arr > P or seg.end in visited:
                continue
            soc2 = soc - truck.discharge_rate(seg.key, loaded) * tt
            if soc2 < 0:
                continue
            new_legs = legs + (Leg(node, seg.end, depart, arr),)
            if seg.end == dest:
                between(trip_idx, arr, soc2, done, pending, new_legs, charges, loaded)
            else:
                at_intermediate(
                    trip_idx, loaded, seg.end, arr, soc2, visited | {seg.end}, new_legs, charges, done, pending
                )

    def at_intermediate(trip_idx, loaded, node, arrived, soc, visited, legs, charges, done, pending):
        tick()
        chargeable = net.charger_at(node) is not None
        for depart, chg, soc2 in stop_options(node, arrived, soc, chargeable):
            drive_out(
                trip_idx, loaded, node, depart, soc2, visited, legs, charges + chg, done, pending
            )

    def between(trip_idx, arrived, soc, done, pending, legs, mid_charges, loaded):
        """Trip trip_idx just ended at its destination; continue or stop."""
        tick()
        node = instance.trip_destination(truck, trip_idx)
        finished = done + (TripPlan(trip_idx, loaded, legs, mid_charges),)
        if node == truck.home_depot and trip_idx % 2 == 0:
            results.append(TruckSchedule(truck.id, finished))
        if trip_idx == T:
            return
        for depart, post_chg, soc2 in stop_options(node, arrived, soc, True):
            plan = TripPlan(trip_idx, loaded, legs, tuple(sorted(mid_charges + post_chg)))
            launch_trip(trip_idx + 1, node, depart, soc2, done + (plan,))

    def launch_trip(trip_idx, origin, depart, soc, done):
        demand = instance.corridor_demand(truck, instance.is_outbound(trip_idx))
        options = (False, True) if demand is not None else (False,)
        for loaded in options:
            drive_out(trip_idx, loaded, origin, depart, soc, {origin}, (), (), done, None)

    results.append(TruckSchedule(truck.id, ()))
    if T >= 1:
        first = max(truck.available, 1)
        for depart in range(first, P + 1):
            launch_trip(1, truck.home_depot, depart, cap, ())
    return results


# ---------------------------------------------------------------------------
# Brute-force exact optimum over the schedule cross product
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleLimits:
    max_trucks: int = 2
    max_nodes: int = 5
    max_periods: int = 20
    max_trips: int = 2
    node_budget: int = 5_000_000


@dataclass
class OracleResult:
    status: str  # "optimal" | "infeasible" | "budget_exceeded"
    cost: Optional[float] = None
    solution: Optional[Solution] = None
    nodes_explored: int = 0


def _own_cost(instance: Instance, sched: TruckSchedule) -> float:
    labor = instance.labor_cost * (sched.last_arrival - sched.first_departure) if sched.trips else 0.0
    charging = 0.0
    for node, period, _t in sched.charge_events():
        charging += instance.network.charger_at(node).price_at(period)
    return labor + charging


def brute_force_optimum(
    instance: Instance, limits: OracleLimits = OracleLimits()
) -> OracleResult:
    """Exact optimum of a tiny instance by exhaustive enumeration plus
    branch and bound over the truck cross product.

    The bound on a partial choice adds only certain costs (own labor and
    charging, tardiness of the chosen schedules, cheapest possible
    completion), so pruning never cuts the optimum; exceeding the node
    budget returns ``budget_exceeded`` rather than a wrong answer.
    """
    from .model import objective

    if len(instance.fleet) > limits.max_trucks:
        raise ValueError(f"oracle limit: at most {limits.max_trucks} trucks")
    if len(instance.network.nodes) > limits.max_nodes:
        raise ValueError(f"oracle limit: at most {limits.max_nodes} nodes")
    if instance.horizon > limits.max_periods:
        raise ValueError(f"oracle limit: at most {limits.max_periods} periods")
    if instance.trips > limits.max_trips:
        raise ValueError(f"oracle limit: at most {limits.max_trips} trips")

    explored = [0]
    try:
        per_truck: list[list[TruckSchedule]] = []
        for truck in instance.fleet:
            schedules = enumerate_truck_schedules(instance, truck, limits.node_budget)
            explored[0] += len(schedules)
            per_truck.append(schedules)
    except BudgetExceeded:
        return OracleResult(status="budget_exceeded", nodes_explored=explored[0])

    # precompute coupling footprints and sort each set by own cost
    infos = []
    for schedules in per_truck:
        rows = []
        for sched in schedules:
            truck = instance.truck(sched.truck_id)
            loads: dict[tuple[int, str], int] = {}
            for trip in sched.trips:
                if trip.loaded:
                    demand = instance.corridor_demand(truck, instance.is_outbound(trip.index))
                    if demand is not None:
                        key = (demand.destination, demand.product)
                        loads[key] = loads.get(key, 0) + 1
            occupancy = [(n, p) for n, p, _t in sched.charge_events()]
            rows.append((_own_cost(instance, sched), loads, occupancy, sched))
        rows.sort(key=lambda r: r[0])
        infos.append(rows)

    demand_keys = [(d.destination, d.product) for d in instance.demands]
    quantities = {(d.destination, d.product): d.quantity for d in instance.demands}
    max_loads = []
    for rows in infos:
        caps = {key: max((r[1].get(key, 0) for r in rows), default=0) for key in demand_keys}
        max_loads.append(caps)
    min_costs = [rows[0][0] if rows else 0.0 for rows in infos]
    suffix_min = [0.0] * (len(infos) + 1)
    for i in range(len(infos) - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + min_costs[i]

    capacity = {n: instance.network.charger_at(n).count for n in instance.network.charger_nodes()}
    best: list = [None, None]  # cost, tuple of schedules

    def partial_tardiness(chosen: list[TruckSchedule]) -> float:
        latest: dict[str, int] = {}
        for sched in chosen:
            truck = instance.truck(sched.truck_id)
            for trip in sched.trips:
                if trip.loaded:
                    demand = instance.corridor_demand(truck, instance.is_outbound(trip.index))
                    if demand is not None:
                        latest[demand.product] = max(latest.get(demand.product, 0), trip.arrival)
        total = 0.0
        for demand in instance.demands:
            total += demand.penalty * max(0, latest.get(demand.product, 0) - demand.due)
        return total

    def recurse(i: int, chosen: list, own: float, loads: dict, occupancy: dict) -> None:
        explored[0] += 1
        if explored[0] > limits.node_budget:
            raise BudgetExceeded("cross-product search exceeded the node budget")
        if i == len(infos):
            for key in demand_keys:
                if loads.get(key, 0) != quantities[key]:
                    return
            sol = Solution(tuple(chosen))
            total = objective(instance, sol).total
            if best[0] is None or total < best[0]:
                best[0], best[1] = total, sol
            return
        remaining_max = {
            key: sum(max_loads[j].get(key, 0) for j in range(i + 1, len(infos)))
            for key in demand_keys
        }
        for cost, sched_loads, occ, sched in infos[i]:
            bound = own + cost + suffix_min[i + 1]
            if best[0] is not None and bound >= best[0] - 1e-12:
                break  # cost-sorted set: nothing later can improve
            if best[0] is not None and bound + partial_tardiness(chosen + [sched]) >= best[0] - 1e-12:
                continue  # tardiness is not monotone in the sort, so no break
            new_loads = dict(loads)
            ok = True
            for key, count in sched_loads.items():
                new_loads[key] = new_loads.get(key, 0) + count
                if new_loads[key] > quantities.get(key, 0):
                    ok = False
                    break
            if ok:
                for key in demand_keys:
                    if new_loads.get(key, 0) + remaining_max[key] < quantities[key]:
                        ok = False
                        break
            if not ok:
                continue
            new_occ = dict(occupancy)
            for cell in occ:
                new_occ[cell] = new_occ.get(cell, 0) + 1
                if new_occ[cell] > capacity[cell[0]]:
                    ok = False
                    break
            if not ok:
                continue
            recurse(i + 1, chosen + [sched], own + cost, new_loads, new_occ)

    try:
        recurse(0, [], 0.0, {}, {})
    except BudgetExceeded:
        return OracleResult(status="budget_exceeded", nodes_explored=explored[0])

    if best[0] is None:
        return OracleResult(status="infeasible", nodes_explored=explored[0])
    return OracleResult(
        status="optimal", cost=best[0], solution=best[1], nodes_explored=explored[0]
    )
