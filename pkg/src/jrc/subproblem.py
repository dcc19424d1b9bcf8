"""Exact per-truck subproblems by label-setting over a time-expanded graph.

Every arc advances the clock, so the state graph is a DAG and one
period-ordered sweep with Pareto dominance yields the exact minimum of
the priced subproblem even though load rewards make some arc costs
negative.  The same engine serves three callers: the surrogate
coordination step (early exit as soon as a schedule beats the re-priced
incumbent), exact solves, and the penalty-free pricing used for dual
lower bounds.

States are (period, node, charge phase, trips done, mid-trip flag,
current load flag, own load counts); labels carry cost, battery level,
the visited set of the active trip (paths within a trip are simple), and
per-direction lateness excess.  A label dominates another at the same
state when it is no worse in every component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .instance import SOC_CAP_BP, Instance, Truck
from .model import CouplingSpace, charge_occupancy, coupling_space, load_counts
from .schedule import Leg, Solution, TripPlan, TruckSchedule

FRESH, CHARGING, POST = 0, 1, 2

# label field offsets
COST, SOC, MASK, EXO, EXI, SEQ, PARENT, ACTION = range(8)


@dataclass(frozen=True)
class FixedContext:
    """Other trucks' latest decisions, frozen for one coordination step."""

    others_loads: dict[tuple[int, str], int]
    others_occupancy: dict[tuple[int, int], int]
    fixed_unloads: dict[str, int]


def fixed_context(instance: Instance, truck: Truck, pool: Solution) -> FixedContext:
    others = Solution(tuple(s for s in pool.schedules if s.truck_id != truck.id))
    loads = load_counts(instance, others)
    occupancy = charge_occupancy(others)
    unloads: dict[str, int] = {}
    for sched in others.schedules:
        other = instance.truck(sched.truck_id)
        for trip in sched.trips:
            if trip.loaded:
                demand = instance.corridor_demand(other, instance.is_outbound(trip.index))
                if demand is not None:
                    unloads[demand.product] = max(unloads.get(demand.product, 0), trip.arrival)
    return FixedContext(loads, occupancy, unloads)


EMPTY_CONTEXT = FixedContext({}, {}, {})


@dataclass(frozen=True)
class TruckGraph:
    """Static per-truck arc data, reusable across coordination steps."""

    instance: Instance
    truck: Truck

    def __post_init__(self) -> None:
        neighbors: dict[int, tuple] = {}
        for node in self.instance.network.nodes:
            segs = sorted(self.instance.network.segments_from(node.id), key=lambda s: s.end)
            neighbors[node.id] = tuple(segs)
        object.__setattr__(self, "neighbors", neighbors)

    def drive_arc(
        self, segment_key: tuple[int, int], depart: int, loaded: bool, soc: int
    ) -> Optional[tuple[int, int]]:
        """(arrival period, battery after) or None when the arc is
        infeasible (horizon overrun or battery underrun)."""
        seg = self.instance.network.segment(*segment_key)
        duration = seg.travel_time(depart)
        arrive = depart + duration - 1
        if arrive > self.instance.horizon:
            return None
        after = soc - self.truck.discharge_rate(segment_key, loaded) * duration
        if after < 0:
            return None
        return arrive, after

    def charge_arc(self, soc: int) -> int:
        """Battery after one charging period, saturated at the cap."""
        return min(SOC_CAP_BP, soc + self.truck.charge_rate)


def build_truck_graph(instance: Instance, truck: Truck) -> TruckGraph:
    return TruckGraph(instance, truck)


# ---------------------------------------------------------------------------
# Pricing: additive coordination costs derived from (lam, rho, context)
# ---------------------------------------------------------------------------


@dataclass
class Pricing:
    truck: Truck
    constant: float
    charge_extra: dict[tuple[int, int], float]
    load_marginal: dict[bool, Optional[tuple[float, ...]]]  # by outbound flag
    theta: dict[bool, int]
    penalty: dict[bool, float]


def _direction_trip_count(instance: Instance, outbound: bool) -> int:
    return sum(1 for t in instance.trip_range if instance.is_outbound(t) == outbound)


def penalized_pricing(
    instance: Instance,
    space: CouplingSpace,
    truck: Truck,
    lam: np.ndarray,
    rho: float,
    ctx: FixedContext,
) -> Pricing:
    """Marginal costs of the relaxed subproblem objective: multiplier and
    penalty terms with the other trucks' decisions held fixed."""
    constant = 0.0
    own = {
        True: instance.corridor_demand(truck, True),
        False: instance.corridor_demand(truck, False),
    }
    load_marginal: dict[bool, Optional[tuple[float, ...]]] = {True: None, False: None}
    theta = {True: 0, False: 0}
    penalty = {True: 0.0, False: 0.0}

    for demand in instance.demands:
        idx = space.demand_index(demand.destination, demand.product)
        others = ctx.others_loads.get((demand.destination, demand.product), 0)
        resid = others - demand.quantity
        constant += float(lam[idx]) * resid + rho * abs(resid)
        fixed = ctx.fixed_unloads.get(demand.product, 0)
        constant += demand.penalty * max(0, fixed - demand.due)
        for outbound in (True, False):
            if own[outbound] is not demand:
                continue
            slots = _direction_trip_count(instance, outbound)
            load_marginal[outbound] = tuple(
                float(lam[idx])
                + rho * (abs(others + c + 1 - demand.quantity) - abs(others + c - demand.quantity))
                for c in range(slots)
            )
            theta[outbound] = max(demand.due, fixed)
            penalty[outbound] = demand.penalty

    charge_extra: dict[tuple[int, int], float] = {}
    for (node, period), occ in ctx.others_occupancy.items():
        site = instance.network.charger_at(node)
        over = occ - site.count
        idx = space.capacity_index(node, period)
        if over > 0:
            constant += float(lam[idx]) * over + rho * over
        if over >= 0:
            charge_extra[(node, period)] = float(lam[idx]) + rho

    return Pricing(truck, constant, charge_extra, load_marginal, theta, penalty)


def affine_pricing(
    instance: Instance,
    space: CouplingSpace,
    truck: Truck,
    lam: np.ndarray,
    counted_products: frozenset[str],
) -> Pricing:
    """Penalty-free pricing for dual bounds: every own load earns its
    demand multiplier, every charging period pays its cell multiplier,
    and tardiness is counted only for this truck's designated products."""
    load_marginal: dict[bool, Optional[tuple[float, ...]]] = {True: None, False: None}
    theta = {True: 0, False: 0}
    penalty = {True: 0.0, False: 0.0}
    for outbound in (True, False):
        demand = instance.corridor_demand(truck, outbound)
        if demand is None:
            continue
        idx = space.demand_index(demand.destination, demand.product)
        slots = _direction_trip_count(instance, outbound)
        load_marginal[outbound] = tuple(float(lam[idx]) for _ in range(slots))
        if demand.product in counted_products:
            theta[outbound] = demand.due
            penalty[outbound] = demand.penalty

    charge_extra: dict[tuple[int, int], float] = {}
    cap_block = lam[space.capacity_slice]
    for offset in np.nonzero(cap_block)[0]:
        node, period = space.capacity_keys[int(offset)]
        charge_extra[(node, period)] = float(cap_block[offset])

    return Pricing(truck, 0.0, charge_extra, load_marginal, theta, penalty)


# ---------------------------------------------------------------------------
# Label-setting sweep
# ---------------------------------------------------------------------------


@dataclass
class SubproblemResult:
    schedule: TruckSchedule
    value: float
    flag: str  # "improved" | "exact_optimal" | "infeasible"
    expansions: int = 0


class _Improved(Exception):
    def __init__(self, label, value):
        self.label = label
        self.value = value


def _dominates(a, b) -> bool:
    return (
        a[COST] <= b[COST]
        and a[SOC] >= b[SOC]
        and (a[MASK] & b[MASK]) == a[MASK]
        and a[EXO] <= b[EXO]
        and a[EXI] <= b[EXI]
    )


# guard against last-ulp noise between the sweep's incremental values
# and the residual-assembled incumbent value; never masks a real gain
IMPROVEMENT_EPS = 1e-9


def _min_travel(seg) -> int:
    return min(seg.travel) if isinstance(seg.travel, tuple) else seg.travel


def _shortest_periods(instance, target: int) -> dict[int, float]:
    """Fewest travel periods from every node to the target (best-case
    departure times; admissible for bounding)."""
    import heapq

    dist = {n.id: math_inf for n in instance.network.nodes}
    dist[target] = 0.0
    heap = [(0.0, target)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for seg in instance.network.segments_into(node):
            nd = d + _min_travel(seg)
            if nd < dist[seg.start]:
                dist[seg.start] = nd
                heapq.heappush(heap, (nd, seg.start))
    return dist


math_inf = float("inf")


class _Sweep:
    def __init__(self, instance, truck, pricing, graph, incumbent_value, prune=True, seed_bound=None):
        self.inst = instance
        self.truck = truck
        self.pricing = pricing
        self.graph = graph or build_truck_graph(instance, truck)
        self.inc = incumbent_value
        self.prune = prune
        self.seed_bound = seed_bound
        self.P = instance.horizon
        self.T = instance.trips
        self.lbr = instance.labor_cost
        self.cap = SOC_CAP_BP
        self.bit = {
            n.id: 1 << i
            for i, n in enumerate(sorted(instance.network.nodes, key=lambda n: n.id))
        }
        self.pending: list[dict] = [dict() for _ in range(self.P + 2)]
        self.best_value: Optional[float] = None
        self.best_label = None
        self.seq = 0
        self.expansions = 0
        self.sites = {
            c.node: instance.network.charger_at(c.node) for c in instance.network.chargers
        }
        self._build_cost_floor()

    def _build_cost_floor(self) -> None:
        """Admissible cost-to-go: shortest-path labor for every trip the
        truck is still committed to, minus the best collectable load
        rewards, with optional future round trips netted at zero when
        they cannot pay for themselves."""
        inst, truck, pricing = self.inst, self.truck, self.pricing
        T = inst.trips
        lbr = inst.labor_cost
        self.dist_to = {
            True: _shortest_periods(inst, truck.port),      # outbound trips
            False: _shortest_periods(inst, truck.home_depot),
        }
        marg = pricing.load_marginal
        slots = {d: len(marg[d]) if marg[d] is not None else 0 for d in (True, False)}
        floor: dict[tuple[int, int, int], float] = {}
        for tau in range(T, -1, -1):
            for oc in range(slots[True] + 1):
                for ic in range(slots[False] + 1):
                    if tau == T:
                        floor[(tau, oc, ic)] = 0.0
                        continue
                    outbound = inst.is_outbound(tau + 1)
                    origin = inst.trip_origin(truck, tau + 1)
                    leg_floor = lbr * self.dist_to[outbound][origin]
                    count = oc if outbound else ic
                    go = leg_floor + floor[
                        (tau + 1, oc, ic)
                    ]
                    if marg[outbound] is not None and count < slots[outbound]:
                        loaded_next = (tau + 1, oc + (1 if outbound else 0), ic + (0 if outbound else 1))
                        go = min(go, leg_floor + marg[outbound][count] + floor[loaded_next])
                    mandatory = tau >= 1 and inst.is_outbound(tau)
                    floor[(tau, oc, ic)] = go if mandatory else min(0.0, go)
        self.floor = floor
        self.slots = slots

    def cost_floor(self, key) -> float:
        node, _stage, tau, mid, loaded, oc, ic = key
        oc = min(oc, self.slots[True])
        ic = min(ic, self.slots[False])
        if not mid:
            return self.floor[(tau, oc, ic)]
        # mid-trip: the active trip must still reach its destination
        trip = tau + 1
        outbound = self.inst.is_outbound(trip)
        remaining = self.dist_to[outbound][node]
        if remaining == math_inf:
            return math_inf
        extra = self.inst.labor_cost * remaining
        oc2, ic2 = oc, ic
        if loaded:
            marg = self.pricing.load_marginal[outbound]
            count = oc if outbound else ic
            if marg is not None and count < self.slots[outbound]:
                extra += marg[count]
                oc2, ic2 = (oc + 1, ic) if outbound else (oc, ic + 1)
        return extra + self.floor[(trip, min(oc2, self.slots[True]), min(ic2, self.slots[False]))]

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def hopeless(self, label, key) -> bool:
        """Admissible bound: the cost so far plus the best possible
        completion cannot strictly beat the best terminal found."""
        if self.best_value is None:
            return False
        pr = self.pricing
        bound = (
            label[COST]
            + pr.constant
            - self.lbr
            + pr.penalty[True] * label[EXO]
            + pr.penalty[False] * label[EXI]
            + self.cost_floor(key)
        )
        return bound >= self.best_value - 1e-12

    def insert(self, period, key, label) -> None:
        if self.prune and self.hopeless(label, key):
            return
        bucket = self.pending[period].setdefault(key, [])
        if not self.prune:
            bucket.append(label)
            return
        cost, soc, mask, exo, exi = label[COST], label[SOC], label[MASK], label[EXO], label[EXI]
        lo = 0
        # bucket is cost-sorted: only cheaper-or-equal labels can
        # dominate, only costlier-or-equal ones can be dominated
        for other in bucket:
            if other[1] < soc or other[0] > cost:
                if other[0] > cost:
                    break
                lo += 1
                continue
            if (
                other[0] <= cost
                and (other[2] & mask) == other[2]
                and other[3] <= exo
                and other[4] <= exi
            ):
                return
            lo += 1
        keep = bucket[:lo]
        for other in bucket[lo:]:
            if not (
                soc >= other[1]
                and (mask & other[2]) == mask
                and exo <= other[3]
                and exi <= other[4]
            ):
                keep.append(other)
        keep.insert(lo, label)
        self.pending[period][key] = keep

    def consider_terminal(self, label, trips_done) -> None:
        pr = self.pricing
        value = (
            label[COST]
            + pr.penalty[True] * label[EXO]
            + pr.penalty[False] * label[EXI]
            + pr.constant
        )
        if trips_done > 0:
            value -= self.lbr  # span = consumed periods - 1
        if self.inc is not None and value < self.inc - IMPROVEMENT_EPS:
            raise _Improved(label, value)
        if self.best_value is None or value < self.best_value:
            self.best_value = value
            self.best_label = label

    def complete_trip(self, trip_idx, loaded, node, period, cost, soc, exo, exi, oc, ic, parent, action):
        pr = self.pricing
        outbound = self.inst.is_outbound(trip_idx)
        if loaded:
            marg = pr.load_marginal[True if outbound else False]
            if outbound:
                cost += marg[oc]
                oc += 1
                if pr.penalty[True] > 0:
                    exo = max(exo, period - pr.theta[True])
            else:
                cost += marg[ic]
                ic += 1
                if pr.penalty[False] > 0:
                    exi = max(exi, period - pr.theta[False])
        label = [cost, soc, 0, exo, exi, self.next_seq(), parent, action]
        if node == self.truck.home_depot and trip_idx % 2 == 0:
            self.consider_terminal(label, trip_idx)
        if trip_idx < self.T:
            key = (node, FRESH, trip_idx, False, False, oc, ic)
            self.insert(period, key, label)

    def launch_drives(self, node, depart, trip_idx, loaded, mask, cost, soc, exo, exi, oc, ic, parent):
        dest = self.inst.trip_destination(self.truck, trip_idx)
        for seg in self.graph.neighbors[node]:
            if self.bit[seg.end] & mask:
                continue
            arc = self.graph.drive_arc(seg.key, depart, loaded, soc)
            if arc is None:
                continue
            arrive, soc2 = arc
            duration = arrive - depart + 1
            cost2 = cost + self.lbr * duration
            action = ("drive", trip_idx, loaded, node, seg.end, depart, arrive)
            if seg.end == dest:
                self.complete_trip(
                    trip_idx, loaded, seg.end, arrive, cost2, soc2, exo, exi, oc, ic, parent, action
                )
            else:
                label = [cost2, soc2, mask | self.bit[seg.end], exo, exi, self.next_seq(), parent, action]
                key = (seg.end, FRESH, trip_idx - 1, True, loaded, oc, ic)
                self.insert(arrive, key, label)

    def load_options(self, trip_idx):
        if self.pricing.load_marginal[self.inst.is_outbound(trip_idx)] is not None:
            return (False, True)
        return (False,)

    def run(self) -> tuple[Optional[float], Optional[list], int]:
        if self.seed_bound is not None:
            self.best_value = self.seed_bound  # prune-only bound, no label
        root = [0.0, self.cap, 0, 0, 0, 0, None, ("start",)]
        self.consider_terminal(root, 0)
        if self.T >= 1:
            home = self.truck.home_depot
            for depart in range(max(self.truck.available, 1), self.P + 1):
                for loaded in self.load_options(1):
                    self.launch_drives(
                        home, depart, 1, loaded, self.bit[home], 0.0, self.cap, 0, 0, 0, 0, root
                    )

        for period in range(1, self.P + 1):
            buckets = self.pending[period]
            if not buckets:
                continue
            for key in sorted(buckets):
                node, stage, tau, mid, loaded, oc, ic = key
                labels = sorted(buckets[key], key=lambda l: (l[COST], -l[SOC], l[SEQ]))
                for label in labels:
                    if self.prune and self.hopeless(label, key):
                        continue
                    self.expansions += 1
                    self.expand(period, node, stage, tau, mid, loaded, oc, ic, label)
        return self.best_value, self.best_label, self.expansions

    def expand(self, period, node, stage, tau, mid, loaded, oc, ic, label):
        nxt = period + 1
        cost, soc, mask, exo, exi = label[COST], label[SOC], label[MASK], label[EXO], label[EXI]

        if nxt <= self.P:
            # dwell: one period in place (closes an open charging block)
            stage2 = POST if stage == CHARGING else stage
            dlab = [cost + self.lbr, soc, mask, exo, exi, self.next_seq(), label, ("dwell", node, nxt)]
            self.insert(nxt, (node, stage2, tau, mid, loaded, oc, ic), dlab)

            # charge: one period at this node's station
            site = self.sites.get(node)
            if site is not None and stage in (FRESH, CHARGING) and soc < self.cap:
                price = site.price_at(nxt) + self.pricing.charge_extra.get((node, nxt), 0.0)
                clab = [
                    cost + self.lbr + price,
                    self.graph.charge_arc(soc),
                    mask,
                    exo,
                    exi,
                    self.next_seq(),
                    label,
                    ("charge", node, nxt),
                ]
                self.insert(nxt, (node, CHARGING, tau, mid, loaded, oc, ic), clab)

        # depart at nxt
        if mid:
            trip_idx = tau + 1
            self.launch_drives(node, nxt, trip_idx, loaded, mask, cost, soc, exo, exi, oc, ic, label)
        elif tau < self.T:
            for ld in self.load_options(tau + 1):
                self.launch_drives(
                    node, nxt, tau + 1, ld, self.bit[node], cost, soc, exo, exi, oc, ic, label
                )


def _reconstruct(truck: Truck, label) -> TruckSchedule:
    actions = []
    cur = label
    while cur is not None:
        actions.append(cur[ACTION])
        cur = cur[PARENT]
    actions.reverse()

    trips: dict[int, dict] = {}
    current = 0
    for action in actions:
        kind = action[0]
        if kind == "drive":
            _, trip_idx, loaded, start, end, depart, arrive = action
            entry = trips.setdefault(trip_idx, {"loaded": loaded, "legs": [], "charges": []})
            entry["legs"].append(Leg(start, end, depart, arrive))
            current = trip_idx
        elif kind == "charge":
            _, node, p = action
            trips[current]["charges"].append((node, p))
    plans = tuple(
        TripPlan(idx, info["loaded"], tuple(info["legs"]), tuple(sorted(info["charges"])))
        for idx, info in sorted(trips.items())
    )
    return TruckSchedule(truck.id, plans)


def solve_priced(
    instance: Instance,
    truck: Truck,
    pricing: Pricing,
    incumbent_value: Optional[float] = None,
    graph: Optional[TruckGraph] = None,
    prune: bool = True,
    seed_bound: Optional[float] = None,
) -> SubproblemResult:
    sweep = _Sweep(instance, truck, pricing, graph, incumbent_value, prune, seed_bound)
    try:
        value, label, expansions = sweep.run()
    except _Improved as hit:
        return SubproblemResult(
            schedule=_reconstruct(truck, hit.label),
            value=hit.value,
            flag="improved",
            expansions=sweep.expansions,
        )
    if label is None:
        if seed_bound is not None:
            # nothing strictly beats the seed; only the bound is known
            return SubproblemResult(TruckSchedule(truck.id), seed_bound, "at_seed", expansions)
        return SubproblemResult(TruckSchedule(truck.id), float("inf"), "infeasible", expansions)
    return SubproblemResult(_reconstruct(truck, label), value, "exact_optimal", expansions)


def solve_exact(
    instance: Instance,
    truck: Truck,
    lam: np.ndarray,
    rho: float,
    ctx: FixedContext,
    space: Optional[CouplingSpace] = None,
    graph: Optional[TruckGraph] = None,
    warm: Optional[TruckSchedule] = None,
) -> SubproblemResult:
    """Global minimizer of the priced subproblem over the truck's
    feasible schedules.

    ``warm`` may carry any known schedule; its priced value seeds the
    pruning bound (a standard incumbent bound, exactness preserved)."""
    space = space or coupling_space(instance)
    pricing = penalized_pricing(instance, space, truck, lam, rho, ctx)
    if warm is None:
        return solve_priced(instance, truck, pricing, None, graph)
    seed = reprice(instance, truck, lam, rho, ctx, warm, space)
    result = solve_priced(instance, truck, pricing, None, graph, seed_bound=seed)
    if result.flag == "at_seed":
        return SubproblemResult(warm, seed, "exact_optimal", result.expansions)
    return result


def solve_surrogate(
    instance: Instance,
    truck: Truck,
    lam: np.ndarray,
    rho: float,
    ctx: FixedContext,
    incumbent: Optional[TruckSchedule],
    space: Optional[CouplingSpace] = None,
    graph: Optional[TruckGraph] = None,
) -> SubproblemResult:
    """Stop at the first schedule strictly better than the incumbent
    re-priced under the current multipliers; fall back to the exact
    optimum when no such schedule exists."""
    space = space or coupling_space(instance)
    if incumbent is None:
        return solve_exact(instance, truck, lam, rho, ctx, space, graph)
    inc_value = reprice(instance, truck, lam, rho, ctx, incumbent, space)
    pricing = penalized_pricing(instance, space, truck, lam, rho, ctx)
    # seeding the pruning bound with the incumbent value is safe: pruned
    # completions cannot satisfy the strict-improvement condition anyway
    result = solve_priced(instance, truck, pricing, inc_value, graph, seed_bound=inc_value)
    if result.flag == "improved":
        return result
    # search exhausted without strict improvement: incumbent optimal or matched
    return SubproblemResult(incumbent, inc_value, "exact_optimal", result.expansions)


def reprice(
    instance: Instance,
    truck: Truck,
    lam: np.ndarray,
    rho: float,
    ctx: FixedContext,
    sched: TruckSchedule,
    space: Optional[CouplingSpace] = None,
) -> float:
    """Priced value of a fixed schedule, assembled from the full residual
    vector rather than arc marginals (independent of the sweep)."""
    space = space or coupling_space(instance)
    own = 0.0
    if sched.num_trips > 0:
        own += instance.labor_cost * (sched.last_arrival - sched.first_departure)
    for node, period, _t in sched.charge_events():
        own += instance.network.charger_at(node).price_at(period)

    h = np.zeros(space.size, dtype=np.float64)
    own_loads: dict[tuple[int, str], int] = {}
    own_unloads: dict[str, int] = {}
    for trip in sched.trips:
        if not trip.loaded:
            continue
        demand = instance.corridor_demand(truck, instance.is_outbound(trip.index))
        if demand is None:
            continue
        key = (demand.destination, demand.product)
        own_loads[key] = own_loads.get(key, 0) + 1
        own_unloads[demand.product] = max(own_unloads.get(demand.product, 0), trip.arrival)
    for demand in instance.demands:
        key = (demand.destination, demand.product)
        total = ctx.others_loads.get(key, 0) + own_loads.get(key, 0)
        h[space.demand_index(*key)] = total - demand.quantity
    occupancy = dict(ctx.others_occupancy)
    for node, period, _t in sched.charge_events():
        occupancy[(node, period)] = occupancy.get((node, period), 0) + 1
    for (node, period), occ in occupancy.items():
        over = occ - instance.network.charger_at(node).count
        if over > 0:
            h[space.capacity_index(node, period)] = over

    tardiness = 0.0
    for demand in instance.demands:
        latest = max(ctx.fixed_unloads.get(demand.product, 0), own_unloads.get(demand.product, 0))
        tardiness += demand.penalty * max(0, latest - demand.due)

    return own + tardiness + float(lam @ h) + rho * float(np.abs(h).sum())
