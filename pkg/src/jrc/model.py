"""Time-expanded constraint system, objective, and coupling machinery.

``build_model`` assembles the full per-truck constraint set as sparse
integer rows (logical implications expanded into big-M pairs), tagged by
the constraint family they come from.  The truck-coupling families
(demand satisfaction and charging-station capacity) are deliberately
*not* part of the canonical system: they are evaluated as a violation
vector by :func:`coupling_violations` and relaxed by the coordinator.

All row coefficients, right-hand sides, and variable values are
integers, so feasibility checks are exact (no tolerances anywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .instance import DEPOT, PORT, SOC_CAP_BP, Demand, Instance
from .schedule import Solution, TruckSchedule, soc_profile

LE, GE, EQ = "<=", ">=", "=="


# ---------------------------------------------------------------------------
# Coupling space: index layout of the relaxed-constraint residual vector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingSpace:
    """Component layout of the violation vector and multiplier vector.

    Blocks, in order: port demand (one per port-destined demand row),
    depot demand (one per depot-destined row), charger capacity (one per
    (charger node, period)).
    """

    port_keys: tuple[tuple[int, str], ...]
    depot_keys: tuple[tuple[int, str], ...]
    capacity_keys: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        index: dict = {}
        for i, key in enumerate(self.port_keys):
            index[("port", *key)] = i
        base = len(self.port_keys)
        for i, key in enumerate(self.depot_keys):
            index[("depot", *key)] = base + i
        base += len(self.depot_keys)
        for i, key in enumerate(self.capacity_keys):
            index[("cap", *key)] = base + i
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.port_keys) + len(self.depot_keys) + len(self.capacity_keys)

    @property
    def demand_size(self) -> int:
        return len(self.port_keys) + len(self.depot_keys)

    @property
    def capacity_slice(self) -> slice:
        return slice(self.demand_size, self.size)

    def demand_index(self, destination: int, product: str) -> int:
        key = ("port", destination, product)
        if key in self._index:
            return self._index[key]
        return self._index[("depot", destination, product)]

    def capacity_index(self, node: int, period: int) -> int:
        return self._index[("cap", node, period)]

    def describe(self, i: int) -> tuple:
        if i < len(self.port_keys):
            return ("port", *self.port_keys[i])
        i -= len(self.port_keys)
        if i < len(self.depot_keys):
            return ("depot", *self.depot_keys[i])
        i -= len(self.depot_keys)
        return ("cap", *self.capacity_keys[i])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size, dtype=np.float64)

    def project(self, lam: np.ndarray) -> np.ndarray:
        """Clip the capacity block onto the nonnegative orthant."""
        out = lam.copy()
        out[self.capacity_slice] = np.maximum(out[self.capacity_slice], 0.0)
        return out


def coupling_space(instance: Instance) -> CouplingSpace:
    port_keys = sorted(
        (d.destination, d.product)
        for d in instance.demands
        if instance.network.node(d.destination).kind == PORT
    )
    depot_keys = sorted(
        (d.destination, d.product)
        for d in instance.demands
        if instance.network.node(d.destination).kind == DEPOT
    )
    cap_keys = [
        (node, p) for node in instance.network.charger_nodes() for p in instance.periods
    ]
    return CouplingSpace(tuple(port_keys), tuple(depot_keys), tuple(cap_keys))


def load_counts(instance: Instance, solution: Solution) -> dict[tuple[int, str], int]:
    """Delivered-load count per (destination, product) over all trucks."""
    counts: dict[tuple[int, str], int] = {}
    for sched in solution.schedules:
        truck = instance.truck(sched.truck_id)
        for trip in sched.trips:
            if not trip.loaded:
                continue
            demand = instance.corridor_demand(truck, instance.is_outbound(trip.index))
            if demand is None:
                continue
            key = (demand.destination, demand.product)
            counts[key] = counts.get(key, 0) + 1
    return counts


def charge_occupancy(solution: Solution) -> dict[tuple[int, int], int]:
    """Charging trucks per (node, period) over all schedules."""
    occ: dict[tuple[int, int], int] = {}
    for sched in solution.schedules:
        for node, period, _trip in sched.charge_events():
            occ[(node, period)] = occ.get((node, period), 0) + 1
    return occ


def coupling_violations(
    instance: Instance, solution: Solution, space: Optional[CouplingSpace] = None
) -> np.ndarray:
    """Residuals of the relaxed truck-coupling constraints.

    Demand components are signed (loads minus quantity); capacity
    components use the slack-eliminated form max(0, occupancy - count),
    i.e. the nonnegative slack that minimizes the residual magnitude.
    """
    if space is None:
        space = coupling_space(instance)
    h = np.zeros(space.size, dtype=np.int64)
    counts = load_counts(instance, solution)
    for demand in instance.demands:
        idx = space.demand_index(demand.destination, demand.product)
        h[idx] = counts.get((demand.destination, demand.product), 0) - demand.quantity
    occ = charge_occupancy(solution)
    for (node, period), n in occ.items():
        site = instance.network.charger_at(node)
        over = n - (site.count if site is not None else 0)
        if over > 0:
            h[space.capacity_index(node, period)] = over
    return h


# ---------------------------------------------------------------------------
# Objective and Lagrangian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostBreakdown:
    labor: float
    charging: float
    tardiness: float

    @property
    def total(self) -> float:
        return self.labor + self.charging + self.tardiness


def latest_unload_times(instance: Instance, solution: Solution) -> dict[str, int]:
    """Latest unloading start period per product (0 when never delivered)."""
    latest = {d.product: 0 for d in instance.demands}
    for sched in solution.schedules:
        truck = instance.truck(sched.truck_id)
        for trip in sched.trips:
            if not trip.loaded:
                continue
            demand = instance.corridor_demand(truck, instance.is_outbound(trip.index))
            if demand is None:
                continue
            latest[demand.product] = max(latest[demand.product], trip.arrival)
    return latest


def objective(instance: Instance, solution: Solution) -> CostBreakdown:
    """Labor + charging + tardiness cost of a complete fleet solution."""
    labor = 0.0
    charging = 0.0
    for sched in solution.schedules:
        if sched.num_trips > 0:
            labor += instance.labor_cost * (sched.last_arrival - sched.first_departure)
        for node, period, _trip in sched.charge_events():
            site = instance.network.charger_at(node)
            charging += site.price_at(period) if site is not None else 0.0
    tardiness = 0.0
    latest = latest_unload_times(instance, solution)
    for demand in instance.demands:
        tardiness += demand.penalty * max(0, latest[demand.product] - demand.due)
    return CostBreakdown(labor=labor, charging=charging, tardiness=tardiness)


def lagrangian_value(
    instance: Instance,
    solution: Solution,
    lam: np.ndarray,
    rho: float,
    space: Optional[CouplingSpace] = None,
) -> float:
    """Absolute-value Lagrangian: cost + lam.H + rho*|H|_1."""
    if space is None:
        space = coupling_space(instance)
    if lam.shape != (space.size,):
        raise ValueError(f"multiplier vector has shape {lam.shape}, expected ({space.size},)")
    h = coupling_violations(instance, solution, space)
    obj = objective(instance, solution).total
    return obj + float(lam @ h) + rho * float(np.abs(h).sum())


# ---------------------------------------------------------------------------
# Variable catalog
# ---------------------------------------------------------------------------


class VariableCatalog:
    """Flat index space over every decision variable of an instance.

    Families: binary movement indicators (departure, arrival), charging
    indicators and their begin/complete markers, trip/load flags, the
    integer time variables they induce, unloading starts, per-product
    latest-unload and tardiness, per-truck latest depot arrival, battery
    state per (truck, node, trip), and the charge-clipping spill pair.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self._index: dict[tuple, int] = {}
        lb: list[int] = []
        ub: list[int] = []
        binary: list[bool] = []

        def add(key: tuple, low: int, high: int, is_bin: bool) -> None:
            self._index[key] = len(lb)
            lb.append(low)
            ub.append(high)
            binary.append(is_bin)

        net = instance.network
        nodes = sorted(n.id for n in net.nodes)
        chargers = net.charger_nodes()
        P, T = instance.horizon, instance.trips
        cap = SOC_CAP_BP

        for v in (t.id for t in instance.fleet):
            truck = instance.truck(v)
            for fam in ("xd", "xa"):
                for n in nodes:
                    for p in range(1, P + 1):
                        for t in range(1, T + 1):
                            add((fam, v, n, p, t), 0, 1, True)
            for fam in ("xc", "xcb", "xcc"):
                for n in chargers:
                    for p in range(1, P + 1):
                        for t in range(1, T + 1):
                            add((fam, v, n, p, t), 0, 1, True)
            for t in range(1, T + 1):
                add(("xtrip", v, t), 0, 1, True)
                add(("xld", v, t), 0, 1, True)
            for fam in ("d", "a"):
                for n in nodes:
                    for t in range(1, T + 1):
                        add((fam, v, n, t), 0, P, False)
            for fam in ("b", "c"):
                for n in chargers:
                    for t in range(1, T + 1):
                        add((fam, v, n, t), 0, P, False)
            for t in range(1, T + 1):
                if instance.corridor_demand(truck, instance.is_outbound(t)) is not None:
                    add(("u", v, t), 0, P, False)
            for n in nodes:
                for t in range(1, T + 1):
                    add(("s", v, n, t), 0, cap, False)
            spill_cap = truck.charge_rate * P
            for n in chargers:
                for t in range(1, T + 1):
                    add(("ofl", v, n, t), 0, spill_cap, False)
                    add(("xfull", v, n, t), 0, 1, True)
            add(("abar", v), 0, P, False)

        for demand in instance.demands:
            add(("ubar", demand.product), 0, P, False)
            add(("tard", demand.product), 0, P, False)

        self.lb = np.array(lb, dtype=np.int64)
        self.ub = np.array(ub, dtype=np.int64)
        self.binary = np.array(binary, dtype=bool)
        self._keys = [None] * len(self._index)
        for key, i in self._index.items():
            self._keys[i] = key

    @property
    def size(self) -> int:
        return len(self._keys)

    def idx(self, *key) -> int:
        return self._index[key]

    def has(self, *key) -> bool:
        return key in self._index

    def key_of(self, i: int) -> tuple:
        return self._keys[i]

    def name_of(self, i: int) -> str:
        key = self._keys[i]
        return key[0] + "_" + "_".join(str(k) for k in key[1:])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size, dtype=np.int64)

    def check_bounds(self, x: np.ndarray) -> list[tuple[str, int]]:
        bad = np.nonzero((x < self.lb) | (x > self.ub))[0]
        return [(self.name_of(int(i)), int(x[i])) for i in bad]


# ---------------------------------------------------------------------------
# Canonical model
# ---------------------------------------------------------------------------


@dataclass
class ModelStats:
    rows: int
    variables: int
    nonzeros: int


class CanonicalModel:
    """Sparse linearized constraint system with per-row equation tags."""

    def __init__(self, instance: Instance, catalog: VariableCatalog):
        self.instance = instance
        self.catalog = catalog
        self.tags: list[str] = []
        self.senses: list[str] = []
        self._rhs: list[int] = []
        self.big_m: dict[int, int] = {}
        self._row_cols: list[list[int]] = []
        self._row_coefs: list[list[int]] = []
        self._frozen = False

    def add_row(self, tag: str, terms: dict[int, int], sense: str, rhs: int, m: int = 0) -> None:
        cols, coefs = [], []
        for col, coef in terms.items():
            if coef != 0:
                cols.append(col)
                coefs.append(coef)
        if not cols:
            raise ValueError(f"empty row for tag {tag}")
        row = len(self.tags)
        self.tags.append(tag)
        self.senses.append(sense)
        self._rhs.append(rhs)
        self._row_cols.append(cols)
        self._row_coefs.append(coefs)
        if m:
            self.big_m[row] = m

    def freeze(self) -> None:
        self.row_ptr = np.cumsum([0] + [len(c) for c in self._row_cols]).astype(np.int64)
        self.col_idx = np.array([c for row in self._row_cols for c in row], dtype=np.int64)
        self.coefs = np.array([c for row in self._row_coefs for c in row], dtype=np.int64)
        self.rhs = np.array(self._rhs, dtype=np.int64)
        self.sense_le = np.array([s == LE for s in self.senses], dtype=bool)
        self.sense_ge = np.array([s == GE for s in self.senses], dtype=bool)
        self.sense_eq = np.array([s == EQ for s in self.senses], dtype=bool)
        self._frozen = True

    @property
    def num_rows(self) -> int:
        return len(self.tags)

    def stats(self) -> ModelStats:
        return ModelStats(self.num_rows, self.catalog.size, int(len(self.col_idx)))

    def tag_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for tag in self.tags:
            counts[tag] = counts.get(tag, 0) + 1
        return counts

    def lhs_values(self, x: np.ndarray) -> np.ndarray:
        if self.num_rows == 0:
            return np.zeros(0, dtype=np.int64)
        vals = self.coefs * x[self.col_idx]
        return np.add.reduceat(vals, self.row_ptr[:-1])

    def evaluate(self, x: np.ndarray) -> tuple[bool, list[tuple[str, int, int, str, int]]]:
        """Residual-check every row plus bounds; exact integer verdict."""
        if x.shape != (self.catalog.size,):
            raise ValueError("assignment length does not match the catalog")
        violations: list[tuple[str, int, int, str, int]] = []
        for name, value in self.catalog.check_bounds(x):
            violations.append(("bounds", -1, value, "in", 0))
        lhs = self.lhs_values(x)
        bad = np.zeros(self.num_rows, dtype=bool)
        bad |= self.sense_le & (lhs > self.rhs)
        bad |= self.sense_ge & (lhs < self.rhs)
        bad |= self.sense_eq & (lhs != self.rhs)
        for i in np.nonzero(bad)[0]:
            i = int(i)
            violations.append((self.tags[i], i, int(lhs[i]), self.senses[i], int(self.rhs[i])))
        return (not violations), violations


def _arrival_terms(instance: Instance, node: int, depart_p: int) -> list[tuple[int, int]]:
    """(end node, arrival period) of every in-horizon drive leaving node at p."""
    out = []
    for seg in instance.network.segments_from(node):
        arr = depart_p + seg.travel_time(depart_p) - 1
        if arr <= instance.horizon:
            out.append((seg.end, arr))
    return out


def _departure_terms(instance: Instance, node: int, arrive_p: int) -> list[tuple[int, int]]:
    """(start node, departure period) of every drive that ends at node at p."""
    out = []
    for seg in instance.network.segments_into(node):
        for p in range(1, arrive_p + 1):
            if p + seg.travel_time(p) - 1 == arrive_p:
                out.append((seg.start, p))
    return out


def build_model(instance: Instance) -> CanonicalModel:
    """Expand every trip-wise and trip-connecting constraint into rows.

    The coupling families stay out by design; see
    :func:`coupling_violations`.
    """
    cat = VariableCatalog(instance)
    model = CanonicalModel(instance, cat)
    net = instance.network
    nodes = sorted(n.id for n in net.nodes)
    chargers = net.charger_nodes()
    P, T = instance.horizon, instance.trips
    cap = SOC_CAP_BP
    m_time = P + 1

    max_drop = 0
    max_gain = 0
    for truck in instance.fleet:
        max_gain = max(max_gain, truck.charge_rate * P)
        for seg in net.segments:
            rate = truck.discharge_rate(seg.key, True)
            max_drop = max(max_drop, rate * seg.max_travel_time())
    m_soc = 2 * cap + max_drop + 2 * max_gain
    m_carry = cap

    if T == 0:
        model.freeze()
        return model

    for truck in instance.fleet:
        v = truck.id
        trips = range(1, T + 1)

        # full battery at the home depot before the first departure
        model.add_row("init-soc", {cat.idx("s", v, truck.home_depot, 1): 1}, EQ, cap)

        # availability of the first trip
        model.add_row(
            "eq2",
            {cat.idx("d", v, truck.home_depot, 1): 1, cat.idx("xtrip", v, 1): -m_time},
            GE,
            truck.available - m_time,
            m=m_time,
        )

        for fam, nodeset in (("xd", nodes), ("xa", nodes), ("xcb", chargers), ("xcc", chargers)):
            tagsuf = {"xd": "depart", "xa": "arrive", "xcb": "chargebegin", "xcc": "chargecomplete"}[fam]
            for p in range(1, P + 1):
                for t in trips:
                    terms = {cat.idx(fam, v, n, p, t): 1 for n in nodeset}
                    if terms:
                        model.add_row(f"eq3-{tagsuf}", terms, LE, 1)
            for n in nodeset:
                for t in trips:
                    terms = {cat.idx(fam, v, n, p, t): 1 for p in range(1, P + 1)}
                    model.add_row(f"eq4-{tagsuf}", terms, LE, 1)

        for fam, timevar, nodeset in (
            ("xd", "d", nodes),
            ("xa", "a", nodes),
            ("xcb", "b", chargers),
            ("xcc", "c", chargers),
        ):
            tagsuf = {"xd": "depart", "xa": "arrive", "xcb": "chargebegin", "xcc": "chargecomplete"}[fam]
            for n in nodeset:
                for t in trips:
                    terms = {cat.idx(fam, v, n, p, t): p for p in range(1, P + 1)}
                    terms[cat.idx(timevar, v, n, t)] = -1
                    model.add_row(f"eq5-{tagsuf}", terms, EQ, 0)

        # departure implies a matching arrival, and vice versa
        for n in nodes:
            for p in range(1, P + 1):
                for t in trips:
                    arr_terms = _arrival_terms(instance, n, p)
                    m6 = max(m_time, len(arr_terms) + 1)
                    xd = cat.idx("xd", v, n, p, t)
                    le = {cat.idx("xa", v, e, ap, t): 1 for e, ap in arr_terms}
                    le[xd] = le.get(xd, 0) + m6
                    model.add_row("eq6", le, LE, 1 + m6, m=m6)
                    ge = {cat.idx("xa", v, e, ap, t): 1 for e, ap in arr_terms}
                    ge[xd] = ge.get(xd, 0) - m6
                    model.add_row("eq6", ge, GE, 1 - m6, m=m6)

                    dep_terms = _departure_terms(instance, n, p)
                    m7 = max(m_time, len(dep_terms) + 1)
                    xa = cat.idx("xa", v, n, p, t)
                    le = {cat.idx("xd", v, sn, dp, t): 1 for sn, dp in dep_terms}
                    le[xa] = le.get(xa, 0) + m7
                    model.add_row("eq7", le, LE, 1 + m7, m=m7)
                    ge = {cat.idx("xd", v, sn, dp, t): 1 for sn, dp in dep_terms}
                    ge[xa] = ge.get(xa, 0) - m7
                    model.add_row("eq7", ge, GE, 1 - m7, m=m7)

        # arrival at a non-destination node forces a later departure
        for n in nodes:
            if n in (truck.home_depot, truck.port):
                continue
            for p in range(1, P + 1):
                for t in trips:
                    xa = cat.idx("xa", v, n, p, t)
                    later = {cat.idx("xd", v, n, pp, t): 1 for pp in range(p + 1, P + 1)}
                    le = dict(later)
                    le[xa] = le.get(xa, 0) + m_time
                    model.add_row("eq8", le, LE, 1 + m_time, m=m_time)
                    ge = dict(later)
                    ge[xa] = ge.get(xa, 0) - m_time
                    model.add_row("eq8", ge, GE, 1 - m_time, m=m_time)

        # battery propagation along drives, with charge clipping at the cap
        for seg in net.segments:
            n, e = seg.start, seg.end
            for p in range(1, P + 1):
                arr = p + seg.travel_time(p) - 1
                if arr > P:
                    continue
                for t in trips:
                    for loaded in (True, False):
                        drop = truck.discharge_rate(seg.key, loaded) * seg.travel_time(p)
                        if e in set(chargers):
                            tag = "eq11" if loaded else "eq11-empty"
                        else:
                            tag = "eq9" if loaded else "eq10"
                        xd = cat.idx("xd", v, n, p, t)
                        xa = cat.idx("xa", v, e, arr, t)
                        xld = cat.idx("xld", v, t)
                        core = {
                            cat.idx("s", v, e, t): 1,
                            cat.idx("s", v, n, t): -1,
                            xa: drop,
                        }
                        if e in set(chargers):
                            for pp in range(1, P + 1):
                                core[cat.idx("xc", v, e, pp, t)] = -truck.charge_rate
                            core[cat.idx("ofl", v, e, t)] = 1
                        ld_sign = 1 if loaded else -1
                        rhs_extra = 3 * m_soc if loaded else 2 * m_soc
                        le = dict(core)
                        le[xd] = le.get(xd, 0) + m_soc
                        le[xa] = le.get(xa, 0) + m_soc
                        le[xld] = le.get(xld, 0) + ld_sign * m_soc
                        model.add_row(tag, le, LE, rhs_extra, m=m_soc)
                        ge = dict(core)
                        ge[xd] = ge.get(xd, 0) - m_soc
                        ge[xa] = ge.get(xa, 0) - m_soc
                        ge[xld] = ge.get(xld, 0) - ld_sign * m_soc
                        model.add_row(tag, ge, GE, -rhs_extra, m=m_soc)

        # spill is only available once the battery is pinned at the cap
        spill_cap = truck.charge_rate * P
        for n in chargers:
            for t in trips:
                model.add_row(
                    "soc-spill",
                    {cat.idx("ofl", v, n, t): 1, cat.idx("xfull", v, n, t): -spill_cap},
                    LE,
                    0,
                    m=spill_cap,
                )
                model.add_row(
                    "soc-full",
                    {cat.idx("s", v, n, t): 1, cat.idx("xfull", v, n, t): -cap},
                    GE,
                    0,
                    m=cap,
                )

        # charging window: after arrival (eq12), before departure (eq13)
        for n in chargers:
            for p in range(1, P + 1):
                for t in trips:
                    xc = cat.idx("xc", v, n, p, t)
                    terms = {cat.idx("xa", v, n, pp, t): 1 for pp in range(1, p)}
                    terms[xc] = terms.get(xc, 0) - 1
                    model.add_row("eq12", terms, GE, 0)
                    terms = {cat.idx("xd", v, n, pp, t): -1 for pp in range(1, p + 1)}
                    terms[xc] = terms.get(xc, 0) - 1
                    model.add_row("eq13", terms, GE, -1)

        # charge block begin / complete markers
        for n in chargers:
            for t in trips:
                for p in range(2, P + 1):
                    model.add_row(
                        "eq14",
                        {
                            cat.idx("xcb", v, n, p, t): 1,
                            cat.idx("xc", v, n, p, t): -1,
                            cat.idx("xc", v, n, p - 1, t): 1,
                        },
                        GE,
                        0,
                    )
                    model.add_row(
                        "eq15",
                        {
                            cat.idx("xcc", v, n, p - 1, t): 1,
                            cat.idx("xc", v, n, p - 1, t): -1,
                            cat.idx("xc", v, n, p, t): 1,
                        },
                        GE,
                        0,
                    )
                # a block still open at the horizon closes at P
                model.add_row(
                    "eq15",
                    {cat.idx("xcc", v, n, P, t): 1, cat.idx("xc", v, n, P, t): -1},
                    GE,
                    0,
                )

        # unloading start pinned to the arrival when loaded
        for t in trips:
            demand = instance.corridor_demand(truck, instance.is_outbound(t))
            if demand is None:
                continue
            dest = instance.trip_destination(truck, t)
            u = cat.idx("u", v, t)
            a = cat.idx("a", v, dest, t)
            xld = cat.idx("xld", v, t)
            model.add_row("eq16", {u: 1, a: -1, xld: m_time}, LE, m_time, m=m_time)
            model.add_row("eq16", {u: 1, a: -1, xld: -m_time}, GE, -m_time, m=m_time)

        # trip-connecting timing at the transition node
        for t in range(1, T):
            n_star = instance.trip_destination(truck, t)
            d_next = cat.idx("d", v, n_star, t + 1)
            a_prev = cat.idx("a", v, n_star, t)
            xtrip_next = cat.idx("xtrip", v, t + 1)
            model.add_row(
                "eq17", {d_next: 1, a_prev: -1, xtrip_next: -m_time}, GE, 1 - m_time, m=m_time
            )
            for p in range(1, P + 1):
                model.add_row(
                    "eq18",
                    {d_next: 1, cat.idx("xc", v, n_star, p, t): -(p + 1), xtrip_next: -m_time},
                    GE,
                    -m_time,
                    m=m_time,
                )

        # mandatory departure from the port after an outbound trip
        for t in trips:
            if not instance.is_outbound(t):
                continue
            if t + 1 > T:
                # a final outbound trip would strand the truck at the port
                model.add_row("eq19", {cat.idx("xtrip", v, t): 1}, LE, 0)
                continue
            port = truck.port
            d_next = cat.idx("d", v, port, t + 1)
            a_prev = cat.idx("a", v, port, t)
            xtrip_t = cat.idx("xtrip", v, t)
            model.add_row(
                "eq19", {d_next: 1, a_prev: -1, xtrip_t: -m_time}, GE, 1 - m_time, m=m_time
            )
            for p in range(1, P + 1):
                model.add_row(
                    "eq20",
                    {d_next: 1, cat.idx("xc", v, port, p, t): -(p + 1), xtrip_t: -m_time},
                    GE,
                    -m_time,
                    m=m_time,
                )

        # battery carry-over between consecutive trips at the transition node
        for t in range(1, T):
            n_star = instance.trip_destination(truck, t)
            s_next = cat.idx("s", v, n_star, t + 1)
            s_prev = cat.idx("s", v, n_star, t)
            if instance.is_outbound(t):
                tag, gate = "eq22", cat.idx("xtrip", v, t)
            else:
                tag, gate = "eq21", cat.idx("xtrip", v, t + 1)
            model.add_row(tag, {s_next: 1, s_prev: -1, gate: m_carry}, LE, m_carry, m=m_carry)
            model.add_row(tag, {s_next: 1, s_prev: -1, gate: -m_carry}, GE, -m_carry, m=m_carry)

        # loading requires the trip; trips form a contiguous prefix
        for t in trips:
            model.add_row(
                "eq23", {cat.idx("xld", v, t): 1, cat.idx("xtrip", v, t): -1}, LE, 0
            )
        for t in range(1, T):
            model.add_row(
                "eq24",
                {cat.idx("xtrip", v, t + 1): 1, cat.idx("xtrip", v, t): -1},
                LE,
                0,
            )

        # latest unloading per product and latest depot arrival
        for t in trips:
            demand = instance.corridor_demand(truck, instance.is_outbound(t))
            if demand is not None:
                model.add_row(
                    "eq28",
                    {cat.idx("ubar", demand.product): 1, cat.idx("u", v, t): -1},
                    GE,
                    0,
                )
            model.add_row(
                "eq31",
                {cat.idx("abar", v): 1, cat.idx("a", v, truck.home_depot, t): -1},
                GE,
                0,
            )

    for demand in instance.demands:
        model.add_row(
            "eq29",
            {cat.idx("ubar", demand.product): 1, cat.idx("tard", demand.product): -1},
            LE,
            demand.due,
        )

    model.freeze()
    return model


# ---------------------------------------------------------------------------
# Schedule -> complete assignment
# ---------------------------------------------------------------------------


def assignment_from_solution(
    instance: Instance, catalog: VariableCatalog, solution: Solution
) -> np.ndarray:
    """Materialize every catalog variable from event-level schedules."""
    x = catalog.zeros()
    cap = SOC_CAP_BP
    latest = latest_unload_times(instance, solution)

    for sched in solution.schedules:
        truck = instance.truck(sched.truck_id)
        v = truck.id
        profile = soc_profile(instance, truck, sched)

        for trip in sched.trips:
            t = trip.index
            x[catalog.idx("xtrip", v, t)] = 1
            if trip.loaded:
                x[catalog.idx("xld", v, t)] = 1
            for leg in trip.legs:
                x[catalog.idx("xd", v, leg.start, leg.depart, t)] = 1
                x[catalog.idx("xa", v, leg.end, leg.arrive, t)] = 1
                x[catalog.idx("d", v, leg.start, t)] = leg.depart
                x[catalog.idx("a", v, leg.end, t)] = leg.arrive
            blocks: dict[int, list[int]] = {}
            for node, period in trip.charges:
                x[catalog.idx("xc", v, node, period, t)] = 1
                blocks.setdefault(node, []).append(period)
            for node, periods in blocks.items():
                begin, complete = min(periods), max(periods)
                x[catalog.idx("xcb", v, node, begin, t)] = 1
                x[catalog.idx("xcc", v, node, complete, t)] = 1
                x[catalog.idx("b", v, node, t)] = begin
                x[catalog.idx("c", v, node, t)] = complete
            if trip.loaded and catalog.has("u", v, t):
                x[catalog.idx("u", v, t)] = trip.arrival

        if sched.num_trips > 0:
            x[catalog.idx("abar", v)] = max(
                (trip.arrival for trip in sched.trips if trip.destination == truck.home_depot),
                default=0,
            )

        soc_prev = {n.id: cap for n in instance.network.nodes}
        for t in range(1, instance.trips + 1):
            for n in (node.id for node in instance.network.nodes):
                point = profile.get((t, n))
                if point is not None:
                    x[catalog.idx("s", v, n, t)] = point.soc
                    soc_prev[n] = point.soc
                    if catalog.has("ofl", v, n, t):
                        x[catalog.idx("ofl", v, n, t)] = point.spill
                        x[catalog.idx("xfull", v, n, t)] = 1 if point.spill > 0 else 0
                else:
                    x[catalog.idx("s", v, n, t)] = soc_prev[n]

    for demand in instance.demands:
        ubar = latest[demand.product]
        x[catalog.idx("ubar", demand.product)] = ubar
        x[catalog.idx("tard", demand.product)] = max(0, ubar - demand.due)

    return x


# ---------------------------------------------------------------------------
# MPS export (free format) for third-party cross-checks
# ---------------------------------------------------------------------------


def write_mps(model: CanonicalModel, path) -> None:
    """Free-format MPS dump of the canonical system plus the cost row.

    Coupling constraints are included here (unlike the in-memory model)
    so an external solver sees the complete problem on tiny instances.
    """
    instance = model.instance
    cat = model.catalog
    space = coupling_space(instance)

    obj: dict[int, float] = {}
    for truck in instance.fleet:
        if instance.trips == 0:
            break
        obj[cat.idx("abar", truck.id)] = instance.labor_cost
        obj[cat.idx("d", truck.id, truck.home_depot, 1)] = -instance.labor_cost
        for n in instance.network.charger_nodes():
            site = instance.network.charger_at(n)
            for p in instance.periods:
                for t in instance.trip_range:
                    idx = cat.idx("xc", truck.id, n, p, t)
                    price = site.price_at(p)
                    if price:
                        obj[idx] = obj.get(idx, 0.0) + price
    for demand in instance.demands:
        obj[cat.idx("tard", demand.product)] = demand.penalty

    rows: list[str] = ["NAME JRC", "ROWS", " N COST"]
    row_names = [f"R{i}_{model.tags[i].replace('-', '_')}" for i in range(model.num_rows)]
    sense_map = {LE: "L", GE: "G", EQ: "E"}
    for i, name in enumerate(row_names):
        rows.append(f" {sense_map[model.senses[i]]} {name}")

    coupling_rows: list[tuple[str, str, dict[int, int], int]] = []
    for demand in instance.demands:
        terms: dict[int, int] = {}
        for truck in instance.fleet:
            for t in instance.trip_range:
                if instance.corridor_demand(truck, instance.is_outbound(t)) == demand:
                    idx = cat.idx("xld", truck.id, t)
                    terms[idx] = terms.get(idx, 0) + 1
        if terms:
            coupling_rows.append((f"DEM_{demand.product}", "E", terms, demand.quantity))
    for node, period in space.capacity_keys:
        terms = {}
        for truck in instance.fleet:
            for t in instance.trip_range:
                idx = cat.idx("xc", truck.id, node, period, t)
                terms[idx] = 1
        site = instance.network.charger_at(node)
        if terms:
            coupling_rows.append((f"CAP_{node}_{period}", "L", terms, site.count))
    for name, sense, _terms, _rhs in coupling_rows:
        rows.append(f" {sense} {name}")

    by_col: dict[int, list[tuple[str, float]]] = {}
    for i in range(model.num_rows):
        for k in range(model.row_ptr[i], model.row_ptr[i + 1]):
            by_col.setdefault(int(model.col_idx[k]), []).append((row_names[i], float(model.coefs[k])))
    for name, _sense, terms, _rhs in coupling_rows:
        for col, coef in terms.items():
            by_col.setdefault(col, []).append((name, float(coef)))
    for col, coef in obj.items():
        by_col.setdefault(col, []).append(("COST", float(coef)))

    lines = rows
    lines.append("COLUMNS")
    lines.append(" MARKER MARKER 'MARKER' 'INTORG'")
    for col in range(cat.size):
        entries = by_col.get(col)
        if not entries:
            continue
        cname = cat.name_of(col)
        for rname, coef in entries:
            lines.append(f" {cname} {rname} {coef:.17g}")
    lines.append(" MARKER MARKER 'MARKER' 'INTEND'")
    lines.append("RHS")
    for i, name in enumerate(row_names):
        if model.rhs[i]:
            lines.append(f" RHS {name} {int(model.rhs[i])}")
    for name, _sense, _terms, rhs in coupling_rows:
        if rhs:
            lines.append(f" RHS {name} {rhs}")
    lines.append("BOUNDS")
    for col in range(cat.size):
        cname = cat.name_of(col)
        if cat.binary[col]:
            lines.append(f" BV BND {cname}")
        else:
            lines.append(f" LI BND {cname} {int(cat.lb[col])}")
            lines.append(f" UI BND {cname} {int(cat.ub[col])}")
    lines.append("ENDATA")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
