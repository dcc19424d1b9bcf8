"""Per-truck schedules and fleet solutions.

A schedule is the event-level description of what one truck does: a
contiguous prefix of trips, each a simple path from its origin to its
destination with optional charging stops.  Battery state is never stored
redundantly; :func:`soc_profile` recomputes it from rates with the
charge-clipping rule (state of charge saturates at the cap and the
overflow of the final charging period is lost).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .instance import SOC_CAP_BP, Instance, Truck


@dataclass(frozen=True)
class Leg:
    start: int
    end: int
    depart: int
    arrive: int


@dataclass(frozen=True)
class TripPlan:
    index: int
    loaded: bool
    legs: tuple[Leg, ...]
    charges: tuple[tuple[int, int], ...]  # (node, period), sorted

    @property
    def origin(self) -> int:
        return self.legs[0].start

    @property
    def destination(self) -> int:
        return self.legs[-1].end

    @property
    def departure(self) -> int:
        return self.legs[0].depart

    @property
    def arrival(self) -> int:
        return self.legs[-1].arrive

    def charge_periods_at(self, node: int) -> list[int]:
        return [p for n, p in self.charges if n == node]


@dataclass(frozen=True)
class TruckSchedule:
    truck_id: int
    trips: tuple[TripPlan, ...] = ()

    @property
    def num_trips(self) -> int:
        return len(self.trips)

    @property
    def first_departure(self) -> int:
        return self.trips[0].departure if self.trips else 0

    @property
    def last_arrival(self) -> int:
        return self.trips[-1].arrival if self.trips else 0

    def charge_events(self) -> Iterator[tuple[int, int, int]]:
        """Yield (node, period, trip index) for every charging period."""
        for trip in self.trips:
            for node, period in trip.charges:
                yield node, period, trip.index

    def loaded_trips(self) -> Iterator[TripPlan]:
        return (t for t in self.trips if t.loaded)


def empty_schedule(truck_id: int) -> TruckSchedule:
    return TruckSchedule(truck_id=truck_id)


@dataclass(frozen=True)
class Solution:
    """One schedule per truck, aligned with the instance fleet order."""

    schedules: tuple[TruckSchedule, ...]

    def schedule_for(self, truck_id: int) -> TruckSchedule:
        for sched in self.schedules:
            if sched.truck_id == truck_id:
                return sched
        raise KeyError(f"no schedule for truck {truck_id}")

    def replace(self, sched: TruckSchedule) -> "Solution":
        return Solution(
            tuple(sched if s.truck_id == sched.truck_id else s for s in self.schedules)
        )

    def trucks_used(self) -> int:
        return sum(1 for s in self.schedules if s.num_trips > 0)


def empty_solution(instance: Instance) -> Solution:
    return Solution(tuple(empty_schedule(t.id) for t in instance.fleet))


@dataclass(frozen=True)
class SocPoint:
    soc: int       # basis points after any charging at the node
    spill: int     # charge offered beyond the cap (lost to clipping)


def soc_profile(
    instance: Instance, truck: Truck, sched: TruckSchedule
) -> dict[tuple[int, int], SocPoint]:
    """Battery state per (trip, node) visited, incl. trip origins.

    Charging at a node is billed to the trip during which the truck
    arrived there, so a trip's profile covers its intermediate stops and
    its destination; the origin value is carried over from the previous
    trip (full battery before the first departure).
    """
    profile: dict[tuple[int, int], SocPoint] = {}
    soc = SOC_CAP_BP
    for trip in sched.trips:
        profile[(trip.index, trip.origin)] = profile.get(
            (trip.index - 1, trip.origin), SocPoint(soc, 0)
        )
        soc = profile[(trip.index, trip.origin)].soc
        for leg in trip.legs:
            seg = instance.network.segment(leg.start, leg.end)
            duration = leg.arrive - leg.depart + 1
            soc -= truck.discharge_rate(seg.key, trip.loaded) * duration
            gain = truck.charge_rate * len(trip.charge_periods_at(leg.end))
            unclipped = soc + gain
            soc = min(SOC_CAP_BP, unclipped)
            profile[(trip.index, leg.end)] = SocPoint(soc, unclipped - soc)
    return profile


def schedule_span(sched: TruckSchedule) -> int:
    """Periods between first departure and last arrival (labor span)."""
    if not sched.trips:
        return 0
    return sched.last_arrival - sched.first_departure


# ---------------------------------------------------------------------------
# JSON serialization (schema jrc-solution/1)
# ---------------------------------------------------------------------------

SOLUTION_SCHEMA_ID = "jrc-solution/1"


def solution_to_json_dict(solution: Solution) -> dict:
    return {
        "schema": SOLUTION_SCHEMA_ID,
        "schedules": [
            {
                "truck": sched.truck_id,
                "trips": [
                    {
                        "t": trip.index,
                        "loaded": trip.loaded,
                        "legs": [[l.start, l.end, l.depart, l.arrive] for l in trip.legs],
                        "charges": [[n, p] for n, p in trip.charges],
                    }
                    for trip in sched.trips
                ],
            }
            for sched in solution.schedules
        ],
    }


def solution_from_json_dict(data: dict) -> Solution:
    if data.get("schema") != SOLUTION_SCHEMA_ID:
        raise ValueError(f"unsupported schema {data.get('schema')!r}")
    schedules = []
    for entry in data["schedules"]:
        trips = []
        for t in entry["trips"]:
            trips.append(
                TripPlan(
                    index=t["t"],
                    loaded=t["loaded"],
                    legs=tuple(Leg(*leg) for leg in t["legs"]),
                    charges=tuple((n, p) for n, p in t["charges"]),
                )
            )
        schedules.append(TruckSchedule(truck_id=entry["truck"], trips=tuple(trips)))
    return Solution(tuple(schedules))
