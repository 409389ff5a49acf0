"""Demand description: periodic vehicle arrivals along fixed lane routes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..seeding import rng_from
from .network import NetworkError, RoadNetwork, exit_heading, lane_id

FLOW_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class FlowEntry:
    route: tuple[str, ...]  # lane ids, entry lane first
    start_time: float
    end_time: float
    headway_s: float

    def arrival_times(self) -> list[float]:
        times = []
        t = self.start_time
        # small tolerance so end times that are exact multiples stay included
        while t <= self.end_time + 1e-9:
            times.append(t)
            t += self.headway_s
        return times


@dataclass
class FlowSpec:
    entries: list[FlowEntry]

    def validate(self, net: RoadNetwork) -> None:
        for k, e in enumerate(self.entries):
            if e.headway_s <= 0:
                raise NetworkError(f"flow entry {k}: headway must be positive")
            if e.end_time < e.start_time or e.start_time < 0:
                raise NetworkError(f"flow entry {k}: bad time window")
            try:
                net.validate_route(list(e.route))
            except NetworkError as exc:
                raise NetworkError(f"flow entry {k}: {exc}") from exc


def flow_to_dict(flow: FlowSpec) -> dict:
    return {
        "schema_version": FLOW_SCHEMA_VERSION,
        "entries": [
            {
                "route": list(e.route),
                "start_time": e.start_time,
                "end_time": e.end_time,
                "headway_s": e.headway_s,
            }
            for e in flow.entries
        ],
    }


def flow_from_dict(doc: dict) -> FlowSpec:
    version = doc.get("schema_version")
    if version != FLOW_SCHEMA_VERSION:
        raise NetworkError(f"unsupported flow schema_version {version!r}")
    try:
        entries = [
            FlowEntry(tuple(d["route"]), float(d["start_time"]), float(d["end_time"]), float(d["headway_s"]))
            for d in doc["entries"]
        ]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed flow document: {exc}") from exc
    return FlowSpec(entries)


def save_flow(flow: FlowSpec, path) -> None:
    Path(path).write_text(json.dumps(flow_to_dict(flow), indent=1))


def load_flow(path) -> FlowSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON: {exc}") from exc
    return flow_from_dict(doc)


# -- synthetic demand ----------------------------------------------------------


def _walk_route(net: RoadNetwork, entry_virtual: str, first_real: str, rng, turn_probs) -> tuple[str, ...]:
    """Random route from a boundary entry until the walk leaves the grid.

    Turns are sampled per intersection; after a step cap the walk goes
    straight, which on a grid is guaranteed to reach the boundary.
    """
    movements = ("through", "left", "right")
    route: list[str] = []
    src, dst = entry_virtual, first_real
    for step in range(64):
        if net.by_id[dst].virtual:
            route.append(lane_id(src, dst, "through"))
            return tuple(route)
        movement = movements[rng.choice(3, p=turn_probs)] if step < 24 else "through"
        route.append(lane_id(src, dst, movement))
        lane = net.lane_by_id[route[-1]]
        out_dir = exit_heading(lane.approach, movement)
        nxt = net.adjacency[dst].get(out_dir)
        if nxt is None:
            raise NetworkError(f"synthetic route walked off the network at {dst}")
        src, dst = dst, nxt
    raise NetworkError("synthetic route failed to terminate")


def synthetic_flow(
    net: RoadNetwork,
    seed: int,
    horizon_s: float = 3600.0,
    ew_rate_vph: float = 600.0,
    ns_rate_vph: float = 240.0,
    turn_probs: tuple[float, float, float] = (0.7, 0.15, 0.15),
    routes_per_entry: int = 3,
) -> FlowSpec:
    """Seeded demand over every boundary entry.

    East/west entries get ``ew_rate_vph`` vehicles per hour, north/south ones
    ``ns_rate_vph``, split evenly over ``routes_per_entry`` random-walk routes
    with the given through/left/right mix.
    """
    if abs(sum(turn_probs) - 1.0) > 1e-9:
        raise NetworkError("turn probabilities must sum to 1")
    entries: list[FlowEntry] = []
    virtuals = [i for i in net.intersections if i.virtual]
    virtuals.sort(key=lambda i: (i.row, i.col))
    for v in virtuals:
        nbrs = net.adjacency.get(v.id, {})
        if len(nbrs) != 1:
            raise NetworkError(f"virtual {v.id} should touch exactly one intersection")
        (direction_to_real,) = nbrs
        first_real = nbrs[direction_to_real]
        # the entry sits on the real intersection's E/W side iff traffic runs east-west
        approach_at_real = {"N": "S", "S": "N", "E": "W", "W": "E"}[direction_to_real]
        rate = ew_rate_vph if approach_at_real in ("E", "W") else ns_rate_vph
        if rate <= 0:
            continue
        rng = rng_from(seed, "flow", v.id)
        headway = 3600.0 / (rate / routes_per_entry)
        for j in range(routes_per_entry):
            route = _walk_route(net, v.id, first_real, rng, turn_probs)
            start = round(float(rng.uniform(0.0, min(headway, 30.0))), 1)
            entries.append(FlowEntry(route, start, horizon_s, headway))
    flow = FlowSpec(entries)
    flow.validate(net)
    return flow
