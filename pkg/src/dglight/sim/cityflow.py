"""Importer for the CityFlow roadnet/flow JSON subset used by grid benchmarks.

Supported: four-way grids with virtual boundary intersections, straight roads
whose compass direction is read off their endpoint coordinates, and flow files
whose routes are road-id sequences.  Per-road lane counts are normalized to
the three movement lanes this simulator models; traffic-light plans and
vehicle dynamics parameters in the input are ignored.  Every normalization
emits a warning string.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .flow import FlowEntry, FlowSpec
from .network import (
    Intersection,
    Lane,
    LEFT_OF,
    NetworkError,
    OPPOSITE,
    RIGHT_OF,
    RoadNetwork,
    lane_id,
)


def _road_heading(points: list[dict]) -> str:
    """Compass heading of a road from its first to last point (y grows north)."""
    if len(points) < 2:
        raise NetworkError("road with fewer than 2 points")
    dx = points[-1]["x"] - points[0]["x"]
    dy = points[-1]["y"] - points[0]["y"]
    if abs(dx) >= abs(dy):
        return "E" if dx > 0 else "W"
    return "N" if dy > 0 else "S"


def _polyline_length(points: list[dict]) -> float:
    total = 0.0
    for a, b in zip(points, points[1:]):
        total += math.hypot(b["x"] - a["x"], b["y"] - a["y"])
    return total


def _turn_movement(h_in: str, h_out: str) -> str:
    if h_in == h_out:
        return "through"
    if LEFT_OF[h_in] == h_out:
        return "left"
    if RIGHT_OF[h_in] == h_out:
        return "right"
    raise NetworkError(f"unsupported U-turn ({h_in} -> {h_out})")


def import_roadnet(path) -> tuple[RoadNetwork, dict[str, list[str]], list[str]]:
    """Parse a CityFlow roadnet file.

    Returns (network, road_id -> [lane ids in movement order], warnings).
    """
    warnings: list[str] = []
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON: {exc}") from exc

    try:
        raw_inters = doc["intersections"]
        raw_roads = doc["roads"]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"{path}: missing roadnet sections: {exc}") from exc

    if any(i.get("trafficLight") for i in raw_inters):
        warnings.append("trafficLight plans present in roadnet; ignored (signals are simulated natively)")

    # grid coordinates from coordinate ranks: columns grow east, rows grow south
    xs = sorted({round(i["point"]["x"], 3) for i in raw_inters})
    ys = sorted({round(i["point"]["y"], 3) for i in raw_inters}, reverse=True)
    col_of = {x: c for c, x in enumerate(xs)}
    row_of = {y: r for r, y in enumerate(ys)}

    intersections = [
        Intersection(
            i["id"],
            row_of[round(i["point"]["y"], 3)],
            col_of[round(i["point"]["x"], 3)],
            bool(i.get("virtual", False)),
        )
        for i in raw_inters
    ]
    by_id = {i.id: i for i in intersections}

    adjacency: dict[str, dict[str, str]] = {i.id: {} for i in intersections}
    lanes: list[Lane] = []
    road_lanes: dict[str, list[str]] = {}
    seen_lane_counts: set[int] = set()

    for road in raw_roads:
        a = road["startIntersection"]
        b = road["endIntersection"]
        if a not in by_id or b not in by_id:
            raise NetworkError(f"road {road['id']} references unknown intersections")
        heading = _road_heading(road["points"])
        length = _polyline_length(road["points"])
        approach = OPPOSITE[heading]  # side of b the traffic arrives from
        existing = adjacency[b].get(approach)
        if existing is not None and existing != a:
            raise NetworkError(f"two roads arrive at {b} from the {approach} side")
        adjacency[b][approach] = a
        adjacency[a][heading] = b
        n_in = len(road.get("lanes", []))
        if n_in and n_in != 3:
            seen_lane_counts.add(n_in)
        ids = []
        for movement in ("through", "left", "right"):
            lid = lane_id(a, b, movement)
            lanes.append(Lane(lid, a, b, approach, movement, length))
            ids.append(lid)
        road_lanes[road["id"]] = ids

    if seen_lane_counts:
        warnings.append(
            f"per-road lane counts {sorted(seen_lane_counts)} normalized to 3 movement lanes"
        )

    net = RoadNetwork(intersections, lanes, adjacency)
    return net, road_lanes, warnings


def import_flow(path, net: RoadNetwork, road_lanes: dict[str, list[str]]) -> tuple[FlowSpec, list[str]]:
    """Parse a CityFlow flow file against an imported roadnet."""
    warnings: list[str] = []
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise NetworkError(f"{path}: flow file must be a JSON array")

    if any("vehicle" in e and e["vehicle"].get("maxSpeed") for e in doc):
        warnings.append("vehicle dynamics parameters in flow file ignored (fixed kinematics)")

    # movement on road k is the turn taken onto road k+1
    road_by_id = {}
    for e in doc:
        for rid in e.get("route", []):
            road_by_id[rid] = None
    for rid in road_by_id:
        if rid not in road_lanes:
            raise NetworkError(f"flow references unknown road {rid!r}")

    lane_headings = {}
    for rid, ids in road_lanes.items():
        first = net.lane_by_id[ids[0]]
        lane_headings[rid] = OPPOSITE[first.approach]

    entries: list[FlowEntry] = []
    for k, e in enumerate(doc):
        try:
            roads = list(e["route"])
            interval = float(e["interval"])
            start = float(e.get("startTime", 0))
            end = float(e.get("endTime", start))
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(f"flow entry {k}: malformed: {exc}") from exc
        if end < 0:  # CityFlow uses -1 for "forever"; cap later via horizon
            raise NetworkError(f"flow entry {k}: open-ended endTime not supported")
        route_lanes = []
        for rid, nxt in zip(roads, roads[1:]):
            movement = _turn_movement(lane_headings[rid], lane_headings[nxt])
            route_lanes.append(road_lanes[rid][("through", "left", "right").index(movement)])
        route_lanes.append(road_lanes[roads[-1]][0])  # leave straight on the last road
        entries.append(FlowEntry(tuple(route_lanes), start, end, interval))

    flow = FlowSpec(entries)
    flow.validate(net)
    return flow, warnings


def import_cityflow(roadnet_path, flow_path) -> tuple[RoadNetwork, FlowSpec, list[str]]:
    net, road_lanes, w1 = import_roadnet(roadnet_path)
    flow, w2 = import_flow(flow_path, net, road_lanes)
    return net, flow, w1 + w2
