"""Road network model.

Geometry is a grid of four-way intersections.  Boundary approaches connect to
virtual intersections that only source and sink traffic.  Every directed road
carries three movement lanes (through / left / right, selected by the turn the
vehicle will take at the road's end).  Signal phases and movements follow
right-hand traffic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

NETWORK_SCHEMA_VERSION = "1"


class SignalPhase(IntEnum):
    """Canonical phase order; indices are fixed across the whole package."""

    ETWT = 0  # east + west through
    NTST = 1  # north + south through
    ELWL = 2  # east + west left
    NLSL = 3  # north + south left


PHASES = tuple(SignalPhase)
PHASE_NAMES = tuple(p.name for p in PHASES)

APPROACHES = ("E", "W", "N", "S")
MOVEMENTS = ("through", "left", "right")

# (approach, movement) pairs released by each phase; right turns are always
# permitted and never appear here.
PHASE_MOVEMENTS: dict[SignalPhase, tuple[tuple[str, str], tuple[str, str]]] = {
    SignalPhase.ETWT: (("E", "through"), ("W", "through")),
    SignalPhase.NTST: (("N", "through"), ("S", "through")),
    SignalPhase.ELWL: (("E", "left"), ("W", "left")),
    SignalPhase.NLSL: (("N", "left"), ("S", "left")),
}

# The eight signal-controlled lanes of an intersection in canonical feature
# order (phase order, two lanes per phase).
CONTROLLED_LANE_ORDER: tuple[tuple[str, str], ...] = tuple(
    pair for phase in PHASES for pair in PHASE_MOVEMENTS[phase]
)

OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
LEFT_OF = {"N": "W", "W": "S", "S": "E", "E": "N"}   # counterclockwise
RIGHT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}  # clockwise
GRID_DELTA = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}  # (row, col)

DIRECTION_WORDS = {"E": "East", "W": "West", "N": "North", "S": "South"}


class NetworkError(ValueError):
    pass


def exit_heading(approach: str, movement: str) -> str:
    """Compass heading a vehicle leaves on, given where it came from."""
    heading = OPPOSITE[approach]
    if movement == "through":
        return heading
    if movement == "left":
        return LEFT_OF[heading]
    if movement == "right":
        return RIGHT_OF[heading]
    raise NetworkError(f"unknown movement {movement!r}")


@dataclass(frozen=True)
class Intersection:
    id: str
    row: int
    col: int
    virtual: bool


@dataclass(frozen=True)
class Lane:
    id: str
    from_id: str
    to_id: str
    approach: str  # side of to_id the traffic arrives from
    movement: str  # turn taken at to_id
    length_m: float


@dataclass
class RoadNetwork:
    intersections: list[Intersection]
    lanes: list[Lane]
    # adjacency[i][d] = id of i's neighbour in compass direction d
    adjacency: dict[str, dict[str, str]]

    by_id: dict[str, Intersection] = field(init=False, repr=False)
    lane_by_id: dict[str, Lane] = field(init=False, repr=False)
    lane_index: dict[str, int] = field(init=False, repr=False)
    real_ids: list[str] = field(init=False, repr=False)
    # incoming[i][(approach, movement)] = lane id, for real intersections
    incoming: dict[str, dict[tuple[str, str], str]] = field(init=False, repr=False)

    def __post_init__(self):
        self.by_id = {i.id: i for i in self.intersections}
        if len(self.by_id) != len(self.intersections):
            raise NetworkError("duplicate intersection ids")
        self.lane_by_id = {l.id: l for l in self.lanes}
        if len(self.lane_by_id) != len(self.lanes):
            raise NetworkError("duplicate lane ids")
        self.lane_index = {l.id: k for k, l in enumerate(self.lanes)}
        real = [i for i in self.intersections if not i.virtual]
        real.sort(key=lambda i: (i.row, i.col))
        self.real_ids = [i.id for i in real]
        self.incoming = {i: {} for i in self.real_ids}
        for lane in self.lanes:
            tgt = self.by_id.get(lane.to_id)
            if tgt is not None and not tgt.virtual:
                key = (lane.approach, lane.movement)
                if key in self.incoming[lane.to_id]:
                    raise NetworkError(f"{lane.to_id}: duplicate incoming lane for {key}")
                self.incoming[lane.to_id][key] = lane.id
        self.validate()

    def validate(self) -> None:
        for lane in self.lanes:
            if lane.from_id not in self.by_id or lane.to_id not in self.by_id:
                raise NetworkError(f"lane {lane.id} references unknown intersections")
            if lane.length_m <= 0:
                raise NetworkError(f"lane {lane.id} has non-positive length")
            if lane.approach not in APPROACHES or lane.movement not in MOVEMENTS:
                raise NetworkError(f"lane {lane.id} has bad approach/movement")
        for iid in self.real_ids:
            got = self.incoming[iid]
            if len(got) != 12:
                raise NetworkError(f"{iid}: expected 12 incoming lanes, found {len(got)}")
        for a, nbrs in self.adjacency.items():
            for d, b in nbrs.items():
                if d not in APPROACHES:
                    raise NetworkError(f"bad direction {d!r} in adjacency of {a}")
                if b not in self.by_id:
                    raise NetworkError(f"adjacency of {a} references unknown {b}")
                back = self.adjacency.get(b, {}).get(OPPOSITE[d])
                if back != a:
                    raise NetworkError(f"adjacency not symmetric between {a} and {b}")

    # -- route helpers -------------------------------------------------------

    def next_hop(self, lane: Lane) -> str | None:
        """Intersection a vehicle heads to after finishing ``lane``."""
        out_dir = exit_heading(lane.approach, lane.movement)
        return self.adjacency.get(lane.to_id, {}).get(out_dir)

    def validate_route(self, route: list[str]) -> None:
        if not route:
            raise NetworkError("empty route")
        for lane_id in route:
            if lane_id not in self.lane_by_id:
                raise NetworkError(f"route references unknown lane {lane_id!r}")
        for a_id, b_id in zip(route, route[1:]):
            a = self.lane_by_id[a_id]
            b = self.lane_by_id[b_id]
            if b.from_id != a.to_id:
                raise NetworkError(f"route breaks at {a_id} -> {b_id}: lanes do not connect")
            expected_to = self.next_hop(a)
            if expected_to is None or b.to_id != expected_to:
                raise NetworkError(
                    f"route breaks at {a_id} -> {b_id}: a {a.movement} turn at {a.to_id} "
                    f"leads to {expected_to}, not {b.to_id}"
                )

    def real_neighbors(self, iid: str) -> dict[str, str]:
        """Non-virtual neighbours by direction."""
        out = {}
        for d, n in self.adjacency.get(iid, {}).items():
            if not self.by_id[n].virtual:
                out[d] = n
        return out


def lane_id(from_id: str, to_id: str, movement: str) -> str:
    return f"{from_id}->{to_id}:{movement}"


def build_grid_network(rows: int, cols: int, lane_length_m: float = 300.0) -> RoadNetwork:
    """Rows x cols grid of real intersections ringed by virtual ones."""
    if rows < 1 or cols < 1:
        raise NetworkError("grid needs at least 1x1")
    if lane_length_m <= 0:
        raise NetworkError("lane length must be positive")

    intersections: list[Intersection] = []
    by_pos: dict[tuple[int, int], str] = {}
    for r in range(rows):
        for c in range(cols):
            iid = f"i_{r}_{c}"
            intersections.append(Intersection(iid, r, c, virtual=False))
            by_pos[(r, c)] = iid

    adjacency: dict[str, dict[str, str]] = {i.id: {} for i in intersections}
    virtuals: dict[tuple[int, int], str] = {}
    for r in range(rows):
        for c in range(cols):
            iid = by_pos[(r, c)]
            for d, (dr, dc) in GRID_DELTA.items():
                pos = (r + dr, c + dc)
                if pos in by_pos:
                    adjacency[iid][d] = by_pos[pos]
                else:
                    vid = virtuals.get(pos)
                    if vid is None:
                        vid = f"v_{pos[0]}_{pos[1]}"
                        virtuals[pos] = vid
                        intersections.append(Intersection(vid, pos[0], pos[1], virtual=True))
                        adjacency[vid] = {}
                    adjacency[iid][d] = vid
                    adjacency[vid][OPPOSITE[d]] = iid

    lanes: list[Lane] = []
    for b in intersections:
        for d, a_id in sorted(adjacency[b.id].items()):
            # directed road a -> b; traffic arrives at b from side d
            for movement in MOVEMENTS:
                lanes.append(Lane(lane_id(a_id, b.id, movement), a_id, b.id, d, movement, lane_length_m))

    return RoadNetwork(intersections, lanes, adjacency)


# -- serialization -----------------------------------------------------------


def network_to_dict(net: RoadNetwork) -> dict:
    return {
        "schema_version": NETWORK_SCHEMA_VERSION,
        "intersections": [
            {"id": i.id, "row": i.row, "col": i.col, "virtual": i.virtual}
            for i in net.intersections
        ],
        "lanes": [
            {
                "id": l.id,
                "from": l.from_id,
                "to": l.to_id,
                "approach": l.approach,
                "movement": l.movement,
                "length_m": l.length_m,
            }
            for l in net.lanes
        ],
        "adjacency": net.adjacency,
    }


def network_from_dict(doc: dict) -> RoadNetwork:
    version = doc.get("schema_version")
    if version != NETWORK_SCHEMA_VERSION:
        raise NetworkError(f"unsupported network schema_version {version!r}")
    try:
        intersections = [
            Intersection(d["id"], int(d["row"]), int(d["col"]), bool(d["virtual"]))
            for d in doc["intersections"]
        ]
        lanes = [
            Lane(d["id"], d["from"], d["to"], d["approach"], d["movement"], float(d["length_m"]))
            for d in doc["lanes"]
        ]
        adjacency = {k: dict(v) for k, v in doc["adjacency"].items()}
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network document: {exc}") from exc
    return RoadNetwork(intersections, lanes, adjacency)


def save_network(net: RoadNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1))


def load_network(path) -> RoadNetwork:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON: {exc}") from exc
    return network_from_dict(doc)
