"""Intersection observations and queue summaries.

Queued means speed below the config threshold on a lane feeding a real
intersection.  Moving vehicles are bucketed into three equal segments by
distance to the stop line (segment 1 nearest).
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import APPROACHES, CONTROLLED_LANE_ORDER, SignalPhase
from .state import SimState, VEH_ACTIVE


@dataclass(frozen=True)
class LaneObs:
    queued: int
    segments: tuple[int, int, int]  # moving vehicles, nearest third first


@dataclass(frozen=True)
class IntersectionObservation:
    intersection: str
    phase: SignalPhase
    # the eight signal-controlled lanes, keyed by (approach, movement)
    lanes: dict[tuple[str, str], LaneObs]
    # vehicles at each real neighbour heading here; None for virtual neighbours
    neighbor_incoming: dict[str, int | None]


def _lane_obs(state: SimState, lane_idx: int) -> LaneObs:
    cfg = state.config
    cap = state.lane_cap
    head = state.lane_head[lane_idx]
    cnt = state.lane_cnt[lane_idx]
    length = state.lane_len[lane_idx]
    third = length / 3.0
    queued = 0
    segments = [0, 0, 0]
    for j in range(cnt):
        vid = state.lane_q[lane_idx, (head + j) % cap]
        if state.veh_speed[vid] < cfg.queue_speed_mps:
            queued += 1
        else:
            dist = length - state.veh_pos[vid]
            seg = int(dist / third)
            if seg > 2:
                seg = 2
            segments[seg] += 1
    return LaneObs(queued, tuple(segments))


def _heading_counts(state: SimState) -> dict[tuple[int, int], int]:
    """count[(x, y)] = vehicles on x's incoming lanes whose next lane goes x -> y."""
    counts: dict[tuple[int, int], int] = {}
    routes_flat = state.routes_flat
    route_off = state.route_off
    for vid in state.active_vehicle_ids():
        li = state.veh_lane[vid]
        x = state.lane_to_idx[li]
        if x < 0:
            continue
        r = state.veh_route[vid]
        roff = route_off[r]
        rp = state.veh_rpos[vid]
        if roff + rp + 1 >= route_off[r + 1]:
            continue  # route ends here
        nl = routes_flat[roff + rp + 1]
        y = state.lane_to_idx[nl]
        if y < 0:
            continue
        key = (int(x), int(y))
        counts[key] = counts.get(key, 0) + 1
    return counts


def observe(state: SimState, intersection_id: str) -> IntersectionObservation:
    return observe_all(state)[intersection_id]


def observe_all(state: SimState) -> dict[str, IntersectionObservation]:
    """Observations for every real intersection, in canonical id order."""
    net = state.network
    heading = _heading_counts(state)
    ordinal = {iid: k for k, iid in enumerate(net.real_ids)}
    out: dict[str, IntersectionObservation] = {}
    for k, iid in enumerate(net.real_ids):
        lanes = {}
        for key in CONTROLLED_LANE_ORDER:
            lane_idx = net.lane_index[net.incoming[iid][key]]
            lanes[key] = _lane_obs(state, lane_idx)
        neighbor_incoming: dict[str, int | None] = {}
        for d in APPROACHES:
            nbr = net.adjacency[iid].get(d)
            if nbr is None or net.by_id[nbr].virtual:
                neighbor_incoming[d] = None
            else:
                neighbor_incoming[d] = heading.get((ordinal[nbr], k), 0)
        out[iid] = IntersectionObservation(
            intersection=iid,
            phase=SignalPhase(int(state.prog_phase[k])),
            lanes=lanes,
            neighbor_incoming=neighbor_incoming,
        )
    return out


def intersection_queue_lengths(state: SimState) -> dict[str, int]:
    """Total queued vehicles over all 12 incoming lanes, per real intersection."""
    cfg = state.config
    totals = {iid: 0 for iid in state.network.real_ids}
    real_ids = state.network.real_ids
    for vid in state.active_vehicle_ids():
        li = state.veh_lane[vid]
        k = state.lane_to_idx[li]
        if k >= 0 and state.veh_speed[vid] < cfg.queue_speed_mps:
            totals[real_ids[k]] += 1
    return totals


def downstream_queues(state: SimState, intersection_id: str) -> dict[tuple[str, str], int]:
    """Queued count on the road each movement discharges onto.

    The receiving road is the one from ``intersection_id`` toward the
    movement's exit direction; all three of its lanes are summed.  Movements
    that leave the network (virtual exits) count zero.
    """
    from .network import exit_heading, lane_id

    net = state.network
    cfg = state.config
    out: dict[tuple[str, str], int] = {}
    for approach, movement in net.incoming[intersection_id]:
        out_dir = exit_heading(approach, movement)
        nxt = net.adjacency[intersection_id].get(out_dir)
        if nxt is None or net.by_id[nxt].virtual:
            out[(approach, movement)] = 0
            continue
        total = 0
        for m2 in ("through", "left", "right"):
            li = net.lane_index[lane_id(intersection_id, nxt, m2)]
            head = state.lane_head[li]
            cnt = state.lane_cnt[li]
            for j in range(cnt):
                vid = state.lane_q[li, (head + j) % state.lane_cap]
                if state.veh_speed[vid] < cfg.queue_speed_mps:
                    total += 1
        out[(approach, movement)] = total
    return out
