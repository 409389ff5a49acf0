"""Flat-array simulation state.

All per-vehicle and per-lane dynamic data live in preallocated numpy arrays so
the tick kernel (Cython or pure Python) can run without touching Python
objects.  Static network and schedule arrays are shared between a state and
its snapshots; snapshot/restore copies only the dynamic part.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .flow import FlowSpec
from .network import (
    APPROACHES,
    MOVEMENTS,
    PHASE_MOVEMENTS,
    PHASES,
    RoadNetwork,
    SignalPhase,
)

STAGE_GREEN = 0
STAGE_YELLOW = 1
STAGE_ALL_RED = 2

# allowed[phase, approach, movement]: signal permission while the stage is
# green; right turns are handled separately (always open).
ALLOWED_TABLE = np.zeros((len(PHASES), len(APPROACHES), len(MOVEMENTS)), dtype=np.uint8)
for _p in PHASES:
    for _a, _m in PHASE_MOVEMENTS[_p]:
        ALLOWED_TABLE[_p, APPROACHES.index(_a), MOVEMENTS.index(_m)] = 1


@dataclass(frozen=True)
class SimConfig:
    green_s: int = 30
    yellow_s: int = 3
    all_red_s: int = 2
    v_free_mps: float = 11.0
    min_gap_m: float = 2.5
    queue_speed_mps: float = 0.1
    dt_s: float = 1.0

    def __post_init__(self):
        if min(self.green_s, self.yellow_s, self.all_red_s) <= 0:
            raise ValueError("stage durations must be positive")
        if self.v_free_mps <= 0 or self.min_gap_m <= 0 or self.dt_s <= 0:
            raise ValueError("kinematic constants must be positive")


VEH_PENDING = 0
VEH_ACTIVE = 1
VEH_DONE = 2


@dataclass
class Snapshot:
    """Deep copy of a SimState's dynamic part; static arrays are shared."""

    state_ref: "SimState"
    veh_lane: np.ndarray
    veh_pos: np.ndarray
    veh_speed: np.ndarray
    veh_wait: np.ndarray
    veh_enter: np.ndarray
    veh_exit: np.ndarray
    veh_rpos: np.ndarray
    veh_state: np.ndarray
    veh_moved: np.ndarray
    lane_q: np.ndarray
    lane_head: np.ndarray
    lane_cnt: np.ndarray
    prog_phase: np.ndarray
    prog_stage: np.ndarray
    prog_remaining: np.ndarray
    prog_pending: np.ndarray
    clock: float
    next_arrival: int
    pending: dict[int, tuple[int, ...]]
    entered: int
    departed: int
    queued_sum: float
    tick_count: int


class SimState:
    """Single-owner mutable simulation state."""

    def __init__(self, network: RoadNetwork, flow: FlowSpec, config: SimConfig = SimConfig(), seed: int = 0):
        flow.validate(network)
        self.network = network
        self.flow = flow
        self.config = config
        self.seed = seed

        lanes = network.lanes
        n_lanes = len(lanes)
        self.lane_len = np.array([l.length_m for l in lanes], dtype=np.float64)
        self.lane_approach = np.array([APPROACHES.index(l.approach) for l in lanes], dtype=np.int32)
        self.lane_movement = np.array([MOVEMENTS.index(l.movement) for l in lanes], dtype=np.int32)
        real_ordinal = {iid: k for k, iid in enumerate(network.real_ids)}
        self.lane_to_idx = np.array(
            [real_ordinal.get(l.to_id, -1) for l in lanes], dtype=np.int32
        )
        self.lane_to_real = (self.lane_to_idx >= 0).astype(np.uint8)

        # lanes that are always open: right turns, plus anything feeding a
        # virtual (uncontrolled) intersection
        right = MOVEMENTS.index("right")
        self.always_open = ((self.lane_movement == right) | (self.lane_to_real == 0)).astype(np.uint8)
        self.ctrl_lanes = np.nonzero(self.always_open == 0)[0].astype(np.int64)
        self._open_buf = np.zeros(n_lanes, dtype=np.uint8)

        # routes: one route table entry per flow entry
        route_ids = []
        offsets = [0]
        flat: list[int] = []
        for e in flow.entries:
            idxs = [network.lane_index[lid] for lid in e.route]
            flat.extend(idxs)
            offsets.append(len(flat))
            route_ids.append(idxs)
        self.routes_flat = np.array(flat, dtype=np.int32)
        self.route_off = np.array(offsets, dtype=np.int32)

        # expand the arrival schedule; ties keep flow-entry order
        arrivals: list[tuple[float, int]] = []
        for k, e in enumerate(flow.entries):
            for t in e.arrival_times():
                arrivals.append((t, k))
        arrivals.sort(key=lambda a: a[0])  # stable: equal times keep entry order
        n_veh = len(arrivals)
        self.n_veh = n_veh
        self.veh_sched = np.array([a[0] for a in arrivals], dtype=np.float64)
        self.veh_route = np.array([a[1] for a in arrivals], dtype=np.int32)

        cap = int(np.max(self.lane_len) / config.min_gap_m) + 2 if n_lanes else 2
        self.lane_cap = cap

        # dynamic arrays
        self.veh_lane = np.full(n_veh, -1, dtype=np.int32)
        self.veh_pos = np.zeros(n_veh, dtype=np.float64)
        self.veh_speed = np.zeros(n_veh, dtype=np.float64)
        self.veh_wait = np.zeros(n_veh, dtype=np.float64)
        self.veh_enter = np.full(n_veh, -1.0, dtype=np.float64)
        self.veh_exit = np.full(n_veh, -1.0, dtype=np.float64)
        self.veh_rpos = np.zeros(n_veh, dtype=np.int32)
        self.veh_state = np.full(n_veh, VEH_PENDING, dtype=np.int32)
        self.veh_moved = np.full(n_veh, -1, dtype=np.int32)

        self.lane_q = np.zeros((n_lanes, cap), dtype=np.int32)
        self.lane_head = np.zeros(n_lanes, dtype=np.int32)
        self.lane_cnt = np.zeros(n_lanes, dtype=np.int32)

        n_real = len(network.real_ids)
        self.prog_phase = np.full(n_real, int(SignalPhase.ETWT), dtype=np.int32)
        self.prog_stage = np.full(n_real, STAGE_GREEN, dtype=np.int32)
        self.prog_remaining = np.full(n_real, config.green_s, dtype=np.int32)
        self.prog_pending = np.full(n_real, -1, dtype=np.int32)

        self.clock = 0.0
        self.next_arrival = 0
        self.pending: dict[int, deque[int]] = {}
        self.entered = 0
        self.departed = 0
        self.queued_sum = 0.0
        self.tick_count = 0

        # scratch buffers reused by the kernel each tick
        self._scratch = np.zeros(cap, dtype=np.int32)
        self._exited_buf = np.zeros(max(n_veh, 1), dtype=np.int32)

    # -- snapshotting ----------------------------------------------------------

    def snapshot(self) -> Snapshot:
        return Snapshot(
            state_ref=self,
            veh_lane=self.veh_lane.copy(),
            veh_pos=self.veh_pos.copy(),
            veh_speed=self.veh_speed.copy(),
            veh_wait=self.veh_wait.copy(),
            veh_enter=self.veh_enter.copy(),
            veh_exit=self.veh_exit.copy(),
            veh_rpos=self.veh_rpos.copy(),
            veh_state=self.veh_state.copy(),
            veh_moved=self.veh_moved.copy(),
            lane_q=self.lane_q.copy(),
            lane_head=self.lane_head.copy(),
            lane_cnt=self.lane_cnt.copy(),
            prog_phase=self.prog_phase.copy(),
            prog_stage=self.prog_stage.copy(),
            prog_remaining=self.prog_remaining.copy(),
            prog_pending=self.prog_pending.copy(),
            clock=self.clock,
            next_arrival=self.next_arrival,
            pending={k: tuple(v) for k, v in self.pending.items() if v},
            entered=self.entered,
            departed=self.departed,
            queued_sum=self.queued_sum,
            tick_count=self.tick_count,
        )

    def restore(self, snap: Snapshot) -> None:
        if snap.state_ref.network is not self.network:
            raise ValueError("snapshot belongs to a different scenario")
        self.veh_lane[:] = snap.veh_lane
        self.veh_pos[:] = snap.veh_pos
        self.veh_speed[:] = snap.veh_speed
        self.veh_wait[:] = snap.veh_wait
        self.veh_enter[:] = snap.veh_enter
        self.veh_exit[:] = snap.veh_exit
        self.veh_rpos[:] = snap.veh_rpos
        self.veh_state[:] = snap.veh_state
        self.veh_moved[:] = snap.veh_moved
        self.lane_q[:] = snap.lane_q
        self.lane_head[:] = snap.lane_head
        self.lane_cnt[:] = snap.lane_cnt
        self.prog_phase[:] = snap.prog_phase
        self.prog_stage[:] = snap.prog_stage
        self.prog_remaining[:] = snap.prog_remaining
        self.prog_pending[:] = snap.prog_pending
        self.clock = snap.clock
        self.next_arrival = snap.next_arrival
        self.pending = {k: deque(v) for k, v in snap.pending.items()}
        self.entered = snap.entered
        self.departed = snap.departed
        self.queued_sum = snap.queued_sum
        self.tick_count = snap.tick_count

    def fork(self) -> "SimState":
        """Independent copy sharing only immutable static data."""
        twin = object.__new__(SimState)
        twin.__dict__.update(self.__dict__)
        snap = self.snapshot()
        # rebind every dynamic array to a private copy
        twin.veh_lane = snap.veh_lane
        twin.veh_pos = snap.veh_pos
        twin.veh_speed = snap.veh_speed
        twin.veh_wait = snap.veh_wait
        twin.veh_enter = snap.veh_enter
        twin.veh_exit = snap.veh_exit
        twin.veh_rpos = snap.veh_rpos
        twin.veh_state = snap.veh_state
        twin.veh_moved = snap.veh_moved
        twin.lane_q = snap.lane_q
        twin.lane_head = snap.lane_head
        twin.lane_cnt = snap.lane_cnt
        twin.prog_phase = snap.prog_phase
        twin.prog_stage = snap.prog_stage
        twin.prog_remaining = snap.prog_remaining
        twin.prog_pending = snap.prog_pending
        twin.pending = {k: deque(v) for k, v in snap.pending.items()}
        twin._scratch = self._scratch.copy()
        twin._exited_buf = self._exited_buf.copy()
        return twin

    # -- equality / digests ------------------------------------------------------

    _DYNAMIC_ARRAYS = (
        "veh_lane", "veh_pos", "veh_speed", "veh_wait", "veh_enter", "veh_exit",
        "veh_rpos", "veh_state", "veh_moved", "lane_q", "lane_head", "lane_cnt",
        "prog_phase", "prog_stage", "prog_remaining", "prog_pending",
    )

    def same_dynamic_state(self, other: "SimState") -> bool:
        if self.clock != other.clock or self.next_arrival != other.next_arrival:
            return False
        if (self.entered, self.departed, self.queued_sum, self.tick_count) != (
            other.entered, other.departed, other.queued_sum, other.tick_count
        ):
            return False
        mine = {k: list(v) for k, v in self.pending.items() if v}
        theirs = {k: list(v) for k, v in other.pending.items() if v}
        if mine != theirs:
            return False
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in self._DYNAMIC_ARRAYS
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in self._DYNAMIC_ARRAYS:
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        h.update(repr((self.clock, self.next_arrival, self.entered, self.departed,
                       self.queued_sum, self.tick_count,
                       sorted((k, tuple(v)) for k, v in self.pending.items() if v))).encode())
        return h.hexdigest()

    # -- small accessors -----------------------------------------------------------

    def phase_of(self, intersection_id: str) -> SignalPhase:
        k = self.network.real_ids.index(intersection_id)
        return SignalPhase(int(self.prog_phase[k]))

    def active_vehicle_ids(self) -> np.ndarray:
        return np.nonzero(self.veh_state == VEH_ACTIVE)[0]
