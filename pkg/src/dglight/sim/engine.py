"""Deterministic simulation engine.

One tick = inject due arrivals, advance vehicles (compiled or pure-Python
kernel), sample queue metrics, count down signal stages, advance the clock.
Identical seeds and action sequences give identical trajectories on either
backend.

Backend selection: the Cython kernel is used when importable, else the
pure-Python twin.  ``DGLIGHT_SIM_BACKEND=python|cython|auto`` overrides.
"""

from __future__ import annotations

import os
from collections import deque

import numpy as np

from . import _engine_py
from .flow import FlowSpec, synthetic_flow
from .network import RoadNetwork, SignalPhase, build_grid_network
from .state import (
    ALLOWED_TABLE,
    STAGE_ALL_RED,
    STAGE_GREEN,
    STAGE_YELLOW,
    VEH_ACTIVE,
    VEH_DONE,
    SimConfig,
    SimState,
    Snapshot,
)

try:
    from . import _engine_cy
except ImportError:  # extension not built; the pure-Python twin covers it
    _engine_cy = None

_KERNELS = {"python": _engine_py}
if _engine_cy is not None:
    _KERNELS["cython"] = _engine_cy


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_KERNELS))


def _resolve_backend(name: str) -> str:
    if name == "auto":
        return "cython" if "cython" in _KERNELS else "python"
    if name not in _KERNELS:
        raise ValueError(f"sim backend {name!r} unavailable (have {available_backends()})")
    return name


_active_backend = _resolve_backend(os.environ.get("DGLIGHT_SIM_BACKEND", "auto"))


def active_backend() -> str:
    return _active_backend


def set_backend(name: str) -> str:
    """Select the tick kernel globally; returns the resolved name."""
    global _active_backend
    _active_backend = _resolve_backend(name)
    return _active_backend


# -- construction ---------------------------------------------------------------


def build_sim(network: RoadNetwork, flow: FlowSpec, config: SimConfig = SimConfig(), seed: int = 0) -> SimState:
    return SimState(network, flow, config, seed)


def build_grid(rows: int, cols: int, lane_length_m: float = 300.0,
               flow: FlowSpec | None = None, seed: int = 0,
               config: SimConfig = SimConfig()) -> SimState:
    """Grid scenario; when ``flow`` is omitted a seeded synthetic demand is used."""
    network = build_grid_network(rows, cols, lane_length_m)
    if flow is None:
        flow = synthetic_flow(network, seed)
    return SimState(network, flow, config, seed)


# -- stepping ---------------------------------------------------------------------


def _inject_arrivals(state: SimState) -> None:
    cfg = state.config
    clock = state.clock
    sched = state.veh_sched
    first_lane_of = state.routes_flat
    route_off = state.route_off

    na = state.next_arrival
    while na < state.n_veh and sched[na] <= clock + 1e-9:
        lane = int(first_lane_of[route_off[state.veh_route[na]]])
        state.pending.setdefault(lane, deque()).append(na)
        na += 1
    state.next_arrival = na

    if not state.pending:
        return
    cap = state.lane_cap
    drained = []
    for lane in sorted(state.pending):
        dq = state.pending[lane]
        while dq:
            if state.lane_cnt[lane] > 0:
                tail = state.lane_q[lane, (state.lane_head[lane] + state.lane_cnt[lane] - 1) % cap]
                if state.veh_pos[tail] < cfg.min_gap_m:
                    break  # no room at the entry line this tick
            vid = dq.popleft()
            state.lane_q[lane, (state.lane_head[lane] + state.lane_cnt[lane]) % cap] = vid
            state.lane_cnt[lane] += 1
            state.veh_lane[vid] = lane
            state.veh_pos[vid] = 0.0
            state.veh_speed[vid] = 0.0
            state.veh_rpos[vid] = 0
            state.veh_enter[vid] = clock
            state.veh_state[vid] = VEH_ACTIVE
            state.entered += 1
        if not dq:
            drained.append(lane)
    for lane in drained:
        del state.pending[lane]


def _compute_lane_open(state: SimState) -> np.ndarray:
    buf = state._open_buf
    np.copyto(buf, state.always_open)
    ci = state.ctrl_lanes
    ii = state.lane_to_idx[ci]
    ok = (state.prog_stage[ii] == STAGE_GREEN) & (
        ALLOWED_TABLE[state.prog_phase[ii], state.lane_approach[ci], state.lane_movement[ci]] == 1
    )
    buf[ci] = ok
    return buf


def _advance_programs(state: SimState) -> None:
    cfg = state.config
    for k in range(state.prog_phase.shape[0]):
        stage = state.prog_stage[k]
        if stage == STAGE_GREEN:
            if state.prog_remaining[k] > 0:
                state.prog_remaining[k] -= 1
        else:
            state.prog_remaining[k] -= 1
            if state.prog_remaining[k] == 0:
                if stage == STAGE_YELLOW:
                    state.prog_stage[k] = STAGE_ALL_RED
                    state.prog_remaining[k] = cfg.all_red_s
                else:
                    state.prog_stage[k] = STAGE_GREEN
                    state.prog_phase[k] = state.prog_pending[k]
                    state.prog_pending[k] = -1
                    state.prog_remaining[k] = cfg.green_s


def step(state: SimState, n_ticks: int = 1) -> SimState:
    """Advance the simulation ``n_ticks`` seconds."""
    cfg = state.config
    kernel = _KERNELS[_active_backend]
    for _ in range(n_ticks):
        _inject_arrivals(state)
        lane_open = _compute_lane_open(state)
        tick = state.tick_count
        n_exited, queued = kernel.advance_tick(
            tick, cfg.dt_s, cfg.v_free_mps, cfg.min_gap_m, cfg.queue_speed_mps,
            state.veh_pos, state.veh_speed, state.veh_wait,
            state.veh_lane, state.veh_rpos, state.veh_moved,
            state.veh_route, state.routes_flat, state.route_off,
            state.lane_len, lane_open, state.lane_to_real,
            state.lane_q, state.lane_head, state.lane_cnt,
            state._scratch, state._exited_buf,
        )
        if n_exited:
            for vid in state._exited_buf[:n_exited]:
                state.veh_state[vid] = VEH_DONE
                state.veh_exit[vid] = state.clock + cfg.dt_s
            state.departed += n_exited
        state.queued_sum += queued
        state.tick_count += 1
        _advance_programs(state)
        state.clock += cfg.dt_s
    return state


# -- decision boundaries -------------------------------------------------------------


def at_decision_boundary(state: SimState) -> bool:
    """True when every program sits at green with zero remaining."""
    return bool(((state.prog_stage == STAGE_GREEN) & (state.prog_remaining == 0)).all())


def run_to_boundary(state: SimState) -> SimState:
    """Step until the shared decision boundary (bounded by one full cycle)."""
    cfg = state.config
    limit = cfg.green_s + cfg.yellow_s + cfg.all_red_s + 2
    for _ in range(limit):
        if at_decision_boundary(state):
            return state
        step(state)
    raise RuntimeError("no decision boundary reached within one cycle")


def apply_actions(state: SimState, joint: dict[str, SignalPhase]) -> SimState:
    """Commit one phase choice per real intersection at a decision boundary.

    Keeping the current phase restarts its green; switching inserts
    yellow + all-red before the new green.
    """
    if not at_decision_boundary(state):
        raise ValueError("apply_actions outside a decision boundary")
    real = state.network.real_ids
    if set(joint) != set(real):
        missing = set(real) - set(joint)
        extra = set(joint) - set(real)
        raise ValueError(f"joint action mismatch (missing={sorted(missing)}, unknown={sorted(extra)})")
    cfg = state.config
    for k, iid in enumerate(real):
        phase = SignalPhase(joint[iid])
        if int(state.prog_phase[k]) == int(phase):
            state.prog_remaining[k] = cfg.green_s
        else:
            state.prog_stage[k] = STAGE_YELLOW
            state.prog_remaining[k] = cfg.yellow_s
            state.prog_pending[k] = int(phase)
    return state


def run_interval(state: SimState, joint: dict[str, SignalPhase]) -> SimState:
    """Apply a joint action and advance to the next decision boundary."""
    apply_actions(state, joint)
    return run_to_boundary(state)


def snapshot(state: SimState) -> Snapshot:
    return state.snapshot()


def restore(state: SimState, snap: Snapshot) -> SimState:
    state.restore(snap)
    return state
