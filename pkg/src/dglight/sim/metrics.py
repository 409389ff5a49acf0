"""Episode metrics: average travel time, queue length, waiting time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import SimState, VEH_PENDING


@dataclass(frozen=True)
class MetricsReport:
    att_s: float   # mean (exit or now) - enter over vehicles that entered
    aql_veh: float  # mean queued vehicles per second
    awt_s: float   # total accumulated waiting / vehicles entered
    vehicles_entered: int
    vehicles_departed: int

    def as_row(self) -> dict[str, float]:
        return {"att": self.att_s, "aql": self.aql_veh, "awt": self.awt_s}


def metrics(state: SimState) -> MetricsReport:
    """Summarize the episode so far; intended once the horizon is reached."""
    entered_mask = state.veh_state != VEH_PENDING
    n_entered = int(entered_mask.sum())
    if n_entered == 0:
        att = 0.0
        awt = 0.0
    else:
        enter = state.veh_enter[entered_mask]
        exit_ = state.veh_exit[entered_mask]
        end = np.where(exit_ >= 0.0, exit_, state.clock)
        att = float(np.mean(end - enter))
        awt = float(state.veh_wait[entered_mask].sum() / n_entered)
    aql = state.queued_sum / state.tick_count if state.tick_count else 0.0
    return MetricsReport(att, float(aql), awt, n_entered, state.departed)
