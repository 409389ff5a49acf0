"""Classical signal controllers: fixed-time cycling, max-pressure, random.

Each function decides one phase for one intersection at a decision boundary;
run.py wires them into full-episode controllers.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from .seeding import rng_from
from .sim import PHASES, PHASE_MOVEMENTS, IntersectionObservation, SignalPhase

DEFAULT_SPLITS: tuple[SignalPhase, ...] = tuple(PHASES)


def fixed_time(step_index: int, splits: Sequence[SignalPhase] = DEFAULT_SPLITS) -> SignalPhase:
    """Cycle through ``splits`` one decision interval at a time.

    ``splits`` is the cycle unrolled into per-interval phases, so unequal
    splits are expressed by repeating a phase.
    """
    if step_index < 0:
        raise ValueError("step_index must be non-negative")
    if not splits:
        raise ValueError("empty split table")
    return SignalPhase(splits[step_index % len(splits)])


def max_pressure(obs: IntersectionObservation, downstream: Mapping[tuple[str, str], float]) -> SignalPhase:
    """Phase with the largest total (incoming queue - downstream queue).

    ``downstream`` maps each controlled (approach, movement) to the queued
    count on its receiving road; exits to the boundary count zero.  Ties go to
    the lowest canonical phase index.
    """
    best_phase = PHASES[0]
    best_pressure = -np.inf
    for phase in PHASES:
        pressure = 0.0
        for key in PHASE_MOVEMENTS[phase]:
            pressure += obs.lanes[key].queued - float(downstream.get(key, 0.0))
        if pressure > best_pressure:
            best_phase = phase
            best_pressure = pressure
    return best_phase


def random_policy(seed: int, step_index: int) -> SignalPhase:
    """Uniform phase keyed only by (seed, step_index): reproducible streams."""
    rng = rng_from(seed, step_index)
    return SignalPhase(int(rng.integers(0, len(PHASES))))
