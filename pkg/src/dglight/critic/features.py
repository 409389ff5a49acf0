"""Observation encoding for the critic."""

from __future__ import annotations

import numpy as np

from ..sim import CONTROLLED_LANE_ORDER, IntersectionObservation

N_FEATURES = 36  # 8 lanes x [queued, seg1, seg2, seg3] + 4-dim phase one-hot


def encode_obs(obs: IntersectionObservation) -> np.ndarray:
    """Fixed 36-dim layout: lane counts in canonical order, then phase one-hot."""
    feats = np.zeros(N_FEATURES)
    for i, key in enumerate(CONTROLLED_LANE_ORDER):
        lane = obs.lanes[key]
        feats[i * 4] = lane.queued
        feats[i * 4 + 1] = lane.segments[0]
        feats[i * 4 + 2] = lane.segments[1]
        feats[i * 4 + 3] = lane.segments[2]
    feats[32 + int(obs.phase)] = 1.0
    return feats
