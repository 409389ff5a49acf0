"""Episode runners: wire per-intersection deciders into full episodes.

An episode is ``episode_s // interval_s`` decision rounds.  Programs start
mid-green, so each round first advances to the shared boundary, then decides
and commits; the final action still plays out before metrics are read.
A switching intersection stretches the round from 30 s to 35 s (yellow +
all-red before the new green) for the whole network.
"""

from __future__ import annotations

from collections.abc import Callable

from . import baselines
from .seeding import seed_parts
from .sim import (
    IntersectionObservation,
    MetricsReport,
    SignalPhase,
    SimState,
    apply_actions,
    downstream_queues,
    metrics,
    observe_all,
    run_to_boundary,
)

# controller(state, observations, step_index) -> one phase per real intersection
Controller = Callable[[SimState, dict[str, IntersectionObservation], int], dict[str, SignalPhase]]


def episode_rounds(episode_s: int, interval_s: int) -> int:
    if interval_s <= 0 or episode_s <= 0:
        raise ValueError("episode and interval must be positive")
    if episode_s % interval_s:
        raise ValueError(f"interval {interval_s} must divide episode {episode_s}")
    return episode_s // interval_s


def run_episode(state: SimState, controller: Controller, episode_s: int = 3600,
                interval_s: int = 30) -> MetricsReport:
    rounds = episode_rounds(episode_s, interval_s)
    for step_index in range(rounds):
        run_to_boundary(state)
        obs = observe_all(state)
        joint = controller(state, obs, step_index)
        apply_actions(state, joint)
    run_to_boundary(state)
    return metrics(state)


# -- controller factories ----------------------------------------------------------


def make_fixed_time(splits=None) -> Controller:
    splits = tuple(splits) if splits else baselines.DEFAULT_SPLITS

    def controller(state, obs, step_index):
        phase = baselines.fixed_time(step_index, splits)
        return {iid: phase for iid in state.network.real_ids}

    return controller


def make_max_pressure() -> Controller:
    def controller(state, obs, step_index):
        return {
            iid: baselines.max_pressure(obs[iid], downstream_queues(state, iid))
            for iid in state.network.real_ids
        }

    return controller


def make_random(seed: int) -> Controller:
    def controller(state, obs, step_index):
        joint = {}
        for k, iid in enumerate(state.network.real_ids):
            per_intersection = sum(seed_parts(seed, iid)) & 0x7FFFFFFF
            joint[iid] = baselines.random_policy(per_intersection, step_index)
        return joint

    return controller


def make_critic_greedy(critic) -> Controller:
    """Greedy argmax of a frozen critic's Q-values (ties: lowest phase index)."""

    def controller(state, obs, step_index):
        q = critic.q_values(obs)
        return {iid: q[iid].argmax() for iid in state.network.real_ids}

    return controller


def make_policy_controller(policy, seed: int) -> Controller:
    """One sampled response per intersection; invalid falls back to max_pressure."""
    from .prompting import parse_response, render_prompt

    def controller(state, obs, step_index):
        joint = {}
        for iid in state.network.real_ids:
            prompt = render_prompt(obs[iid], step=step_index)
            per_call = sum(seed_parts(seed, "eval", step_index, iid)) & 0x7FFFFFFF
            (sample,) = policy.generate(prompt.text, 1, per_call)
            parsed = parse_response(sample.text)
            if parsed.valid:
                joint[iid] = parsed.phase
            else:
                joint[iid] = baselines.max_pressure(obs[iid], downstream_queues(state, iid))
        return joint

    return controller
