"""Joint-scored comparison variant: fork-evaluated returns instead of critic Q.

Per-intersection candidates are aligned index-wise into joint action vectors.
Each joint runs on an independent fork of the simulator for a short horizon
under a mixed congestion reward, and the discounted returns are projected
back to per-intersection, per-phase scores that slot into the regular record
schema where the QVector would go.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import baselines
from .policy import TransportError
from .prompting import parse_response, render_prompt
from .rollout import (
    Candidate,
    RolloutConfig,
    RolloutRecord,
    RolloutResult,
    score_candidates,
    select_executed,
)
from .critic import QVector
from .seeding import seed_parts
from .sim import (
    PHASES,
    SignalPhase,
    SimState,
    apply_actions,
    downstream_queues,
    intersection_queue_lengths,
    metrics,
    observe_all,
    run_to_boundary,
)


@dataclass(frozen=True)
class JSConfig:
    horizon: int = 3
    gamma: float = 0.8
    alpha: float = 0.6
    beta: float = 0.3
    fallback_reward: float = 0.0
    # interior steps use max_pressure instead of resampling the policy;
    # cheaper with a remote endpoint but not the described procedure
    cheap_interior: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta > 1.0:
            raise ValueError("need alpha, beta >= 0 and alpha + beta <= 1")


@dataclass(frozen=True)
class JointCandidate:
    """Index-aligned joint action; None marks an invalid proposal."""

    index: int
    actions: dict[str, SignalPhase | None]


def align_candidates(samples: dict[str, Sequence[SignalPhase | None]],
                     k: int) -> list[JointCandidate]:
    """Joint candidate j takes sample j from every intersection."""
    for iid, row in samples.items():
        if len(row) != k:
            raise ValueError(f"intersection {iid} contributed {len(row)} samples, expected {k}")
    return [JointCandidate(j, {iid: samples[iid][j] for iid in samples})
            for j in range(k)]


def mixed_reward_from_queues(queues: dict[str, float],
                             neighbors: dict[str, Sequence[str]],
                             alpha: float, beta: float) -> float:
    """r = -(1/|V|) * sum_i(alpha*m_i + beta*mean_N(i) + (1-alpha-beta)*mean_V)."""
    if not queues:
        raise ValueError("no intersections")
    ids = list(queues)
    global_mean = sum(queues[i] for i in ids) / len(ids)
    total = 0.0
    for i in ids:
        nbrs = list(neighbors.get(i, ()))
        nbr_mean = sum(queues[n] for n in nbrs) / len(nbrs) if nbrs else 0.0
        total += alpha * queues[i] + beta * nbr_mean + (1.0 - alpha - beta) * global_mean
    # 0.0 - x instead of -x so the all-clear case comes out +0.0
    return 0.0 - total / len(ids)


def mixed_reward(state: SimState, alpha: float, beta: float) -> float:
    queues = intersection_queue_lengths(state)
    neighbors = {iid: list(state.network.real_neighbors(iid).values())
                 for iid in state.network.real_ids}
    return mixed_reward_from_queues(queues, neighbors, alpha, beta)


def _resolve_joint(work: SimState, actions: dict[str, SignalPhase | None]) -> dict[str, SignalPhase]:
    """Invalid markers fall back to max_pressure on the fork's current state."""
    obs = observe_all(work)
    out = {}
    for iid in work.network.real_ids:
        a = actions.get(iid)
        if a is None:
            a = baselines.max_pressure(obs[iid], downstream_queues(work, iid))
        out[iid] = a
    return out


def evaluate_candidate(state: SimState, joint: JointCandidate, policy,
                       cfg: JSConfig, seed: int = 0, step: int = 0) -> float:
    """Discounted return of one joint action on a fork of ``state``.

    The parent must sit at a decision boundary and is never mutated. For
    interior intervals one response per intersection is resampled from the
    policy (max_pressure when cheap_interior is set or no policy is given).
    A transport failure propagates and the fork is discarded.
    """
    work = state.fork()
    apply_actions(work, _resolve_joint(work, joint.actions))
    run_to_boundary(work)
    g = mixed_reward(work, cfg.alpha, cfg.beta)
    for tau in range(1, cfg.horizon):
        obs = observe_all(work)
        actions: dict[str, SignalPhase | None] = {}
        for iid in work.network.real_ids:
            if cfg.cheap_interior or policy is None:
                actions[iid] = None
            else:
                per_call = sum(seed_parts(seed, "js-interior", step, joint.index,
                                          tau, iid)) & 0x7FFFFFFF
                prompt = render_prompt(obs[iid], step=step)
                (sample,) = policy.generate(prompt.text, 1, per_call)
                parsed = parse_response(sample.text)
                actions[iid] = parsed.phase if parsed.valid else None
        apply_actions(work, _resolve_joint(work, actions))
        run_to_boundary(work)
        # gamma ** tau rather than a running product: bitwise identical to
        # the plain geometric-sum oracle at any horizon
        g += cfg.gamma ** tau * mixed_reward(work, cfg.alpha, cfg.beta)
    return g


def project_scores(joints: list[JointCandidate], returns: Sequence[float],
                   fallback: float) -> dict[str, tuple[float, float, float, float]]:
    """Per intersection and phase: mean return of the joints proposing it."""
    if len(joints) != len(returns):
        raise ValueError("returns must align with joints")
    if not joints:
        raise ValueError("no joint candidates")
    ids = list(joints[0].actions)
    out = {}
    for iid in ids:
        scores = []
        for phase in PHASES:
            vals = [returns[j] for j, joint in enumerate(joints)
                    if joint.actions[iid] == phase]
            scores.append(sum(vals) / len(vals) if vals else float(fallback))
        out[iid] = tuple(scores)
    return out


def collect_episode_js(state: SimState, policy, js_cfg: JSConfig,
                       cfg: RolloutConfig) -> RolloutResult:
    """Episode collection with fork-projected scores in place of critic Q."""
    records: list[RolloutRecord] = []
    network = state.network
    js_meta = {"horizon": js_cfg.horizon, "gamma": js_cfg.gamma,
               "alpha": js_cfg.alpha, "beta": js_cfg.beta}
    for step_i in range(cfg.rounds):
        run_to_boundary(state)
        obs = observe_all(state)
        texts: dict[str, list[str]] = {}
        parses: dict[str, list] = {}
        prompts = {}
        try:
            for iid in network.real_ids:
                prompt = render_prompt(obs[iid], step=step_i)
                per_call = sum(seed_parts(cfg.seed, "js-gen", step_i, iid)) & 0x7FFFFFFF
                samples = policy.generate(prompt.text, cfg.k, per_call)
                prompts[iid] = prompt
                texts[iid] = [s.text for s in samples]
                parses[iid] = [parse_response(t) for t in texts[iid]]
            joints = align_candidates(
                {iid: [p.phase for p in parses[iid]] for iid in network.real_ids}, cfg.k)
            returns = [evaluate_candidate(state, j, policy, js_cfg, cfg.seed, step_i)
                       for j in joints]
        except TransportError as exc:
            return RolloutResult(records, metrics(state), truncated=True, error=str(exc))
        scores = project_scores(joints, returns, js_cfg.fallback_reward)
        joint_exec: dict[str, SignalPhase] = {}
        for iid in network.real_ids:
            qv = QVector(scores[iid])
            rewards = score_candidates(qv, parses[iid], cfg.r_invalid)
            executed, fallback = select_executed(rewards, parses[iid], qv)
            records.append(RolloutRecord(
                step=step_i,
                intersection=iid,
                prompt=prompts[iid],
                q_values=qv,
                candidates=tuple(Candidate(t, p, r) for t, p, r
                                 in zip(texts[iid], parses[iid], rewards)),
                executed=executed,
                fallback=fallback,
                js_meta=js_meta,
            ))
            joint_exec[iid] = executed
        apply_actions(state, joint_exec)
    run_to_boundary(state)
    return RolloutResult(records, metrics(state))
