"""DQN training loop: replay buffer, target network, epsilon-greedy episodes.

Bootstrap targets use the frozen target parameters, so they are recomputed
once per round for the sampled transitions and enter minibatch graphs as
constants; only the online Q branch carries gradients.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..numerics import Adam, Graph
from ..seeding import rng_from
from ..sim import (
    PHASES,
    SignalPhase,
    SimState,
    apply_actions,
    at_decision_boundary,
    intersection_queue_lengths,
    metrics,
    observe_all,
    run_to_boundary,
)
from .model import (
    CriticConfig,
    build_q_graph,
    init_critic_params,
    neighbor_arrays,
    q_forward,
    stack_features,
)

log = logging.getLogger(__name__)


def epsilon(round_index: int, config: CriticConfig | None = None) -> float:
    """Exploration schedule: max(start * decay^round, floor)."""
    if round_index < 0:
        raise ValueError("round_index must be >= 0")
    cfg = config or CriticConfig()
    return max(cfg.eps_start * cfg.eps_decay ** round_index, cfg.eps_floor)


@dataclass(frozen=True)
class Transition:
    obs: dict
    actions: dict[str, SignalPhase]
    rewards: dict[str, float]
    next_obs: dict


class ReplayBuffer:
    """FIFO buffer of Transitions with bounded capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._items: deque[Transition] = deque(maxlen=capacity)

    def push(self, t: Transition) -> None:
        self._items.append(t)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        items = list(self._items)
        picks = rng.choice(len(items), size=min(n, len(items)), replace=False)
        return [items[i] for i in picks]

    def __len__(self) -> int:
        return len(self._items)


# -- loss -----------------------------------------------------------------------


def _batch_neighbor_arrays(idx: np.ndarray, mask: np.ndarray, batch: int):
    """Block-diagonal tiling: row b*n+k attends to its own transition's rows."""
    n, m = idx.shape
    offsets = (np.arange(batch) * n).reshape(batch, 1, 1)
    idx_b = (idx[None, :, :] + offsets).reshape(batch * n, m)
    mask_b = np.tile(mask, (batch, 1))
    return idx_b, mask_b


def _targets(target_params, transitions, gamma, network, config) -> np.ndarray:
    """y = r + gamma * max_a' Q_target(s', a'), flattened [batch * n]."""
    n = len(network.real_ids)
    idx, mask = neighbor_arrays(network)
    feats = np.concatenate([stack_features(t.next_obs, network) for t in transitions])
    idx_b, mask_b = _batch_neighbor_arrays(idx, mask, len(transitions))
    g = Graph()
    pnodes = {k: g.constant(v) for k, v in target_params.items()}
    q_next = build_q_graph(g, pnodes, feats, idx_b, mask_b, config).value
    max_next = q_next.max(axis=1)
    rewards = np.concatenate([
        np.array([t.rewards[iid] for iid in network.real_ids]) for t in transitions
    ])
    return rewards + gamma * max_next


def _loss_node(g: Graph, pnodes, transitions, targets_flat, network, config):
    """Mean squared Bellman error node built inside an existing graph."""
    n = len(network.real_ids)
    idx, mask = neighbor_arrays(network)
    feats = np.concatenate([stack_features(t.obs, network) for t in transitions])
    idx_b, mask_b = _batch_neighbor_arrays(idx, mask, len(transitions))
    onehot = np.zeros((len(transitions) * n, len(PHASES)))
    row = 0
    for t in transitions:
        for iid in network.real_ids:
            onehot[row, int(t.actions[iid])] = 1.0
            row += 1
    q = build_q_graph(g, pnodes, feats, idx_b, mask_b, config)
    q_sa = g.sum(g.mul(q, g.constant(onehot)), axis=-1)
    diff = g.sub(q_sa, g.constant(targets_flat))
    return g.mean(g.mul(diff, diff))


def _loss_graph(params, transitions, targets_flat, network, config):
    """(graph, loss node, param nodes) for mean squared Bellman error."""
    g = Graph()
    pnodes = {k: g.leaf(v) for k, v in params.items()}
    loss = _loss_node(g, pnodes, transitions, targets_flat, network, config)
    return g, loss, pnodes


def bellman_loss(params, target_params, batch: list[Transition], gamma: float,
                 network, config: CriticConfig | None = None) -> float:
    """Mean squared Bellman error of a batch (target branch held constant)."""
    if not batch:
        raise ValueError("empty batch")
    config = config or CriticConfig()
    y = _targets(target_params, batch, gamma, network, config)
    _, loss, _ = _loss_graph(params, batch, y, network, config)
    return float(loss.value)


# -- training ------------------------------------------------------------------


def _greedy_joint(params, obs, network, config) -> dict[str, SignalPhase]:
    q = q_forward(params, obs, network, config)
    return {iid: q[iid].argmax() for iid in network.real_ids}


def _run_collect_episode(state: SimState, params, config, eps: float, rounds: int,
                         buffer: ReplayBuffer, rng: np.random.Generator) -> None:
    network = state.network
    run_to_boundary(state)
    obs = observe_all(state)
    for _ in range(rounds):
        q = q_forward(params, obs, network, config)
        joint = {}
        for iid in network.real_ids:
            if rng.random() < eps:
                joint[iid] = SignalPhase(int(rng.integers(len(PHASES))))
            else:
                joint[iid] = q[iid].argmax()
        apply_actions(state, joint)
        run_to_boundary(state)
        next_obs = observe_all(state)
        queues = intersection_queue_lengths(state)
        rewards = {iid: config.reward_scale * queues[iid] for iid in network.real_ids}
        buffer.push(Transition(obs, joint, rewards, next_obs))
        obs = next_obs


def _run_greedy_eval(state: SimState, params, config, rounds: int) -> float:
    network = state.network
    for _ in range(rounds):
        run_to_boundary(state)
        obs = observe_all(state)
        apply_actions(state, _greedy_joint(params, obs, network, config))
    run_to_boundary(state)
    return metrics(state).att_s


def train_critic(env_factory: Callable[[], SimState], config: CriticConfig,
                 rounds: int, seed: int = 0, episode_s: int = 3600,
                 interval_s: int = 30, eval_each_round: bool = True):
    """Train the critic for ``rounds`` episode/update rounds.

    Returns (params, log) where log has one row per round with the mean
    minibatch loss, greedy-eval ATT, epsilon, and buffer fill.
    """
    if episode_s % interval_s:
        raise ValueError("interval must divide episode length")
    decisions = episode_s // interval_s
    params = init_critic_params(config, seed)
    target_params = {k: v.copy() for k, v in params.items()}
    buffer = ReplayBuffer(config.buffer_capacity)
    optimizer = Adam(params, lr=config.learning_rate)
    history: list[dict] = []

    for r in range(rounds):
        eps = epsilon(r, config)
        state = env_factory()
        _run_collect_episode(state, optimizer.params, config, eps, decisions,
                             buffer, rng_from(seed, "explore", r))

        losses: list[float] = []
        if len(buffer) < config.batch_size:
            log.warning("round %d: buffer %d below batch size %d, skipping update",
                        r, len(buffer), config.batch_size)
        else:
            sample = buffer.sample(config.sample_size, rng_from(seed, "sample", r))
            network = state.network
            y = _targets(target_params, sample, config.gamma, network, config)
            shuffle_rng = rng_from(seed, "shuffle", r)
            n_batches = len(sample) // config.batch_size
            for _ in range(config.epochs_per_round):
                order = shuffle_rng.permutation(len(sample))
                for b in range(n_batches):
                    rows = order[b * config.batch_size: (b + 1) * config.batch_size]
                    batch = [sample[i] for i in rows]
                    # target rows follow the same flattening (transition-major)
                    n = len(network.real_ids)
                    y_rows = np.concatenate([y[i * n:(i + 1) * n] for i in rows])
                    g, loss, pnodes = _loss_graph(optimizer.params, batch, y_rows, network, config)
                    grads = g.gradient(loss, list(pnodes.values()))
                    optimizer.step(dict(zip(pnodes.keys(), grads)))
                    losses.append(float(loss.value))

        eval_att = None
        if eval_each_round:
            eval_att = _run_greedy_eval(env_factory(), optimizer.params, config, decisions)

        history.append({
            "round": r,
            "epsilon": eps,
            "loss_mean": float(np.mean(losses)) if losses else None,
            "updates": len(losses),
            "buffer": len(buffer),
            "eval_att": eval_att,
        })
        if (r + 1) % config.target_update_interval == 0:
            target_params = {k: v.copy() for k, v in optimizer.params.items()}

    return optimizer.params, history
