"""Graph-attention Q-network.

Per intersection: embed the 36-dim observation, run multi-head scaled-dot-
product attention over {self} union real neighbours, project the concatenated
heads, then a two-layer Q head emits one value per phase.  Virtual neighbours
are excluded, so an isolated intersection attends only to itself.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import Graph, Node, glorot_uniform, tensor, zeros
from ..seeding import rng_from
from ..sim import APPROACHES, PHASES, RoadNetwork, SignalPhase
from .features import N_FEATURES, encode_obs


@dataclass(frozen=True)
class CriticConfig:
    embed_dim: int = 32
    heads: int = 4
    head_dim: int = 8
    attention_layers: int = 1
    q_hidden: int = 32
    gamma: float = 0.8
    buffer_capacity: int = 12000
    sample_size: int = 3000
    batch_size: int = 20
    epochs_per_round: int = 100
    target_update_interval: int = 5
    eps_start: float = 0.8
    eps_decay: float = 0.95
    eps_floor: float = 0.2
    reward_scale: float = -0.25
    learning_rate: float = 1e-3

    def __post_init__(self):
        if not (0 < self.gamma < 1):
            raise ValueError("gamma must be in (0, 1)")
        if not (self.buffer_capacity >= self.sample_size >= self.batch_size >= 1):
            raise ValueError("need buffer capacity >= sample size >= batch size >= 1")
        if min(self.embed_dim, self.heads, self.head_dim, self.q_hidden,
               self.attention_layers, self.epochs_per_round, self.target_update_interval) < 1:
            raise ValueError("architecture and schedule sizes must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "CriticConfig":
        return cls(**doc)


@dataclass(frozen=True)
class QVector:
    """Per-phase action values in canonical phase order."""

    values: tuple[float, float, float, float]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 4:
            raise ValueError("QVector needs exactly 4 values")
        if not all(np.isfinite(vals)):
            raise ValueError("QVector values must be finite")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, phase) -> float:
        return self.values[int(phase)]

    def argmax(self) -> SignalPhase:
        # ties resolve to the lowest canonical index
        return SignalPhase(int(np.argmax(self.values)))

    def max(self) -> float:
        return max(self.values)


def init_critic_params(config: CriticConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = rng_from(seed, "critic-init")
    params: dict[str, np.ndarray] = {
        "embed.w": glorot_uniform((N_FEATURES, config.embed_dim), rng),
        "embed.b": zeros(config.embed_dim),
    }
    for layer in range(config.attention_layers):
        for h in range(config.heads):
            base = f"attn{layer}.h{h}"
            params[f"{base}.wq"] = glorot_uniform((config.embed_dim, config.head_dim), rng)
            params[f"{base}.wk"] = glorot_uniform((config.embed_dim, config.head_dim), rng)
            params[f"{base}.wv"] = glorot_uniform((config.embed_dim, config.head_dim), rng)
        params[f"attn{layer}.wo"] = glorot_uniform((config.heads * config.head_dim, config.embed_dim), rng)
        params[f"attn{layer}.bo"] = zeros(config.embed_dim)
    params["qhead.w1"] = glorot_uniform((config.embed_dim, config.q_hidden), rng)
    params["qhead.b1"] = zeros(config.q_hidden)
    params["qhead.w2"] = glorot_uniform((config.q_hidden, len(PHASES)), rng)
    params["qhead.b2"] = zeros(len(PHASES))
    return params


def neighbor_arrays(network: RoadNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Attention slots per intersection: self first, then real neighbours.

    Returns (idx [n, m], mask [n, m]); padding repeats the self index with a
    zero mask.
    """
    n = len(network.real_ids)
    ordinal = {iid: k for k, iid in enumerate(network.real_ids)}
    rows: list[list[int]] = []
    for iid in network.real_ids:
        row = [ordinal[iid]]
        nbrs = network.real_neighbors(iid)
        for d in APPROACHES:
            if d in nbrs:
                row.append(ordinal[nbrs[d]])
        rows.append(row)
    m = max(len(r) for r in rows)
    idx = np.zeros((n, m), dtype=np.intp)
    mask = np.zeros((n, m))
    for k, row in enumerate(rows):
        idx[k, : len(row)] = row
        idx[k, len(row):] = row[0]
        mask[k, : len(row)] = 1.0
    return idx, mask


def build_q_graph(g: Graph, pnodes: dict[str, Node], feats: np.ndarray,
                  nbr_idx: np.ndarray, nbr_mask: np.ndarray, config: CriticConfig) -> Node:
    """Q-values node [rows, 4] for a stack of per-intersection features."""
    x = g.relu(g.add(g.matmul(g.constant(feats), pnodes["embed.w"]), pnodes["embed.b"]))
    for layer in range(config.attention_layers):
        gathered = g.gather(x, nbr_idx)  # [rows, m, embed]
        heads = []
        for h in range(config.heads):
            base = f"attn{layer}.h{h}"
            q = g.matmul(x, pnodes[f"{base}.wq"])
            k = g.matmul(gathered, pnodes[f"{base}.wk"])
            v = g.matmul(gathered, pnodes[f"{base}.wv"])
            heads.append(g.attention(q, k, v, nbr_mask))
        cat = g.concat(heads, axis=-1)
        x = g.relu(g.add(g.matmul(cat, pnodes[f"attn{layer}.wo"]), pnodes[f"attn{layer}.bo"]))
    hidden = g.relu(g.add(g.matmul(x, pnodes["qhead.w1"]), pnodes["qhead.b1"]))
    return g.add(g.matmul(hidden, pnodes["qhead.w2"]), pnodes["qhead.b2"])


def stack_features(observations: dict, network: RoadNetwork) -> np.ndarray:
    missing = [iid for iid in network.real_ids if iid not in observations]
    if missing:
        raise ValueError(f"observations missing for {missing}")
    return np.stack([encode_obs(observations[iid]) for iid in network.real_ids])


def q_forward(params: dict[str, np.ndarray], observations: dict,
              network: RoadNetwork, config: CriticConfig | None = None) -> dict[str, QVector]:
    """Q-values for every real intersection (no gradients retained)."""
    config = config or CriticConfig()
    feats = stack_features(observations, network)
    idx, mask = neighbor_arrays(network)
    g = Graph()
    pnodes = {name: g.constant(value) for name, value in params.items()}
    out = build_q_graph(g, pnodes, feats, idx, mask, config).value
    return {iid: QVector(tuple(out[k])) for k, iid in enumerate(network.real_ids)}
