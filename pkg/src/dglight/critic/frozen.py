"""Frozen critic handle used by the rollout scorer.

A FrozenCritic owns an immutable copy of the parameters; any attempt to
update it raises. Checkpoints embed the CriticConfig so a loaded critic
scores exactly as the one that was saved.
"""

from __future__ import annotations

import numpy as np

from ..numerics import load_tensors, save_tensors
from ..sim import RoadNetwork
from .model import CriticConfig, QVector, q_forward


class FrozenCritic:
    """Read-only Q scorer bound to one network topology."""

    def __init__(self, params: dict[str, np.ndarray], network: RoadNetwork,
                 config: CriticConfig | None = None):
        self._params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        for v in self._params.values():
            v.setflags(write=False)
        self._network = network
        self._config = config or CriticConfig()

    @property
    def config(self) -> CriticConfig:
        return self._config

    @property
    def network(self) -> RoadNetwork:
        return self._network

    @property
    def params(self) -> dict[str, np.ndarray]:
        return dict(self._params)

    def q_values(self, observations: dict) -> dict[str, QVector]:
        """Q vectors for every observed intersection, batched in one pass."""
        return q_forward(self._params, observations, self._network, self._config)

    def update(self, *args, **kwargs):
        raise RuntimeError("critic is frozen; updates are not allowed")

    step = update
    train = update


def freeze(params: dict[str, np.ndarray], network: RoadNetwork,
           config: CriticConfig | None = None) -> FrozenCritic:
    return FrozenCritic(params, network, config)


def save_critic(path, params: dict[str, np.ndarray], config: CriticConfig) -> None:
    save_tensors(path, params, extra={"critic_config": config.to_dict()})


def load_critic(path, network: RoadNetwork) -> FrozenCritic:
    tensors, extra = load_tensors(path)
    raw = extra.get("critic_config")
    if raw is None:
        raise ValueError("checkpoint missing critic_config")
    return FrozenCritic(tensors, network, CriticConfig.from_dict(raw))
