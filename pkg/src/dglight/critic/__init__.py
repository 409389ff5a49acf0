from .features import N_FEATURES, encode_obs
from .frozen import FrozenCritic, freeze, load_critic, save_critic
from .model import (
    CriticConfig,
    QVector,
    build_q_graph,
    init_critic_params,
    neighbor_arrays,
    q_forward,
    stack_features,
)
from .training import ReplayBuffer, Transition, bellman_loss, epsilon, train_critic

__all__ = [
    "N_FEATURES",
    "encode_obs",
    "FrozenCritic",
    "freeze",
    "load_critic",
    "save_critic",
    "CriticConfig",
    "QVector",
    "build_q_graph",
    "init_critic_params",
    "neighbor_arrays",
    "q_forward",
    "stack_features",
    "ReplayBuffer",
    "Transition",
    "bellman_loss",
    "epsilon",
    "train_critic",
]
