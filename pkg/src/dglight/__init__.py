"""dglight: traffic-signal control where a frozen graph-attention critic scores
LLM-style candidate actions and the policy is tuned with group-relative
policy optimization.
"""

from .critic import (
    CriticConfig,
    FrozenCritic,
    QVector,
    freeze,
    load_critic,
    save_critic,
    train_critic,
)
from .grpo import GRPOConfig, collect_then_train, export_dataset, group_advantages, grpo_step, grpo_train, reward_lookup
from .jsgrpo import JSConfig, align_candidates, collect_episode_js, evaluate_candidate, mixed_reward, project_scores
from .policy import LlmPolicy, MockPolicy, SamplingParams, init_mock_params
from .prompting import parse_response, render_prompt
from .rollout import (
    RolloutConfig,
    RolloutRecord,
    collect_episode,
    load_records,
    persist_records,
    score_candidates,
    select_executed,
)
from .run import (
    make_critic_greedy,
    make_fixed_time,
    make_max_pressure,
    make_policy_controller,
    make_random,
    run_episode,
)
from .sim import MetricsReport, RoadNetwork, SignalPhase, SimConfig, SimState, build_grid, build_sim, metrics

__version__ = "0.1.0"

__all__ = [
    "CriticConfig",
    "FrozenCritic",
    "GRPOConfig",
    "JSConfig",
    "LlmPolicy",
    "MetricsReport",
    "MockPolicy",
    "QVector",
    "RoadNetwork",
    "RolloutConfig",
    "RolloutRecord",
    "SamplingParams",
    "SignalPhase",
    "SimConfig",
    "SimState",
    "align_candidates",
    "build_grid",
    "build_sim",
    "collect_episode",
    "collect_episode_js",
    "collect_then_train",
    "evaluate_candidate",
    "export_dataset",
    "freeze",
    "group_advantages",
    "grpo_step",
    "grpo_train",
    "init_mock_params",
    "load_critic",
    "load_records",
    "make_critic_greedy",
    "make_fixed_time",
    "make_max_pressure",
    "make_policy_controller",
    "make_random",
    "metrics",
    "mixed_reward",
    "parse_response",
    "persist_records",
    "project_scores",
    "render_prompt",
    "reward_lookup",
    "run_episode",
    "save_critic",
    "score_candidates",
    "select_executed",
    "train_critic",
    "__version__",
]
