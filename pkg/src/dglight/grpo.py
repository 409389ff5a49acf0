"""Group-relative policy optimization over stored rollout records.

Collect-then-train: records carry full QVectors, so freshly sampled
completions for a stored prompt are rewarded by table lookup instead of
re-running the simulator. Advantages are normalized within each sampling
group and drive a clipped-surrogate update of the mock policy.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .numerics import Adam, Graph
from .policy import (
    MockPolicyParams,
    ResponseSample,
    SamplingParams,
    identify_template,
    mock_generate,
    mock_logprob,
    mock_logprob_node,
    prompt_features,
)
from .prompting import parse_response
from .rollout import RolloutRecord
from .seeding import seed_parts

EXPORT_SCHEMA = "grpo-dataset"
EXPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GRPOConfig:
    group_size: int = 4
    learning_rate: float = 1e-2
    clip_epsilon: float = 0.2
    kl_coeff: float = 0.0
    std_stabilizer: float = 1e-4
    epochs: int = 1
    batch_records: int = 8
    r_invalid: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group size must be >= 2 for nondegenerate normalization")
        if self.clip_epsilon <= 0:
            raise ValueError("clip epsilon must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.std_stabilizer < 0:
            raise ValueError("std stabilizer must be >= 0")
        if self.epochs < 1 or self.batch_records < 1:
            raise ValueError("epochs and batch_records must be >= 1")


@dataclass(frozen=True)
class Group:
    """One prompt's sampling group with rewards, advantages, old log-probs."""

    provenance: str
    features: np.ndarray
    completions: tuple[ResponseSample, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    old_logprobs: tuple[float, ...]

    def __post_init__(self):
        n = len(self.completions)
        if not (len(self.rewards) == len(self.advantages) == len(self.old_logprobs) == n):
            raise ValueError("group fields must have equal lengths")
        if n == 0:
            raise ValueError("empty group")


def reward_lookup(record: RolloutRecord, completion_text: str, r_invalid: float = 0.0) -> float:
    """Reward a completion against the record's stored QVector."""
    parsed = parse_response(completion_text)
    if parsed.valid:
        return float(record.q_values[parsed.phase])
    return float(r_invalid)


def group_advantages(rewards, std_stabilizer: float = 0.0) -> tuple[float, ...]:
    """(r - mean) / (population std + stabilizer); degenerate groups get zeros."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty reward list")
    std = float(r.std())
    if std == 0.0:
        return (0.0,) * r.size
    return tuple(((r - r.mean()) / (std + std_stabilizer)).tolist())


def build_group(record: RolloutRecord, params: MockPolicyParams, cfg: GRPOConfig,
                sampling: SamplingParams, seed: int,
                use_stored_candidates: bool = False) -> Group:
    """Sampling group for one record.

    Default mode resamples the mock policy at training time; fixture mode
    reuses the record's rollout-time candidate texts (they must come from
    the same template bank or logprob computation fails).
    """
    features = prompt_features(record.prompt.text)
    if use_stored_candidates:
        completions = tuple(ResponseSample(c.text) for c in record.candidates)
    else:
        completions = tuple(mock_generate(params, features, cfg.group_size, sampling, seed))
    rewards = tuple(reward_lookup(record, c.text, cfg.r_invalid) for c in completions)
    advantages = tuple(group_advantages(rewards, cfg.std_stabilizer))
    old_lp = tuple(mock_logprob(params, features, c, sampling) for c in completions)
    return Group(
        provenance=f"step={record.step} intersection={record.intersection}",
        features=features,
        completions=completions,
        rewards=rewards,
        advantages=advantages,
        old_logprobs=old_lp,
    )


def _surrogate_node(g: Graph, w, b, groups: list[Group], params: MockPolicyParams,
                    cfg: GRPOConfig, sampling: SamplingParams):
    """(objective node, ratio values) for the clipped surrogate over all completions."""
    n_templates = len(params.templates[0])
    lo, hi = 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon
    total = None
    ratios = []
    count = 0
    for grp in groups:
        for j, sample in enumerate(grp.completions):
            phase, _ = identify_template(params, sample.text)
            lp = mock_logprob_node(g, w, b, grp.features, phase, n_templates,
                                   sampling.temperature)
            ratio = g.exp(g.sub(lp, g.constant(float(grp.old_logprobs[j]))))
            ratios.append(float(np.asarray(ratio.value).reshape(())))
            adv = g.constant(float(grp.advantages[j]))
            term = g.minimum(g.mul(ratio, adv), g.mul(g.clip(ratio, lo, hi), adv))
            total = term if total is None else g.add(total, term)
            count += 1
    objective = g.div(total, g.constant(float(count)))
    return objective, ratios


def _kl_node(g: Graph, w, b, groups: list[Group], old_params: MockPolicyParams,
             sampling: SamplingParams):
    """Mean exact categorical KL(current || old) over group prompts."""
    from .policy.mock import N_FEATURES, _phase_log_probs

    total = None
    for grp in groups:
        f = g.constant(grp.features.reshape(1, N_FEATURES))
        logits = g.add(g.matmul(f, w), b)
        p_cur = g.softmax(g.div(logits, g.constant(float(sampling.temperature))), axis=-1)
        log_cur = g.log(p_cur)
        log_old = _phase_log_probs(old_params, grp.features, sampling.temperature)
        gap = g.sub(log_cur, g.constant(log_old.reshape(1, -1)))
        kl = g.sum(g.mul(p_cur, gap))
        total = kl if total is None else g.add(total, kl)
    return g.div(total, g.constant(float(len(groups))))


def grpo_step(params: MockPolicyParams, groups: list[Group], old_params: MockPolicyParams,
              cfg: GRPOConfig, sampling: SamplingParams = SamplingParams(),
              optimizer: Adam | None = None):
    """One Adam ascent step on the clipped surrogate.

    Returns (updated params, diagnostics, optimizer). Pass the returned
    optimizer back in to keep moment estimates across calls.
    """
    if not groups:
        raise ValueError("no groups")
    if optimizer is None:
        optimizer = Adam({"weight": params.weight, "bias": params.bias},
                         lr=cfg.learning_rate)
    g = Graph()
    w = g.leaf(optimizer.params["weight"])
    b = g.leaf(optimizer.params["bias"])
    objective, ratios = _surrogate_node(g, w, b, groups, params, cfg, sampling)
    surrogate_value = float(np.asarray(objective.value).reshape(()))
    kl_value = 0.0
    if cfg.kl_coeff > 0.0:
        kl = _kl_node(g, w, b, groups, old_params, sampling)
        kl_value = float(np.asarray(kl.value).reshape(()))
        objective = g.sub(objective, g.mul(g.constant(cfg.kl_coeff), kl))
    loss = g.neg(objective)
    gw, gb = g.gradient(loss, [w, b])
    new = optimizer.step({"weight": gw, "bias": gb})
    updated = params.replace(weight=new["weight"], bias=new["bias"])
    r = np.asarray(ratios)
    diagnostics = {
        "surrogate": surrogate_value,
        "kl": kl_value,
        "mean_ratio": float(r.mean()),
        "clipped_fraction": float(np.mean((r < 1.0 - cfg.clip_epsilon) | (r > 1.0 + cfg.clip_epsilon))),
        "completions": int(r.size),
    }
    return updated, diagnostics, optimizer


def grpo_train(records: list[RolloutRecord], params: MockPolicyParams, cfg: GRPOConfig,
               sampling: SamplingParams = SamplingParams(),
               use_stored_candidates: bool = False):
    """Epoch/batch driver: resample groups per record, step per batch.

    The old-params copy is taken at the start of each epoch and stays fixed
    while the current params drift across that epoch's batches. Returns
    (trained params, diagnostics rows).
    """
    if not records:
        raise ValueError("no records to train on")
    rows = []
    optimizer = None
    for epoch in range(cfg.epochs):
        old_params = params
        order = list(range(len(records)))
        rng = np.random.default_rng(seed_parts(cfg.seed, "grpo-order", epoch))
        rng.shuffle(order)
        for bstart in range(0, len(order), cfg.batch_records):
            batch = order[bstart:bstart + cfg.batch_records]
            groups = []
            for ridx in batch:
                gseed = sum(seed_parts(cfg.seed, "grpo-sample", epoch, ridx)) & 0x7FFFFFFF
                groups.append(build_group(records[ridx], old_params, cfg, sampling,
                                          gseed, use_stored_candidates))
            params, diag, optimizer = grpo_step(params, groups, old_params, cfg,
                                                sampling, optimizer)
            diag.update({"epoch": epoch, "batch": bstart // cfg.batch_records,
                         "records": len(batch)})
            rows.append(diag)
    return params, rows


def collect_then_train(env_factory, critic, params: MockPolicyParams,
                       rollout_cfg, grpo_cfg: GRPOConfig, episodes: int = 2,
                       sampling: SamplingParams = SamplingParams()):
    """Alternate rollout collection and GRPO training for a few episodes.

    Each episode collects with the current params, then trains on that
    episode's records. Returns (params, per-episode RolloutResults, rows).
    """
    from .policy import MockPolicy
    from .rollout import collect_episode

    results = []
    rows = []
    for ep in range(episodes):
        state = env_factory()
        policy = MockPolicy(params, sampling)
        ep_seed = sum(seed_parts(rollout_cfg.seed, "episode", ep)) & 0x7FFFFFFF
        rcfg = dataclasses.replace(rollout_cfg, seed=ep_seed)
        result = collect_episode(state, policy, critic, rcfg)
        results.append(result)
        if not result.records:
            continue
        gcfg = dataclasses.replace(grpo_cfg, seed=ep_seed)
        params, ep_rows = grpo_train(result.records, params, gcfg, sampling)
        for r in ep_rows:
            r["episode"] = ep
        rows.extend(ep_rows)
    return params, results, rows


# -- dataset export ----------------------------------------------------------------


def export_dataset(records: list[RolloutRecord], path, r_invalid: float = 0.0) -> int:
    """Write (prompt, q_values, r_invalid, provenance) lines for external trainers."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"schema": EXPORT_SCHEMA, "version": EXPORT_SCHEMA_VERSION}) + "\n")
        for r in records:
            f.write(json.dumps({
                "prompt": r.prompt.text,
                "q_values": list(r.q_values.values),
                "r_invalid": r_invalid,
                "provenance": {"step": r.step, "intersection": r.intersection},
            }) + "\n")
    return len(records)


def load_dataset(path) -> list[dict]:
    """Read an exported dataset; q_values come back as plain float lists."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError("line 1: missing schema header")
    header = json.loads(lines[0])
    if header.get("schema") != EXPORT_SCHEMA or header.get("version") != EXPORT_SCHEMA_VERSION:
        raise ValueError(f"line 1: unsupported schema {header!r}")
    out = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {n}: malformed entry ({exc})") from exc
    return out
