"""Candidate-sampling rollout scored by a frozen critic.

At every decision boundary each real intersection gets a rendered prompt, k
sampled responses, and a critic QVector. Valid candidates earn the Q value of
their proposed phase, invalid ones earn r_invalid, and the best-scoring
candidate's phase is executed. Records keep the full QVector so any later
completion for the same prompt can be rewarded offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .critic import FrozenCritic, QVector
from .policy import TransportError
from .prompting import ParseResult, PromptText, parse_response, render_prompt
from .seeding import seed_parts
from .sim import (
    PHASE_NAMES,
    SignalPhase,
    SimState,
    apply_actions,
    metrics,
    observe_all,
    run_to_boundary,
)
from .sim.metrics import MetricsReport

RECORD_SCHEMA = "rollout-records"
RECORD_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RolloutConfig:
    k: int = 4
    r_invalid: float = 0.0
    episode_s: int = 3600
    interval_s: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.interval_s <= 0 or self.episode_s <= 0:
            raise ValueError("episode and interval must be positive")
        if self.episode_s % self.interval_s:
            raise ValueError("interval must divide episode length")

    @property
    def rounds(self) -> int:
        return self.episode_s // self.interval_s


@dataclass(frozen=True)
class Candidate:
    text: str
    parse: ParseResult
    reward: float


@dataclass(frozen=True)
class RolloutRecord:
    step: int
    intersection: str
    prompt: PromptText
    q_values: QVector
    candidates: tuple[Candidate, ...]
    executed: SignalPhase
    fallback: bool
    js_meta: dict | None = None


@dataclass(frozen=True)
class RolloutResult:
    records: list[RolloutRecord]
    metrics: MetricsReport
    truncated: bool = False
    error: str | None = None


def score_candidates(q: QVector, parses: list[ParseResult], r_invalid: float) -> list[float]:
    """Valid(a) earns q[a]; anything invalid earns r_invalid."""
    return [float(q[p.phase]) if p.valid else float(r_invalid) for p in parses]


def select_executed(rewards: list[float], parses: list[ParseResult],
                    q: QVector) -> tuple[SignalPhase, bool]:
    """Highest-reward candidate's phase; ties go to the lowest index.

    When the winning candidate is invalid (including the all-invalid case,
    where every reward is the same fallback constant) the critic argmax is
    executed instead, flagged as a fallback event.
    """
    if len(rewards) != len(parses):
        raise ValueError("rewards and parses must align")
    best = 0
    for j in range(1, len(rewards)):
        if rewards[j] > rewards[best]:
            best = j
    if parses[best].valid:
        return parses[best].phase, False
    return q.argmax(), True


def collect_episode(state: SimState, policy, critic: FrozenCritic,
                    cfg: RolloutConfig) -> RolloutResult:
    """Run one full episode of sample-score-execute collection.

    A policy transport failure aborts the episode; the records gathered so
    far come back with the truncated flag set so callers can persist them
    with a marker instead of losing the episode.
    """
    records: list[RolloutRecord] = []
    network = state.network
    for step_i in range(cfg.rounds):
        run_to_boundary(state)
        obs = observe_all(state)
        q_all = critic.q_values(obs)
        joint: dict[str, SignalPhase] = {}
        for iid in network.real_ids:
            prompt = render_prompt(obs[iid], step=step_i)
            per_call = sum(seed_parts(cfg.seed, "rollout", step_i, iid)) & 0x7FFFFFFF
            try:
                samples = policy.generate(prompt.text, cfg.k, per_call)
            except TransportError as exc:
                return RolloutResult(records, metrics(state), truncated=True, error=str(exc))
            texts = [s.text for s in samples]
            parses = [parse_response(t) for t in texts]
            rewards = score_candidates(q_all[iid], parses, cfg.r_invalid)
            executed, fallback = select_executed(rewards, parses, q_all[iid])
            records.append(RolloutRecord(
                step=step_i,
                intersection=iid,
                prompt=prompt,
                q_values=q_all[iid],
                candidates=tuple(Candidate(t, p, r) for t, p, r in zip(texts, parses, rewards)),
                executed=executed,
                fallback=fallback,
            ))
            joint[iid] = executed
        apply_actions(state, joint)
    run_to_boundary(state)
    return RolloutResult(records, metrics(state))


# -- persistence -----------------------------------------------------------------


def _record_to_dict(r: RolloutRecord) -> dict:
    d = {
        "step": r.step,
        "intersection": r.intersection,
        "prompt": r.prompt.text,
        "q_values": list(r.q_values.values),
        "candidates": [
            {"text": c.text,
             "parse": {"phase": c.parse.phase.name if c.parse.valid else None,
                       "reason": c.parse.reason},
             "reward": c.reward}
            for c in r.candidates
        ],
        "executed": r.executed.name,
        "fallback": r.fallback,
    }
    if r.js_meta is not None:
        d["js_meta"] = r.js_meta
    return d


def _record_from_dict(d: dict) -> RolloutRecord:
    parses = []
    cands = []
    for c in d["candidates"]:
        p = c["parse"]
        phase = SignalPhase[p["phase"]] if p["phase"] is not None else None
        cands.append(Candidate(c["text"], ParseResult(phase, p["reason"]), float(c["reward"])))
    executed = d["executed"]
    if executed not in PHASE_NAMES:
        raise ValueError(f"unknown executed phase {executed!r}")
    return RolloutRecord(
        step=int(d["step"]),
        intersection=d["intersection"],
        prompt=PromptText(d["prompt"], intersection=d["intersection"], step=int(d["step"])),
        q_values=QVector(tuple(float(v) for v in d["q_values"])),
        candidates=tuple(cands),
        executed=SignalPhase[executed],
        fallback=bool(d["fallback"]),
        js_meta=d.get("js_meta"),
    )


def persist_records(records: list[RolloutRecord], path, *, truncated: bool = False,
                    error: str | None = None) -> int:
    """Write records as line-delimited JSON under a schema header.

    A truncated collection appends a marker line after the records so the
    file is still loadable and the interruption is visible.
    """
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"schema": RECORD_SCHEMA, "version": RECORD_SCHEMA_VERSION}) + "\n")
        for r in records:
            f.write(json.dumps(_record_to_dict(r)) + "\n")
        if truncated:
            f.write(json.dumps({"truncated": True, "error": error or ""}) + "\n")
    return len(records)


def load_records_info(path) -> tuple[list[RolloutRecord], bool, str | None]:
    """(records, truncated, error); malformed lines fail with their line number."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError("line 1: missing schema header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"line 1: malformed header ({exc})") from exc
    if header.get("schema") != RECORD_SCHEMA or header.get("version") != RECORD_SCHEMA_VERSION:
        raise ValueError(f"line 1: unsupported schema {header!r}")

    records: list[RolloutRecord] = []
    truncated = False
    error = None
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if truncated:
            raise ValueError(f"line {n}: content after truncation marker")
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {n}: malformed record ({exc})") from exc
        if d.get("truncated"):
            truncated = True
            error = d.get("error") or None
            continue
        try:
            records.append(_record_from_dict(d))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {n}: bad record ({exc})") from exc
    return records, truncated, error


def load_records(path) -> list[RolloutRecord]:
    records, _, _ = load_records_info(path)
    return records
