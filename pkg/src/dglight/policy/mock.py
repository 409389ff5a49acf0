"""Differentiable mock template policy.

A 36-feature linear map picks a phase through a temperature softmax; the
response text is a fixed reasoning template for that phase, chosen uniformly.
Log-probabilities are exact (log softmax(phase) + log 1/|templates|), so the
policy exercises the full rollout/GRPO interfaces of a real LLM while staying
differentiable.

Features are re-parsed from the prompt text (the 32 lane counts; the phase
slots stay zero since the prompt does not state the current phase), the same
encoding at sampling and training time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..numerics import Graph, Node, tensor
from ..seeding import rng_from
from ..sim import CONTROLLED_LANE_ORDER, PHASE_MOVEMENTS, PHASES, SignalPhase
from ..prompting import parse_response

N_FEATURES = 36
N_PHASES = 4

_PHASE_LANE_TEXT = {
    SignalPhase.ETWT: "eastern and western through lanes",
    SignalPhase.NTST: "northern and southern through lanes",
    SignalPhase.ELWL: "eastern and western left-turn lanes",
    SignalPhase.NLSL: "northern and southern left-turn lanes",
}

_SKELETONS = (
    "### Step 1: Analysis\n\nThe heaviest pressure sits on the {lanes}; releasing "
    "them first clears the most queued demand at this intersection.\n\n"
    "### Step 2: Answer\n\n<signal>{name}</signal>",
    "### Step 1: Analysis\n\nComparing queue lengths and nearby approaching "
    "vehicles across all four movements, the {lanes} stand out as the bottleneck "
    "for the coming interval.\n\n### Step 2: Answer\n\nThe best choice is "
    "<signal>{name}</signal>.",
    "### Step 1: Analysis\n\nEarly queued vehicles dominate the delay, and right "
    "now they concentrate in the {lanes}. Serving them yields the largest "
    "immediate relief.\n\n### Step 2: Answer\n\n<signal>{name}</signal>",
)


def default_template_bank() -> tuple[tuple[str, ...], ...]:
    return tuple(
        tuple(s.format(lanes=_PHASE_LANE_TEXT[p], name=p.name) for s in _SKELETONS)
        for p in PHASES
    )


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_p: float = 1.0
    top_k: int = 50
    max_tokens: int = 1024
    n: int = 1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1 or self.max_tokens < 1 or self.n < 1:
            raise ValueError("top_k, max_tokens and n must be >= 1")


@dataclass(frozen=True)
class ResponseSample:
    text: str
    phase: SignalPhase | None = None     # mock only
    logprob: float | None = None         # mock only


@dataclass(frozen=True)
class MockPolicyParams:
    weight: np.ndarray  # [36, 4]
    bias: np.ndarray    # [4]
    templates: tuple[tuple[str, ...], ...] = field(default_factory=default_template_bank)

    def __post_init__(self):
        object.__setattr__(self, "weight", tensor(self.weight))
        object.__setattr__(self, "bias", tensor(self.bias))
        if self.weight.shape != (N_FEATURES, N_PHASES) or self.bias.shape != (N_PHASES,):
            raise ValueError("mock policy needs weight [36,4] and bias [4]")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("mock policy params must be finite")
        if len(self.templates) != N_PHASES or any(len(t) < 2 for t in self.templates):
            raise ValueError("template bank needs >= 2 templates per phase")
        for p, bank in zip(PHASES, self.templates):
            for t in bank:
                parsed = parse_response(t)
                if not parsed.valid or parsed.phase != p:
                    raise ValueError(f"template for {p.name} must carry exactly one matching tag")

    def replace(self, weight=None, bias=None) -> "MockPolicyParams":
        return MockPolicyParams(
            weight=self.weight if weight is None else weight,
            bias=self.bias if bias is None else bias,
            templates=self.templates,
        )


def init_mock_params(seed: int = 0, init_scale: float = 0.0) -> MockPolicyParams:
    """Zero init (uniform policy) by default; optional small random init."""
    if init_scale > 0:
        rng = rng_from(seed, "mock-init")
        w = rng.normal(0.0, init_scale, size=(N_FEATURES, N_PHASES))
        b = rng.normal(0.0, init_scale, size=(N_PHASES,))
    else:
        w = np.zeros((N_FEATURES, N_PHASES))
        b = np.zeros(N_PHASES)
    return MockPolicyParams(weight=w, bias=b)


def save_mock_params(path, params: MockPolicyParams) -> None:
    """Checkpoint weight/bias; the template bank is code, not data."""
    from ..numerics import save_tensors

    save_tensors(path, {"weight": params.weight, "bias": params.bias},
                 extra={"kind": "mock-policy"})


def load_mock_params(path) -> MockPolicyParams:
    from ..numerics import load_tensors

    tensors, extra = load_tensors(path)
    if extra.get("kind") != "mock-policy":
        raise ValueError("checkpoint is not a mock-policy checkpoint")
    return MockPolicyParams(weight=tensors["weight"], bias=tensors["bias"])


def _phase_log_probs(params: MockPolicyParams, features: np.ndarray, temperature: float) -> np.ndarray:
    logits = features @ params.weight + params.bias
    scaled = logits / temperature
    shifted = scaled - scaled.max()
    return shifted - np.log(np.exp(shifted).sum())


def mock_generate(params: MockPolicyParams, features: np.ndarray, k: int,
                  sampling: SamplingParams, seed: int) -> list[ResponseSample]:
    """Sample k templated responses; reproducible per seed.

    top_p/top_k are validated but cannot bind with four categories at the
    default settings; temperature is the only sampling knob applied.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    features = np.asarray(features, dtype=np.float64).reshape(N_FEATURES)
    log_probs = _phase_log_probs(params, features, sampling.temperature)
    probs = np.exp(log_probs)
    probs = probs / probs.sum()
    rng = rng_from(seed)
    n_templates = len(params.templates[0])
    lp_template = np.log(1.0 / n_templates)
    out = []
    for _ in range(k):
        phase = SignalPhase(int(rng.choice(N_PHASES, p=probs)))
        t_idx = int(rng.integers(0, n_templates))
        out.append(ResponseSample(
            text=params.templates[phase][t_idx],
            phase=phase,
            logprob=float(log_probs[phase] + lp_template),
        ))
    return out


def identify_template(params: MockPolicyParams, text: str) -> tuple[SignalPhase, int]:
    for p, bank in zip(PHASES, params.templates):
        for t_idx, t in enumerate(bank):
            if t == text:
                return p, t_idx
    raise ValueError("response text does not match any template in the bank")


def mock_logprob(params: MockPolicyParams, features: np.ndarray, response: ResponseSample,
                 sampling: SamplingParams = SamplingParams()) -> float:
    """Log-probability of a templated response under the current params."""
    phase, _ = identify_template(params, response.text)
    features = np.asarray(features, dtype=np.float64).reshape(N_FEATURES)
    log_probs = _phase_log_probs(params, features, sampling.temperature)
    return float(log_probs[phase] + np.log(1.0 / len(params.templates[0])))


def mock_logprob_node(g: Graph, weight: Node, bias: Node, features: np.ndarray,
                      phase: SignalPhase, n_templates: int, temperature: float) -> Node:
    """Graph node for one response's log-probability (for GRPO and grad checks)."""
    f = g.constant(np.asarray(features, dtype=np.float64).reshape(1, N_FEATURES))
    logits = g.add(g.matmul(f, weight), bias)
    scaled = g.div(logits, g.constant(float(temperature)))
    logp = g.log(g.softmax(scaled, axis=-1))
    onehot = np.zeros((1, N_PHASES))
    onehot[0, int(phase)] = 1.0
    selected = g.sum(g.mul(logp, g.constant(onehot)))
    return g.add(selected, g.constant(float(np.log(1.0 / n_templates))))


# -- prompt features --------------------------------------------------------------

_COUNT_LINE = re.compile(
    r"- (Early queued|Segment 1|Segment 2|Segment 3): (\d+) \((?:East|North)\), "
    r"(\d+) \((?:West|South)\), \d+ \(Total\)"
)

_METRIC_SLOT = {"Early queued": 0, "Segment 1": 1, "Segment 2": 2, "Segment 3": 3}
_LANE_SLOT = {key: i for i, key in enumerate(CONTROLLED_LANE_ORDER)}


def prompt_features(prompt_text: str) -> np.ndarray:
    """36-dim feature vector re-parsed from a rendered prompt.

    The prompt lists four count lines per phase block in canonical order;
    the four phase one-hot slots stay zero (the prompt omits the phase).
    """
    matches = _COUNT_LINE.findall(prompt_text)
    if len(matches) != 16:
        raise ValueError(f"prompt does not look like the canonical template ({len(matches)} count lines)")
    feats = np.zeros(N_FEATURES)
    for block, phase in enumerate(PHASES):
        lane_a, lane_b = PHASE_MOVEMENTS[phase]
        for row in range(4):
            label, a, b = matches[block * 4 + row]
            metric = _METRIC_SLOT[label]
            feats[_LANE_SLOT[lane_a] * 4 + metric] = float(a)
            feats[_LANE_SLOT[lane_b] * 4 + metric] = float(b)
    return feats


class MockPolicy:
    """Policy handle: generate(prompt_text, k, seed) -> ResponseSamples."""

    def __init__(self, params: MockPolicyParams | None = None,
                 sampling: SamplingParams = SamplingParams()):
        self.params = params if params is not None else init_mock_params()
        self.sampling = sampling

    def generate(self, prompt_text: str, k: int, seed: int) -> list[ResponseSample]:
        return mock_generate(self.params, prompt_features(prompt_text), k, self.sampling, seed)
