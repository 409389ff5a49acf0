"""HTTP client for an external completion endpoint.

Wire format: POST {model, prompt, n, temperature, top_p, top_k, max_tokens},
response {"choices": [{"text": ...}, ...]}.  Connection problems and malformed
bodies are retried with exponential backoff; a non-success status fails
immediately with a body excerpt.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests

from .mock import ResponseSample, SamplingParams

ENV_URL = "DGLIGHT_LLM_URL"


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str = "default"
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: float = 0.5


def endpoint_from_env(model: str = "default") -> EndpointConfig:
    url = os.environ.get(ENV_URL)
    if not url:
        raise TransportError(f"no endpoint configured (set {ENV_URL} or pass --llm-url)")
    return EndpointConfig(base_url=url, model=model)


def llm_generate(endpoint: EndpointConfig, prompt: str, k: int,
                 sampling: SamplingParams) -> list[ResponseSample]:
    """Request k completions; returns text-only samples in response order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    body = {
        "model": endpoint.model,
        "prompt": prompt,
        "n": k,
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "top_k": sampling.top_k,
        "max_tokens": sampling.max_tokens,
    }
    last_error: Exception | None = None
    for attempt in range(endpoint.max_attempts):
        if attempt:
            time.sleep(endpoint.backoff_s * (2 ** (attempt - 1)))
        try:
            resp = requests.post(endpoint.base_url, json=body, timeout=endpoint.timeout_s)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if resp.status_code != 200:
            excerpt = resp.text[:200]
            raise TransportError(f"endpoint returned status {resp.status_code}: {excerpt}")
        try:
            data = resp.json()
            texts = [c["text"] for c in data["choices"]]
        except (ValueError, KeyError, TypeError) as exc:
            last_error = TransportError(f"malformed endpoint response: {exc}")
            continue
        if len(texts) != k:
            last_error = TransportError(f"endpoint returned {len(texts)} choices, expected {k}")
            continue
        return [ResponseSample(text=t) for t in texts]
    raise TransportError(f"endpoint failed after {endpoint.max_attempts} attempts: {last_error}")


class LlmPolicy:
    """Policy handle backed by the HTTP endpoint (log-probabilities unavailable)."""

    def __init__(self, endpoint: EndpointConfig, sampling: SamplingParams = SamplingParams()):
        self.endpoint = endpoint
        self.sampling = sampling

    def generate(self, prompt_text: str, k: int, seed: int) -> list[ResponseSample]:
        # remote sampling owns its randomness; the seed is part of the local
        # interface only
        return llm_generate(self.endpoint, prompt_text, k, self.sampling)
