from .client import ENV_URL, EndpointConfig, LlmPolicy, TransportError, endpoint_from_env, llm_generate
from .mock import (
    MockPolicy,
    MockPolicyParams,
    ResponseSample,
    SamplingParams,
    default_template_bank,
    identify_template,
    init_mock_params,
    load_mock_params,
    mock_generate,
    mock_logprob,
    mock_logprob_node,
    prompt_features,
    save_mock_params,
)

__all__ = [
    "ENV_URL",
    "EndpointConfig",
    "LlmPolicy",
    "MockPolicy",
    "MockPolicyParams",
    "ResponseSample",
    "SamplingParams",
    "TransportError",
    "default_template_bank",
    "endpoint_from_env",
    "identify_template",
    "init_mock_params",
    "llm_generate",
    "load_mock_params",
    "mock_generate",
    "mock_logprob",
    "mock_logprob_node",
    "prompt_features",
    "save_mock_params",
]
