"""Adam with bias correction.

Update rule (epsilon inside the square root):

    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g^2
    p <- p - lr * mhat / sqrt(vhat + eps)

A zero gradient therefore leaves the parameter bitwise unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, tensor


@dataclass
class AdamState:
    m: Tensor
    v: Tensor
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(param: Tensor, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    param = np.asarray(param)
    return AdamState(m=np.zeros_like(param, dtype=np.float64),
                     v=np.zeros_like(param, dtype=np.float64),
                     beta1=beta1, beta2=beta2, eps=eps)


def adam_step(param: Tensor, grad: Tensor, state: AdamState, lr: float) -> Tensor:
    """One Adam update. Mutates ``state``, returns the new parameter."""
    param = tensor(param)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != param.shape:
        raise ValueError(f"grad shape {grad.shape} != param shape {param.shape}")
    if state.m.shape != param.shape:
        raise ValueError(f"optimizer state shape {state.m.shape} != param shape {param.shape}")
    if not np.isfinite(grad).all():
        raise ValueError("non-finite gradient")

    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    mhat = state.m / (1.0 - state.beta1 ** t)
    vhat = state.v / (1.0 - state.beta2 ** t)
    return param - lr * mhat / np.sqrt(vhat + state.eps)


@dataclass
class Adam:
    """Convenience wrapper managing one AdamState per named parameter."""

    params: dict[str, Tensor]
    lr: float
    states: dict[str, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        self.params = {k: tensor(v) for k, v in self.params.items()}
        for name, p in self.params.items():
            self.states.setdefault(name, adam_init(p))

    def step(self, grads: dict[str, Tensor]) -> dict[str, Tensor]:
        unknown = set(grads) - set(self.params)
        if unknown:
            raise ValueError(f"grads for unknown params: {sorted(unknown)}")
        for name, g in grads.items():
            self.params[name] = adam_step(self.params[name], g, self.states[name], self.lr)
        return self.params
