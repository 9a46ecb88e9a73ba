"""
Adam with bias correction, updating parameter arrays in place.
"""
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import NonFiniteGradientError, ShapeMismatchError


@dataclass
class AdamState:
    """First and second moment estimates and the step counter."""
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> 'AdamState':
        return cls(
            m=[np.zeros_like(param) for param in params],
            v=[np.zeros_like(param) for param in params],
        )


def adam_step(
        params: Sequence[np.ndarray],
        grads: Sequence[np.ndarray],
        state: AdamState,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8) -> AdamState:
    """Applies one Adam update to ``params``.

    All gradients are checked first: when any of them is not finite, nothing is
    updated and :class:`NonFiniteGradientError` is raised.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatchError(
            f"{len(params)} parameters, {len(grads)} gradients and {len(state.m)} moment estimates"
        )
    for index, (param, grad) in enumerate(zip(params, grads)):
        if param.shape != grad.shape:
            raise ShapeMismatchError(f"parameter {index} has shape {param.shape}, gradient {grad.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"gradient {index} is not finite, step refused")

    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for param, grad, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad ** 2
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


class Adam:
    """Optimizer bound to a fixed list of parameter arrays."""

    def __init__(self, params: Sequence[np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def step(self, grads: Sequence[np.ndarray], lr: float):
        adam_step(self.params, grads, self.state, lr, self.beta1, self.beta2, self.eps)


__all__ = [
    'AdamState',
    'adam_step',
    'Adam',
]
