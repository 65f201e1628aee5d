"""The two optimizers of the training loops: plain SGD for classifiers and the server-side
moment optimizer for the generator.

``adam_step_literal``: moments are reset by the caller at every outer server iteration and
the bias correction divides by the fixed (1 - b1), (1 - b2) rather than (1 - b1^k), (1 - b2^k).
``bias_correction="textbook"`` selects the step-powered form.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from diffcore.graph import ContractViolation
from models.parameter_set import ParameterSet

LITERAL = "literal"
TEXTBOOK = "textbook"


def sgd_step(params: ParameterSet, grads: Mapping[str, np.ndarray], lr: float) -> ParameterSet:
    """p <- p - lr * g for every parameter; returns a new ParameterSet."""
    if lr <= 0:
        raise ContractViolation(f"learning rate must be positive, got {lr}")
    updated = {}
    for key, value in params.items():
        if key not in grads:
            raise ContractViolation(f"missing gradient for parameter: {key}")
        grad = np.asarray(grads[key], dtype=np.float64)
        if grad.shape != value.shape:
            raise ContractViolation(f"gradient shape {grad.shape} does not match {key} {value.shape}")
        updated[key] = value - lr * grad
    return ParameterSet(updated)


@dataclass
class AdamState:
    b1: float = 0.5
    b2: float = 0.999
    lr: float = 2e-4
    bias_correction: str = LITERAL
    eps: float = 1e-8
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if not (0 < self.b1 < 1 and 0 < self.b2 < 1):
            raise ContractViolation(f"moment coefficients must lie in (0, 1): b1={self.b1}, b2={self.b2}")
        if self.lr <= 0:
            raise ContractViolation(f"learning rate must be positive, got {self.lr}")
        if self.bias_correction not in (LITERAL, TEXTBOOK):
            raise ContractViolation(f"unknown bias correction: {self.bias_correction}")

    @classmethod
    def zeros_like(cls, params: ParameterSet, **hyper) -> "AdamState":
        state = cls(**hyper)
        state.reset(params)
        return state

    def reset(self, params: ParameterSet) -> None:
        """Set m = 0 and v = 0 for every parameter."""
        self.m = {key: np.zeros_like(value) for key, value in params.items()}
        self.v = {key: np.zeros_like(value) for key, value in params.items()}
        self.step = 0


def adam_step_literal(state: AdamState, params: ParameterSet, grads: Mapping[str, np.ndarray]):
    """One moment-optimizer step; returns (state, params), both new objects."""
    step = state.step + 1
    if state.bias_correction == LITERAL:
        m_scale, v_scale = 1.0 - state.b1, 1.0 - state.b2
    else:
        m_scale, v_scale = 1.0 - state.b1 ** step, 1.0 - state.b2 ** step

    new_m, new_v, updated = {}, {}, {}
    for key, value in params.items():
        if key not in state.m or state.m[key].shape != value.shape:
            raise ContractViolation(f"optimizer state does not match parameter: {key}")
        if key not in grads:
            raise ContractViolation(f"missing gradient for parameter: {key}")
        grad = np.asarray(grads[key], dtype=np.float64)
        if grad.shape != value.shape:
            raise ContractViolation(f"gradient shape {grad.shape} does not match {key} {value.shape}")
        m = state.b1 * state.m[key] + (1.0 - state.b1) * grad
        v = state.b2 * state.v[key] + (1.0 - state.b2) * grad * grad
        m_hat = m / m_scale
        v_hat = v / v_scale
        updated[key] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[key], new_v[key] = m, v

    new_state = AdamState(state.b1, state.b2, state.lr, state.bias_correction, state.eps, new_m, new_v, step)
    return new_state, ParameterSet(updated)
