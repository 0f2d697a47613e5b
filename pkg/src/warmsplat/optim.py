"""Bias-corrected Adam over the per-frame parameter groups."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .gaussians import PARAM_GROUPS, FrameGradients, GaussianFrame

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    """First/second moment accumulators mirroring a frame's parameters."""
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0

    @classmethod
    def for_frame(cls, frame: GaussianFrame) -> "OptimizerState":
        state = cls()
        for g in PARAM_GROUPS:
            arr = getattr(frame, g)
            state.m[g] = np.zeros_like(arr)
            state.v[g] = np.zeros_like(arr)
        return state


def adam_step(frame: GaussianFrame, grads: FrameGradients, state: OptimizerState,
              lr: dict, beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              eps: float = ADAM_EPS) -> None:
    """One in-place Adam update; `lr` maps parameter-group name to step size."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for g in PARAM_GROUPS:
        param = getattr(frame, g)
        grad = getattr(grads, g)
        if grad.shape != param.shape:
            raise InvalidInputError(f"gradient shape mismatch for group {g!r}")
        m = state.m[g]
        v = state.v[g]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        param -= lr[g] * (m / bc1) / (np.sqrt(v / bc2) + eps)
