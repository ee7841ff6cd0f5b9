"""Adam with coupled L2 weight decay and a multi-step learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            {k: np.zeros_like(v) for k, v in params.items()},
            {k: np.zeros_like(v) for k, v in params.items()},
            0,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """In-place Adam update. Weight decay is added to the gradient (L2)."""
    state.t += 1
    bc1 = 1.0 - BETA1**state.t
    bc2 = 1.0 - BETA2**state.t
    for name, w in params.items():
        g = grads[name]
        if weight_decay:
            g = g + weight_decay * w
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + EPS)


def lr_at(epoch: int, base_lr: float, milestones, gamma: float) -> float:
    """Learning rate for a 0-based epoch: decayed once per milestone reached."""
    passed = sum(1 for m in milestones if epoch >= m)
    return base_lr * gamma**passed
