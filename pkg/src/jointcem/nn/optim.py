from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameters


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Parameters, state: AdamState) -> Parameters:
    """Bias-corrected Adam update in place; clears grads afterwards."""
    missing = [name for name, t in params.items() if t.grad is None]
    if missing:
        raise RuntimeError(f"no gradient for parameter(s): {', '.join(missing[:5])}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, t in params.items():
        g = t.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.learning_rate != 0.0:
            t.data -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
        t.grad = None
    return params
