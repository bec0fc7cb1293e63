"""Bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls(
            m={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
            v={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
            **kwargs,
        )


def adam_step(state: AdamState, params: dict, grads: dict, lr: float):
    """Apply one Adam update to ``params`` in place.

    Parameters without an entry in ``grads`` are left alone (and their
    moments are not decayed). Returns ``(params, state)``.
    """
    for k, g in grads.items():
        if k not in params:
            raise ValidationError(f"gradient for unknown parameter {k!r}")
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k], dtype=np.float64)
            state.v[k] = np.zeros_like(params[k], dtype=np.float64)
        if np.shape(g) != np.shape(params[k]) or state.m[k].shape != np.shape(params[k]):
            raise ValidationError(f"shape mismatch for {k!r}: {np.shape(g)} vs {np.shape(params[k])}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for k, g in grads.items():
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p = params[k]
        if isinstance(p, np.ndarray):
            p -= update
        else:
            params[k] = p - update
    return params, state
