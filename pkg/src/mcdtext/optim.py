"""Adamax: the infinity-norm variant of Adam.

Update per step t (applied elementwise to every parameter):

    m <- beta1 * m + (1 - beta1) * g
    u <- max(beta2 * u, |g|)
    theta <- theta - lr / (1 - beta1 ** t) * m / (u + eps)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamaxState:
    """Per-parameter moments plus the shared step counter and hyperparameters."""

    m: list[np.ndarray]
    u: list[np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamaxState":
        return cls(m=[np.zeros_like(p) for p in params],
                   u=[np.zeros_like(p) for p in params],
                   t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adamax_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamaxState) -> AdamaxState:
    """Apply one in-place Adamax update to every parameter array."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")
    state.t += 1
    correction = 1.0 - state.beta1 ** state.t
    for p, g, m, u in zip(params, grads, state.m, state.u):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        p -= state.lr / correction * m / (u + state.eps)
    return state


class Adamax:
    """Convenience wrapper that drives adamax_step from tensor grads."""

    def __init__(self, tensors, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = list(tensors)
        self.state = AdamaxState.for_params([t.value for t in self.tensors],
                                            lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        grads = [np.zeros_like(t.value) if t.grad is None else t.grad for t in self.tensors]
        adamax_step([t.value for t in self.tensors], grads, self.state)

    def zero_grad(self) -> None:
        for t in self.tensors:
            t.grad = None
