"""AdamW with decoupled weight decay, and the step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NumericError, Tensor


@dataclass
class AdamWState:
    lr: float = 1e-2
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adamw_step(params: list[Tensor], grads: list[np.ndarray], state: AdamWState) -> None:
    """One AdamW update, in place. Decay is applied directly to the params,
    not routed through the moment estimates."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(
                f"NaN/Inf gradient at step {state.step_count + 1}; param norm {np.linalg.norm(p.data):.3e}"
            )
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * state.weight_decay * p.data
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class AdamW:
    """Optimizer over a group of parameters sharing one lr / decay setting."""

    def __init__(self, params: list[Tensor], lr: float = 1e-2, weight_decay: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamWState(lr=lr, weight_decay=weight_decay, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = value

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adamw_step(self.params, grads, self.state)


def lr_schedule(epoch: int, base_lr: float, drop_epochs: list[int], factor: float = 0.1) -> float:
    """Step decay: base_lr times factor for every drop epoch already reached."""
    drops = sum(1 for d in drop_epochs if d <= epoch)
    return base_lr * factor**drops
