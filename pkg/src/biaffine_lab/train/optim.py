from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..numerics import ParameterStore


@dataclass
class OptimizerState:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: ParameterStore, state: OptimizerState, lr: float | None = None) -> None:
    """One AdamW update using the gradients currently stored on ``params``.

    Weight decay is decoupled: theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta),
    with the decay term computed from the pre-update value.
    """
    lr = state.lr if lr is None else lr
    b1, b2 = state.betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params.trainable():
        g = p.grad
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.value)
            state.v[p.name] = np.zeros_like(p.value)
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * p.value
        p.value -= lr * update


def global_grad_norm(params: ParameterStore) -> float:
    return math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params.trainable()))


def grad_clip(params: ParameterStore, max_norm: float = 1.0) -> float:
    """Rescale all gradients jointly so their global l2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params.trainable():
            p.grad *= scale
    return norm


def cosine_warmup_lr(step: int, total_steps: int, peak_lr: float, warmup_fraction: float = 0.06) -> float:
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = max(1, int(round(warmup_fraction * total_steps)))
    if step < warmup:
        return peak_lr * step / warmup
    progress = (step - warmup) / max(1, total_steps - warmup)
    return 0.5 * peak_lr * (1.0 + math.cos(math.pi * progress))
