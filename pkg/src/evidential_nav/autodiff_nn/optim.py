"""Adam with bias correction and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evidential_nav.autodiff_nn.layers import Tensor


@dataclass
class AdamState:
    step: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState | None,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update; returns new parameter arrays and the advanced state.

    The inputs are not modified.
    """
    if len(params) != len(grads):
        raise ValueError(f"Got {len(params)} parameters but {len(grads)} gradients")
    beta1, beta2 = betas
    if state is None or not state.first_moments:
        state = AdamState(
            step=0 if state is None else state.step,
            first_moments=[np.zeros_like(p, dtype=np.float64) for p in params],
            second_moments=[np.zeros_like(p, dtype=np.float64) for p in params],
        )
    step = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(step=step, first_moments=new_m, second_moments=new_v)


def clip_grad_norm(tensors: list[Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most max_norm.

    Returns:
        The norm before clipping.
    """
    total = float(np.sqrt(sum(float(np.sum(t.grad * t.grad)) for t in tensors)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for t in tensors:
            t.grad *= scale
    return total


class Adam:
    """Stateful wrapper applying `adam_step` to a list of `Tensor`s."""

    def __init__(self, tensors: list[Tensor], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: float | None = 10.0):
        self.tensors = list(tensors)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.state = AdamState()

    def zero_grad(self):
        for t in self.tensors:
            t.zero_grad()

    def step(self) -> float:
        grad_norm = (
            clip_grad_norm(self.tensors, self.max_grad_norm)
            if self.max_grad_norm
            else float(np.sqrt(sum(float(np.sum(t.grad ** 2)) for t in self.tensors)))
        )
        new_values, self.state = adam_step(
            [t.values for t in self.tensors],
            [t.grad for t in self.tensors],
            self.state,
            self.lr,
            self.betas,
            self.eps,
        )
        for t, values in zip(self.tensors, new_values):
            t.values[...] = values
        return grad_norm
