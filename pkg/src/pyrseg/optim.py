"""Heavy-ball SGD with L2 weight decay and the poly learning-rate schedule.

Update order is fixed: g <- grad + weight_decay * p; v <- momentum * v + g;
p <- p - lr * v. Decay applies to every parameter, BN scales included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class OptimConfig:
    base_lr: float = 0.01
    power: float = 0.9
    max_iter: int = 1000
    momentum: float = 0.9
    weight_decay: float = 0.0001

    def __post_init__(self) -> None:
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.power <= 0:
            raise ValueError(f"power must be positive, got {self.power}")


def poly_lr(iteration: int, cfg: OptimConfig) -> float:
    """base_lr * (1 - iter/max_iter)^power, evaluated at step start (0-based)."""
    if not 0 <= iteration <= cfg.max_iter:
        raise ValueError(f"iteration {iteration} outside [0, {cfg.max_iter}]")
    return cfg.base_lr * (1.0 - iteration / cfg.max_iter) ** cfg.power


class SGD:
    """Velocity state is keyed by parameter name for checkpointing."""

    def __init__(self, named_params: dict[str, Tensor], cfg: OptimConfig) -> None:
        self.cfg = cfg
        self.params = dict(named_params)
        self.velocity: dict[str, np.ndarray] = {
            name: np.zeros_like(p.data) for name, p in self.params.items()
        }

    def step(self, lr: float) -> None:
        mu = self.cfg.momentum
        wd = self.cfg.weight_decay
        for name, p in self.params.items():
            if p.grad is None:
                raise RuntimeError(f"parameter {name} has no gradient; run backward first")
            g = p.grad + wd * p.data
            v = self.velocity[name]
            v *= mu
            v += g
            p.data -= lr * v

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def sgd_step(params: dict[str, Tensor], state: dict[str, np.ndarray], lr: float,
             cfg: OptimConfig) -> None:
    """Functional form of SGD.step over explicit state; grads read from .grad."""
    mu, wd = cfg.momentum, cfg.weight_decay
    for name, p in params.items():
        if p.grad is None:
            raise RuntimeError(f"parameter {name} has no gradient; run backward first")
        g = p.grad + wd * p.data
        v = state[name]
        v *= mu
        v += g
        p.data -= lr * v
