"""Adamax optimizer with weight decay and caller-driven learning-rate decay."""

from __future__ import annotations

import numpy as np

from .autodiff import Value

__all__ = ["Adamax", "TrainingError"]


class TrainingError(RuntimeError):
    """Raised when optimization cannot proceed (non-finite gradients or loss)."""


class Adamax:
    """Adamax: Adam variant using an infinity-norm second moment.

    Update per parameter:
        m <- b1 * m + (1 - b1) * g
        u <- max(b2 * u, |g|)
        p <- p - lr / (1 - b1^t) * m / (u + eps)

    Weight decay adds ``weight_decay * p`` to the gradient before the moment
    updates. The learning rate is annealed externally via ``decay_lr`` (the
    training loop calls it at epoch boundaries).
    """

    def __init__(self, lr=0.01, b1=0.9, b2=0.999, eps=1e-8, weight_decay=0.0,
                 lr_decay=0.97):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < b1 < 1.0 and 0.0 < b2 < 1.0):
            raise ValueError("b1 and b2 must lie in (0, 1)")
        if weight_decay < 0:
            raise ValueError("weight decay must be nonnegative")
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.weight_decay = weight_decay
        self.lr_decay = lr_decay
        self.step_count = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.inf_norm: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Value]) -> None:
        """Apply one update using the gradients currently stored on ``params``."""
        self.step_count += 1
        correction = 1.0 - self.b1**self.step_count
        for name, p in params.items():
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter '{name}'")
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self.first_moment.get(name)
            u = self.inf_norm.get(name)
            if m is None:
                m = np.zeros_like(p.data)
                u = np.zeros_like(p.data)
            m = self.b1 * m + (1.0 - self.b1) * g
            u = np.maximum(self.b2 * u, np.abs(g))
            self.first_moment[name] = m
            self.inf_norm[name] = u
            p.data = p.data - (self.lr / correction) * m / (u + self.eps)

    def decay_lr(self) -> None:
        self.lr *= self.lr_decay
