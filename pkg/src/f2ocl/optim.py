from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError


@dataclass
class AdamSlot:
    """Per-parameter Adam moments and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamSlot":
        return cls(np.zeros_like(param, dtype=np.float64), np.zeros_like(param, dtype=np.float64))


def adam_step(param, grad, slot: AdamSlot, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update.

    Returns a new ``(param, slot)`` pair; inputs are not modified.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != np.shape(param):
        raise ValueError(f"gradient shape {grad.shape} does not match parameter shape {np.shape(param)}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to Adam")
    t = slot.t + 1
    m = beta1 * slot.m + (1.0 - beta1) * grad
    v = beta2 * slot.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = param - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamSlot(m, v, t)
