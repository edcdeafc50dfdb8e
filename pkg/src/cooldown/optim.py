"""AdamW with decoupled weight decay, global-norm clipping, and a schedule-free variant.

Steps are functional: they take a state and return a new one, never
modifying their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


class OptimError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.1
    clip_max: float | None = 1.0

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise OptimError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.weight_decay < 0:
            raise OptimError("weight decay must be non-negative")
        if not self.eps > 0:
            raise OptimError("eps must be positive")
        if self.clip_max is not None and not self.clip_max > 0:
            raise OptimError("clip_max must be positive or None")


@dataclass(frozen=True)
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "OptimizerState":
        return cls(np.zeros(dim), np.zeros(dim), 0)


def clip_global_norm(grads: np.ndarray, clip_max: float) -> np.ndarray:
    if not clip_max > 0:
        raise OptimError("clip_max must be positive")
    norm = float(np.sqrt(np.dot(grads, grads)))
    if norm <= clip_max:
        return grads
    return grads * (clip_max / norm)


def _check_dims(*arrs):
    n = arrs[0].shape
    if any(a.shape != n for a in arrs[1:]):
        raise OptimError(f"dimension mismatch: {[a.shape for a in arrs]}")


def adamw_step(state: OptimizerState, params, grads, lr: float, cfg: OptimizerConfig):
    """One AdamW update; returns ``(new_params, new_state)``.

    Clipping is not applied here; callers clip the raw gradient first.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    _check_dims(params, grads, state.m, state.v)
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new = params - lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * params)
    return new, OptimizerState(m, v, t)


@dataclass(frozen=True)
class SfoState:
    """Schedule-free state: base iterate ``z``, running average ``x``, second moment ``v``.

    Gradients are taken at ``y = (1 - interp) z + interp x``; ``x`` is the
    model that gets evaluated.
    """

    z: np.ndarray
    x: np.ndarray
    v: np.ndarray
    t: int = 0
    interp: float = 0.9

    @classmethod
    def start(cls, params, interp: float) -> "SfoState":
        if not (0.0 <= interp <= 1.0):
            raise OptimError("interp must lie in [0, 1]")
        p = np.asarray(params, dtype=float)
        return cls(p.copy(), p.copy(), np.zeros_like(p), 0, interp)

    @property
    def y(self) -> np.ndarray:
        return (1.0 - self.interp) * self.z + self.interp * self.x


def sfo_step(state: SfoState, grad_at: Callable[[np.ndarray], np.ndarray], lr: float, cfg: OptimizerConfig) -> SfoState:
    """One schedule-free AdamW step at constant ``lr``.

    ``grad_at`` maps a point to a (stochastic) gradient. Weight decay acts on z.
    """
    _check_dims(state.z, state.x, state.v)
    g = np.asarray(grad_at(state.y), dtype=float)
    _check_dims(g, state.z)
    if cfg.clip_max is not None:
        g = clip_global_norm(g, cfg.clip_max)
    t = state.t + 1
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    v_hat = v / (1.0 - cfg.beta2**t)
    z = state.z - lr * (g / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * state.z)
    c = 1.0 / t
    x = state.x + c * (z - state.x)
    return replace(state, z=z, x=x, v=v, t=t)
