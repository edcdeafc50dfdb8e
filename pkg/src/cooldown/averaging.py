"""Window-based stochastic weight averaging, LAWA, EMA, and weight interpolation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AveragingError(ValueError):
    pass


@dataclass
class SwaState:
    """Running mean over the current window of ``h`` snapshots.

    Only one accumulator vector is held; finished window means are appended
    to ``completed`` as ``(end_step, mean)`` and are never modified.
    """

    h: int
    k: int = 0
    mean: np.ndarray | None = None
    completed: list[tuple[int, np.ndarray]] = field(default_factory=list)
    seen: int = 0  # snapshots accumulated over the whole run

    def __post_init__(self):
        if self.h < 1:
            raise AveragingError("window size must be >= 1")

    @property
    def latest(self) -> np.ndarray | None:
        return self.completed[-1][1] if self.completed else None


def swa_update(state: SwaState, weights, step: int | None = None) -> SwaState:
    """Fold one snapshot into the window mean (mutates and returns ``state``)."""
    w = np.asarray(weights, dtype=float)
    if state.mean is None or state.k == 0:
        if state.mean is not None and state.mean.shape != w.shape:
            raise AveragingError(f"dimension mismatch: {state.mean.shape} vs {w.shape}")
        state.mean = w.copy()
        state.k = 1
    else:
        if state.mean.shape != w.shape:
            raise AveragingError(f"dimension mismatch: {state.mean.shape} vs {w.shape}")
        state.mean = state.mean + (w - state.mean) / (state.k + 1)
        state.k += 1
    state.seen += 1
    if state.k == state.h:
        state.completed.append((state.seen if step is None else step, state.mean.copy()))
        state.k = 0
    return state


def lawa_average(window_means, j: int) -> np.ndarray:
    """Unweighted mean of the last ``j`` window means."""
    means = list(window_means)
    if not (1 <= j <= len(means)):
        raise AveragingError(f"j must lie in [1, {len(means)}], got {j}")
    tail = [np.asarray(m, dtype=float) for m in means[-j:]]
    if j == 1:
        return tail[0].copy()
    return np.mean(np.stack(tail), axis=0)


@dataclass
class EmaState:
    decay: float
    value: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.decay <= 1.0):
            raise AveragingError("EMA decay must lie in [0, 1]")


def ema_update(state: EmaState, weights) -> EmaState:
    w = np.asarray(weights, dtype=float)
    if w.shape != state.value.shape:
        raise AveragingError("dimension mismatch")
    state.value = (1.0 - state.decay) * state.value + state.decay * w
    return state


def interpolate(w0, w1, t: float) -> np.ndarray:
    if not (0.0 <= t <= 1.0):
        raise AveragingError(f"t must lie in [0, 1], got {t}")
    a = np.asarray(w0, dtype=float)
    b = np.asarray(w1, dtype=float)
    if a.shape != b.shape:
        raise AveragingError("dimension mismatch")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    # same line as (1 - t) a + t b, but exact when a == b
    return a + t * (b - a)
