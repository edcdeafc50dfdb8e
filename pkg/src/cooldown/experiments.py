"""Desk-scale experiment protocols shared by the acceptance tests and scripts/.

Operating point for the noisy quadratic: dim 100, eigenvalues log-spaced in
[0.1, 1], sigma = 1, batch 16, 5000 steps with 300 warmup. Cosine peaks at
0.02 and decays to 10%; the constant trunk runs at half that peak, and
cooldowns take the last 20% of the steps. Each seed trains one trunk and
branches its cooldowns off the trunk checkpoint at the decay start.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .optim import OptimizerConfig
from .schedule import LINEAR, ONE_MINUS_SQRT, CooldownShape, ScheduleSpec
from .tasks import LMOptions, QuadraticOptions, TaskSpec
from .trainer import RunRecord, TrainerConfig, interpolation_probe, resume_with_cooldown, train

STEPS = 5000
WARMUP = 300
DECAY = 1000
BATCH = 16
COSINE_PEAK = 0.02
CONSTANT_PEAK = COSINE_PEAK / 2
QUADRATIC = QuadraticOptions(dim=100, eigen_min=0.1, eigen_max=1.0, noise_scale=1.0, init_scale=0.1)
QUAD_OPT = OptimizerConfig(weight_decay=0.0)
SWA_H = 500


def quad_config(seed: int, schedule: ScheduleSpec, *, swa_h=None, algorithm="adamw", optimizer=QUAD_OPT,
                options=QUADRATIC) -> TrainerConfig:
    return TrainerConfig(TaskSpec("noisy_quadratic", seed, options), schedule, optimizer, BATCH, 100, 1000,
                         swa_h, 1, algorithm)


def trunk_schedule(peak=CONSTANT_PEAK) -> ScheduleSpec:
    return ScheduleSpec("constant", peak, STEPS, WARMUP)


def cosine_schedule(peak=COSINE_PEAK) -> ScheduleSpec:
    return ScheduleSpec("cosine", peak, STEPS, WARMUP, final_lr_fraction=0.1)


def cooldown_schedule(peak=CONSTANT_PEAK, shape=ONE_MINUS_SQRT) -> ScheduleSpec:
    return ScheduleSpec("constant_cooldown", peak, STEPS, WARMUP, DECAY, shape=shape)


def drop_fraction(cooldown: RunRecord, trunk: RunRecord, decay_steps: int = DECAY) -> float:
    """Share of the trunk-to-final loss drop that the cooldown window is responsible for.

    The trunk level before the window is the mean eval loss over the two
    window-lengths preceding it; the part of the drop the trunk would have
    made anyway is that level minus the trunk's own mean eval loss inside
    the window. Everything else is attributed to the cooldown. Averaging over
    rows keeps single-row fluctuations of the noisy trunk out of the ratio.
    """
    n = trunk.final.step
    start = n - decay_steps
    before = [r.eval_loss for r in trunk.rows if start - 2 * decay_steps <= r.step <= start]
    inside = [r.eval_loss for r in trunk.rows if start < r.step <= n]
    final = cooldown.final.eval_loss
    level = float(np.mean(before))
    total = level - final
    if total <= 0:
        return 0.0
    return (float(np.mean(inside)) - final) / total


@dataclass
class SeedDynamics:
    seed: int
    trunk: RunRecord
    cooldown: RunRecord  # 1-sqrt branch
    linear: RunRecord
    cosine: RunRecord

    @property
    def drop_fraction(self) -> float:
        return drop_fraction(self.cooldown, self.trunk)

    def swa_rows(self) -> tuple[int, int]:
        """(rows with swa <= raw, rows compared) after warmup on the trunk."""
        rows = [r for r in self.trunk.rows if r.step > WARMUP and r.swa_eval_loss is not None]
        return sum(r.swa_eval_loss <= r.eval_loss for r in rows), len(rows)


def seed_dynamics(seed: int, swa_h: int = SWA_H) -> SeedDynamics:
    trunk, cks = train(quad_config(seed, trunk_schedule(), swa_h=swa_h))
    at = next(c for c in cks if c.step == STEPS - DECAY)
    cd = resume_with_cooldown(at, DECAY, ONE_MINUS_SQRT)
    lin = resume_with_cooldown(at, DECAY, LINEAR)
    cos, _ = train(quad_config(seed, cosine_schedule()))
    return SeedDynamics(seed, trunk, cd, lin, cos)


SFO_BETAS = ((0.9, 0.95), (0.95, 0.99))
LR_GRID = (0.00025, 0.0005, 0.001, 0.002, 0.004)


@dataclass
class SfoStudy:
    lr_grid: tuple
    finals: dict  # method -> array [lr, seed]
    best_lr: dict  # method -> lr with the lowest mean final loss

    def best(self, method) -> np.ndarray:
        return self.finals[method][self.lr_grid.index(self.best_lr[method])]


def sfo_study(seeds, lr_grid=LR_GRID) -> SfoStudy:
    """Final losses of cooldown and both SFO settings, each at its own best LR on a shared grid.

    SFO runs at constant LR after the same warmup; the cooldown is the
    constant trunk plus a 20% (1-sqrt) cooldown.
    """
    methods = {"cooldown": lambda lr: quad_config(0, cooldown_schedule(lr))}
    for b1, b2 in SFO_BETAS:
        opt = replace(QUAD_OPT, beta1=b1, beta2=b2)
        methods[f"sfo{b1},{b2}"] = lambda lr, opt=opt: quad_config(0, trunk_schedule(lr), algorithm="sfo", optimizer=opt)
    finals = {}
    for name, make in methods.items():
        grid = np.empty((len(lr_grid), len(seeds)))
        for i, lr in enumerate(lr_grid):
            base = make(lr)
            for j, s in enumerate(seeds):
                cfg = replace(base, task=replace(base.task, seed=s))
                grid[i, j] = train(cfg)[0].final.eval_loss
        finals[name] = grid
    best = {k: lr_grid[int(np.argmin(v.mean(axis=1)))] for k, v in finals.items()}
    return SfoStudy(tuple(lr_grid), finals, best)


LM_OPTIONS = LMOptions(vocab=16)
LM_STEPS = 4000
LM_WARMUP = 300
LM_DECAY = 800
LM_PEAK = 1e-2
LM_BATCH = 32


def lm_config(seed: int) -> TrainerConfig:
    sched = ScheduleSpec("constant", LM_PEAK, LM_STEPS - LM_DECAY, LM_WARMUP)
    return TrainerConfig(TaskSpec("synthetic_lm", seed, LM_OPTIONS), sched, OptimizerConfig(), LM_BATCH, 100, 1000)


def lm_probe(seed: int, n_points: int = 21, shape: CooldownShape = ONE_MINUS_SQRT):
    """Trunk to the decay start, cooldown branch, then the probe between the two.

    Returns ``(path, pre_loss)`` with ``path`` a list of ``(t, eval_loss)``.
    """
    _, cks = train(lm_config(seed))
    pre = cks[-1]
    branch = resume_with_cooldown(pre, LM_DECAY, shape)
    post = branch.checkpoints[-1]
    path = interpolation_probe(pre, post, n_points)
    return path, path[0][1]
