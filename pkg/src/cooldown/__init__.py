"""Constant learning rate with cooldown: schedules, compute accounting, scaling-law fits,
weight averaging and a desk-scale trainer."""

from .averaging import SwaState, ema_update, interpolate, lawa_average, swa_update
from .compute import ModelConfig, flops_per_sequence, plan_suite, savings
from .lawfit import DataPoint, FitOptions, LawParams, fit, predict
from .optim import OptimizerConfig, OptimizerState, adamw_step, clip_global_norm, sfo_step
from .schedule import CooldownShape, ScheduleSpec, lr_at, schedule_table
from .tasks import LMOptions, QuadraticOptions, TaskSpec, make_task
from .trainer import TrainerConfig, interpolation_probe, resume_with_cooldown, train

__version__ = "0.1.0"
