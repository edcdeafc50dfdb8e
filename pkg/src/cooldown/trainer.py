"""Deterministic training loop over the desk-scale tasks.

A row at step ``s`` describes the parameters after ``s`` updates: the lr that
update ``s`` uses, the minibatch loss of batch ``s`` and the eval loss. The
last row (``s == N``) draws one more batch for its train loss but applies no
update. Checkpoints at step ``s`` are taken before batch ``s`` is drawn, so
resuming from one replays the same random stream.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .averaging import SwaState, interpolate, swa_update
from .optim import OptimizerConfig, OptimizerState, SfoState, adamw_step, clip_global_norm, sfo_step
from .schedule import CooldownShape, ScheduleError, ScheduleSpec, check, fmt_float, lr_at
from .schedule import validate as validate_schedule
from .tasks import TaskSpec, make_task, spec_key

ALGORITHMS = ("adamw", "sgd", "sfo")


class TrainerError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Non-finite loss or parameters. ``rows`` holds the metrics recorded so far."""

    def __init__(self, message: str, step: int, rows=None):
        super().__init__(message)
        self.step = step
        self.rows = list(rows or [])


@dataclass(frozen=True)
class TrainerConfig:
    task: TaskSpec = field(default_factory=TaskSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 16
    eval_every: int = 100
    checkpoint_every: int = 1000
    swa_h: int | None = None  # SWA window; None disables averaging
    swa_stride: int = 1  # fold every stride-th post-update vector into the window
    algorithm: str = "adamw"  # "sgd" bypasses the optimizer: w -= lr * g

    def __post_init__(self):
        for msg in validate_trainer(self):
            raise TrainerError(msg)


def validate_trainer(cfg: TrainerConfig) -> list[str]:
    out = [f"schedule: {v.message}" for v in validate_schedule(cfg.schedule)]
    if cfg.algorithm not in ALGORITHMS:
        out.append(f"unknown algorithm {cfg.algorithm!r}")
    if cfg.batch_size < 1:
        out.append("batch_size must be >= 1")
    if cfg.eval_every < 1 or cfg.eval_every > cfg.schedule.total_steps:
        out.append("eval_every must lie in [1, total_steps]")
    if cfg.checkpoint_every < 1:
        out.append("checkpoint_every must be >= 1")
    if cfg.swa_h is not None and cfg.swa_h < 1:
        out.append("swa_h must be >= 1")
    if cfg.swa_stride < 1:
        out.append("swa_stride must be >= 1")
    return out


class Row(NamedTuple):
    step: int
    samples: int
    lr: float
    train_loss: float
    eval_loss: float
    swa_eval_loss: float | None = None


@dataclass
class Checkpoint:
    step: int
    params: np.ndarray
    config: TrainerConfig
    schedule: ScheduleSpec  # schedule in force when the checkpoint was taken
    opt: dict  # optimizer state arrays and counters
    rng_state: dict
    swa: dict | None = None
    kind: str = "raw"  # or "swa_window"


@dataclass
class RunRecord:
    rows: list[Row]
    checkpoints: list[Checkpoint] = field(default_factory=list)
    swa_windows: list[tuple[int, np.ndarray]] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final(self) -> Row:
        return self.rows[-1]

    def column(self, name: str) -> np.ndarray:
        i = Row._fields.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def summary(self) -> dict:
        f = self.final
        return {
            "final_step": f.step,
            "final_train_loss": f.train_loss,
            "final_eval_loss": f.eval_loss,
            "final_swa_eval_loss": f.swa_eval_loss,
            "wall_time": self.wall_time,
        }


METRICS_HEADER = list(Row._fields)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow([r.step, r.samples, fmt_float(r.lr), fmt_float(r.train_loss), fmt_float(r.eval_loss),
                    "" if r.swa_eval_loss is None else fmt_float(r.swa_eval_loss)])
    return buf.getvalue()


def read_rows_csv(text: str) -> list[Row]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != METRICS_HEADER:
        raise TrainerError("expected header " + ",".join(METRICS_HEADER))
    return [Row(int(a), int(b), float(c), float(d), float(e), float(f) if f else None) for a, b, c, d, e, f in rows[1:]]


def new_rng(seed: int) -> np.random.Generator:
    """Counter-based stream for minibatch noise; its state is the resume cursor."""
    return np.random.Generator(np.random.Philox(key=[spec_key(seed), 3]))


def rng_state(rng: np.random.Generator) -> dict:
    st = rng.bit_generator.state
    return {
        "bit_generator": st["bit_generator"],
        "counter": [int(x) for x in st["state"]["counter"]],
        "key": [int(x) for x in st["state"]["key"]],
        "buffer": [int(x) for x in st["buffer"]],
        "buffer_pos": int(st["buffer_pos"]),
        "has_uint32": int(st["has_uint32"]),
        "uinteger": int(st["uinteger"]),
    }


def rng_from_state(d: dict) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = {
        "bit_generator": d["bit_generator"],
        "state": {
            "counter": np.array(d["counter"], dtype=np.uint64),
            "key": np.array(d["key"], dtype=np.uint64),
        },
        "buffer": np.array(d["buffer"], dtype=np.uint64),
        "buffer_pos": d["buffer_pos"],
        "has_uint32": d["has_uint32"],
        "uinteger": d["uinteger"],
    }
    return np.random.Generator(bg)


class _Run:
    """Mutable state of one run; driven by ``advance``."""

    def __init__(self, cfg: TrainerConfig, schedule: ScheduleSpec, task=None):
        self.cfg = cfg
        self.schedule = schedule
        self.task = task if task is not None else make_task(cfg.task)
        self.swa = SwaState(cfg.swa_h) if cfg.swa_h else None
        self.windows = []  # (end_step, mean) of windows completed during this call

    def fresh(self):
        self.step = 0
        self.rng = new_rng(self.cfg.task.seed)
        w = self.task.init_params()
        if self.cfg.algorithm == "sfo":
            self.sfo = SfoState.start(w, self.cfg.optimizer.beta1)
            self.adam = None
        else:
            self.sfo = None
            self.adam = OptimizerState.zeros(len(w))
        self.w = w
        return self

    def restore(self, ck: Checkpoint):
        self.step = ck.step
        self.rng = rng_from_state(ck.rng_state)
        self.w = np.array(ck.params, dtype=float)
        o = ck.opt
        if self.cfg.algorithm == "sfo":
            self.sfo = SfoState(np.array(o["z"]), self.w.copy(), np.array(o["v"]), o["t"], o["interp"])
            self.adam = None
        else:
            self.sfo = None
            self.adam = OptimizerState(np.array(o["m"]), np.array(o["v"]), o["t"])
        if self.swa is not None and ck.swa is not None:
            s = ck.swa
            self.swa = SwaState(s["h"], s["k"], None if s["mean"] is None else np.array(s["mean"]), [], s["seen"])
            if s.get("latest") is not None:
                end, vec = s["latest"]
                self.swa.completed.append((end, np.array(vec)))
        return self

    def checkpoint(self) -> Checkpoint:
        if self.sfo is not None:
            opt = {"z": self.sfo.z.copy(), "v": self.sfo.v.copy(), "t": self.sfo.t, "interp": self.sfo.interp}
        else:
            opt = {"m": self.adam.m.copy(), "v": self.adam.v.copy(), "t": self.adam.t}
        swa = None
        if self.swa is not None:
            latest = self.swa.completed[-1] if self.swa.completed else None
            swa = {
                "h": self.swa.h,
                "k": self.swa.k,
                "seen": self.swa.seen,
                "mean": None if self.swa.mean is None else self.swa.mean.copy(),
                "latest": None if latest is None else (latest[0], latest[1].copy()),
            }
        return Checkpoint(self.step, self.w.copy(), self.cfg, self.schedule, opt, rng_state(self.rng), swa)

    def _update(self, g, lr):
        cfg = self.cfg.optimizer
        if cfg.clip_max is not None:
            g = clip_global_norm(g, cfg.clip_max)
        if self.cfg.algorithm == "sgd":
            self.w = self.w - lr * g
        else:
            self.w, self.adam = adamw_step(self.adam, self.w, g, lr, cfg)

    def advance(self, rows, checkpoints, ckpt_steps):
        cfg, N = self.cfg, self.schedule.total_steps
        while True:
            s = self.step
            if s in ckpt_steps:
                checkpoints.append(self.checkpoint())
            lr = lr_at(self.schedule, s)
            if self.sfo is not None:
                loss, g = self.task.sample(self.sfo.y, self.rng, cfg.batch_size)
            else:
                loss, g = self.task.sample(self.w, self.rng, cfg.batch_size)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite train loss {loss!r} at step {s} (lr={lr!r})", s, rows)
            if s % cfg.eval_every == 0 or s == N:
                ev = self.task.eval_loss(self.w)
                if not np.isfinite(ev):
                    raise DivergenceError(f"non-finite eval loss {ev!r} at step {s} (lr={lr!r})", s, rows)
                sw = None
                if self.swa is not None and self.swa.completed:
                    sw = self.task.eval_loss(self.swa.latest)
                rows.append(Row(s, s * cfg.batch_size, lr, loss, ev, sw))
            if s == N:
                return
            if self.sfo is not None:
                self.sfo = sfo_step(self.sfo, lambda _y, g=g: g, lr, cfg.optimizer)
                self.w = self.sfo.x
            else:
                self._update(g, lr)
            if not np.all(np.isfinite(self.w)):
                raise DivergenceError(f"non-finite parameters after step {s} (lr={lr!r})", s + 1, rows)
            self.step = s + 1
            if self.swa is not None and self.step % cfg.swa_stride == 0:
                n_before = len(self.swa.completed)
                swa_update(self.swa, self.w, step=self.step)
                if len(self.swa.completed) > n_before:
                    self.windows.append(self.swa.completed[-1])


def _checkpoint_steps(cfg: TrainerConfig, sched: ScheduleSpec) -> set[int]:
    N = sched.total_steps
    steps = set(range(0, N + 1, cfg.checkpoint_every))
    steps |= {sched.warmup_steps, N}
    if sched.kind == "constant_cooldown":
        steps.add(sched.decay_start)
    return steps


def train(cfg: TrainerConfig, task=None):
    """Run ``cfg`` from scratch; returns ``(RunRecord, checkpoints)``."""
    check(cfg.schedule)
    t0 = time.perf_counter()
    run = _Run(cfg, cfg.schedule, task).fresh()
    rows, cks = [], []
    run.advance(rows, cks, _checkpoint_steps(cfg, cfg.schedule))
    rec = RunRecord(rows, cks, run.windows, time.perf_counter() - t0)
    return rec, cks


def resume_with_cooldown(ckpt: Checkpoint, decay_steps: int, shape: CooldownShape, task=None) -> RunRecord:
    """Branch a cooldown of ``decay_steps`` steps off a pre-decay trunk checkpoint."""
    sched = ckpt.schedule
    if decay_steps is None or decay_steps < 1:
        raise TrainerError("decay_steps must be a positive integer")
    if sched.kind not in ("constant", "constant_cooldown"):
        raise TrainerError(f"cannot branch a cooldown off a {sched.kind!r} schedule")
    if sched.kind == "constant_cooldown" and ckpt.step > sched.decay_start:
        raise TrainerError(f"checkpoint at step {ckpt.step} is already inside the decay phase")
    if ckpt.step < sched.warmup_steps:
        raise TrainerError("checkpoint is still inside warmup")
    new = replace(sched, kind="constant_cooldown", total_steps=ckpt.step + decay_steps, decay_steps=decay_steps, shape=shape)
    try:
        check(new)
    except ScheduleError as e:
        raise TrainerError(str(e)) from None
    cfg = replace(ckpt.config, schedule=new)
    t0 = time.perf_counter()
    run = _Run(cfg, new, task).restore(ckpt)
    rows, cks = [], []
    run.advance(rows, cks, {new.total_steps})
    return RunRecord(rows, cks, run.windows, time.perf_counter() - t0)


def interpolation_probe(ckpt_a: Checkpoint, ckpt_b: Checkpoint, n_points: int, task=None):
    """Eval loss along the straight line from ``ckpt_a`` to ``ckpt_b``."""
    if n_points < 2:
        raise TrainerError("n_points must be >= 2")
    if ckpt_a.config.task != ckpt_b.config.task:
        raise TrainerError("checkpoints come from different tasks")
    if ckpt_a.params.shape != ckpt_b.params.shape:
        raise TrainerError("dimension mismatch")
    task = task if task is not None else make_task(ckpt_a.config.task)
    ts = np.linspace(0.0, 1.0, n_points)
    return [(float(t), task.eval_loss(interpolate(ckpt_a.params, ckpt_b.params, float(t)))) for t in ts]
