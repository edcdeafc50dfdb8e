"""Learning-rate schedules: cosine, constant, and constant + cooldown.

All functions here are pure. Steps are 0-based and ``lr_at(spec, n)`` is the
step size applied for update ``n``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import NamedTuple


SHAPE_KINDS = ("linear", "1-sqrt", "cosine", "mirror-cosine", "1-square", "power")
SCHEDULE_KINDS = ("cosine", "constant_cooldown", "constant")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class CooldownShape:
    kind: str = "1-sqrt"
    a: float | None = None  # exponent, only for kind == "power"

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ScheduleError(f"unknown cooldown shape {self.kind!r}")
        if self.kind == "power":
            if self.a is None or not (0.0 < self.a <= 1.0):
                raise ScheduleError(f"power exponent must lie in (0, 1], got {self.a!r}")
        elif self.a is not None:
            raise ScheduleError(f"shape {self.kind!r} takes no exponent")

    @classmethod
    def parse(cls, text: str) -> "CooldownShape":
        """Parse ``"linear"``, ``"1-sqrt"``, ... or ``"power:0.3"``."""
        if text.startswith("power:"):
            return cls("power", float(text.split(":", 1)[1]))
        return cls(text)

    def __str__(self) -> str:
        return f"power:{self.a!r}" if self.kind == "power" else self.kind


LINEAR = CooldownShape("linear")
ONE_MINUS_SQRT = CooldownShape("1-sqrt")
COSINE = CooldownShape("cosine")
MIRROR_COSINE = CooldownShape("mirror-cosine")
ONE_MINUS_SQUARE = CooldownShape("1-square")


def _pow(x: float, a: float) -> float:
    # a == 0.5 goes through sqrt so Power(0.5) and 1-sqrt agree bit for bit
    return math.sqrt(x) if a == 0.5 else x**a


def shape_multiplier(shape: CooldownShape, x: float) -> float:
    """LR multiplier at cooldown progress ``x`` in [0, 1]; 1 at x=0 and 0 at x=1."""
    if not (0.0 <= x <= 1.0):
        raise ScheduleError(f"cooldown progress must lie in [0, 1], got {x!r}")
    kind = shape.kind
    if kind == "linear":
        return 1.0 - x
    if kind == "1-sqrt":
        return 1.0 - _pow(x, 0.5)
    if kind == "cosine":
        return 0.5 * (1.0 + math.cos(math.pi * x))
    if kind == "mirror-cosine":
        # reflection of the cosine shape about the linear decay
        return 2.0 * (1.0 - x) - 0.5 * (1.0 + math.cos(math.pi * x))
    if kind == "1-square":
        return 1.0 - x * x
    return 1.0 - _pow(x, shape.a)


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "constant_cooldown"
    peak_lr: float = 1e-3
    total_steps: int = 5000
    warmup_steps: int = 300
    decay_steps: int = 0
    final_lr_fraction: float = 0.1
    shape: CooldownShape = field(default_factory=lambda: ONE_MINUS_SQRT)

    @property
    def decay_start(self) -> int:
        """First step of the cooldown phase boundary (lr there is still peak)."""
        return self.total_steps - self.decay_steps

    @property
    def min_lr(self) -> float:
        return self.final_lr_fraction * self.peak_lr


class Violation(NamedTuple):
    code: str
    message: str


def validate(spec: ScheduleSpec) -> list[Violation]:
    """Every violated invariant of ``spec``; empty means valid. Never raises."""
    out = []
    if spec.kind not in SCHEDULE_KINDS:
        out.append(Violation("unknown_kind", f"unknown schedule kind {spec.kind!r}"))
    if not (isinstance(spec.peak_lr, (int, float)) and spec.peak_lr > 0):
        out.append(Violation("non_positive_peak", "non-positive peak"))
    if not (isinstance(spec.total_steps, int) and spec.total_steps >= 1):
        out.append(Violation("non_positive_total", "total steps must be a positive integer"))
        return out
    if not (isinstance(spec.warmup_steps, int) and spec.warmup_steps >= 0):
        out.append(Violation("negative_warmup", "warmup steps must be a non-negative integer"))
    elif spec.warmup_steps >= spec.total_steps:
        out.append(Violation("warmup_exceeds_total", "warmup exceeds total"))
    if not (isinstance(spec.decay_steps, int) and spec.decay_steps >= 0):
        out.append(Violation("negative_decay", "decay steps must be a non-negative integer"))
    elif spec.kind != "constant_cooldown" and spec.decay_steps != 0:
        out.append(Violation("decay_not_applicable", f"decay steps are not used by {spec.kind!r}"))
    elif isinstance(spec.warmup_steps, int) and spec.warmup_steps + spec.decay_steps > spec.total_steps:
        out.append(Violation("decay_exceeds_available", "warmup + decay exceeds total"))
    if not (0.0 <= spec.final_lr_fraction < 1.0):
        out.append(Violation("bad_final_fraction", "final lr fraction must lie in [0, 1)"))
    if not isinstance(spec.shape, CooldownShape):
        out.append(Violation("bad_shape", f"not a cooldown shape: {spec.shape!r}"))
    return out


def check(spec: ScheduleSpec) -> ScheduleSpec:
    problems = validate(spec)
    if problems:
        raise ScheduleError("; ".join(f"{v.code}: {v.message}" for v in problems))
    return spec


def lr_at(spec: ScheduleSpec, step: int) -> float:
    if not (0 <= step <= spec.total_steps):
        raise ScheduleError(f"step {step} outside [0, {spec.total_steps}]")
    peak = spec.peak_lr
    if step < spec.warmup_steps:
        return step / spec.warmup_steps * peak
    if spec.kind == "constant":
        return peak
    if spec.kind == "constant_cooldown":
        start = spec.decay_start
        if step <= start:
            return peak
        return shape_multiplier(spec.shape, (step - start) / spec.decay_steps) * peak
    if spec.kind == "cosine":
        t = (step - spec.warmup_steps) / (spec.total_steps - spec.warmup_steps)
        # written from the peak side so that t=0 returns peak exactly
        return peak - (peak - spec.min_lr) * 0.5 * (1.0 - math.cos(math.pi * t))
    raise ScheduleError(f"unknown schedule kind {spec.kind!r}")


def schedule_table(spec: ScheduleSpec, stride: int) -> list[tuple[int, float]]:
    if stride < 1:
        raise ScheduleError("stride must be >= 1")
    steps = list(range(0, spec.total_steps, stride)) + [spec.total_steps]
    return [(n, lr_at(spec, n)) for n in steps]


def fmt_float(x: float) -> str:
    """Positional decimal with 17 significant digits (exact round trip)."""
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    s = format(Decimal(f"{x:.16e}"), "f")
    return s if "." in s else s + ".0"


def table_to_csv(rows: list[tuple[int, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "lr"])
    for n, lr in rows:
        w.writerow([n, fmt_float(lr)])
    return buf.getvalue()


def read_table_csv(text: str) -> list[tuple[int, float]]:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["step", "lr"]:
        raise ScheduleError(f"bad header {rows[0]!r}")
    return [(int(n), float(lr)) for n, lr in rows[1:]]
