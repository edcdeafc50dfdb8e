"""Strict JSON configuration trees for runs and sweeps.

A config document is a JSON object with the sections ``seed``, ``task``,
``schedule``, ``optimizer``, ``trainer`` and (optionally) ``sweep``. Missing
keys take defaults, unknown keys are rejected, and some keys exist only for
one ``kind`` (``decay_steps`` and ``shape`` belong to ``constant_cooldown``;
``final_lr_fraction`` to ``cosine``). ``load`` returns the fully defaulted
tree, which is what gets hashed and written back out.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
from pathlib import Path

import numpy as np

from .optim import OptimError, OptimizerConfig
from .schedule import CooldownShape, ScheduleError, ScheduleSpec, validate as validate_schedule
from .tasks import LMOptions, QuadraticOptions, TaskError, TaskSpec
from .trainer import ALGORITHMS, TrainerConfig, TrainerError


class ConfigError(ValueError):
    def __init__(self, path: str, key: str | None, message: str):
        where = f"{path}.{key}" if key and path else (key or path or "<root>")
        super().__init__(f"{where}: {message}")
        self.path = path
        self.key = key


INT, FLOAT, STR = "int", "float", "str"

TASK_KEYS = {
    "noisy_quadratic": {
        "dim": (INT, 100),
        "eigen_min": (FLOAT, 0.1),
        "eigen_max": (FLOAT, 1.0),
        "noise_scale": (FLOAT, 1.0),
        "init_scale": (FLOAT, 0.1),
    },
    "synthetic_lm": {
        "vocab": (INT, 64),
        "context": (INT, 8),
        "embed_dim": (INT, 16),
        "hidden": (INT, 64),
        "corpus_seed": (INT, 0),
        "corpus_len": (INT, 60_000),
        "eval_len": (INT, 2048),
        "concentration": (FLOAT, 0.05),
    },
}

SCHEDULE_COMMON = {
    "peak_lr": (FLOAT, 0.01),
    "total_steps": (INT, 5000),
    "warmup_steps": (INT, 300),
}
SCHEDULE_KIND_KEYS = {
    "constant": {},
    "constant_cooldown": {"decay_steps": (INT, 1000), "shape": (STR, "1-sqrt")},
    "cosine": {"final_lr_fraction": (FLOAT, 0.1)},
}

OPTIMIZER_KEYS = {
    "algorithm": (STR, "adamw"),
    "beta1": (FLOAT, 0.9),
    "beta2": (FLOAT, 0.95),
    "eps": (FLOAT, 1e-8),
    "weight_decay": (FLOAT, None),  # default depends on the task kind
    "clip_max": (FLOAT, 1.0),  # null disables clipping
}
WEIGHT_DECAY_DEFAULT = {"noisy_quadratic": 0.0, "synthetic_lm": 0.1}

TRAINER_KEYS = {
    "batch_size": (INT, 16),
    "eval_every": (INT, 100),
    "checkpoint_every": (INT, 1000),
    "swa": ("swa", None),
}
SWA_KEYS = {"h": (INT, 500), "stride": (INT, 1)}

SWEEP_KEYS = {"replicates": (INT, 1), "grid": ("grid", {})}

TOP_KEYS = ("seed", "task", "schedule", "optimizer", "trainer", "sweep")


def _coerce(path, key, kind, value, nullable=False):
    if value is None:
        if nullable:
            return None
        raise ConfigError(path, key, "must not be null")
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, key, f"expected an integer, got {value!r}")
        return value
    if kind == FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, key, f"expected a number, got {value!r}")
        return float(value)
    if kind == STR:
        if not isinstance(value, str):
            raise ConfigError(path, key, f"expected a string, got {value!r}")
        return value
    raise AssertionError(kind)


def _section(raw, path):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(path, None, "expected an object")
    return raw


def _fill(raw: dict, schema: dict, path: str, nullable=()) -> dict:
    for k in raw:
        if k not in schema:
            raise ConfigError(path, k, "unknown key")
    out = {}
    for k, (kind, default) in schema.items():
        if kind in ("swa", "grid"):
            continue
        if k in raw:
            out[k] = _coerce(path, k, kind, raw[k], nullable=k in nullable)
        else:
            out[k] = default
    return out


def _kind(raw, path, allowed, default):
    kind = raw.get("kind", default)
    if kind not in allowed:
        raise ConfigError(path, "kind", f"must be one of {sorted(allowed)}, got {kind!r}")
    return kind


def normalize(doc) -> dict:
    """Validate ``doc`` and return the fully defaulted tree."""
    doc = _section(doc, "")
    for k in doc:
        if k not in TOP_KEYS:
            raise ConfigError("", k, "unknown key")
    tree = {}
    seed = doc.get("seed", 0)
    tree["seed"] = _coerce("", "seed", INT, seed)
    if not 0 <= tree["seed"] < 2**64:
        raise ConfigError("", "seed", "must be a 64-bit unsigned integer")

    raw = _section(doc.get("task"), "task")
    kind = _kind(raw, "task", TASK_KEYS, "noisy_quadratic")
    task = {"kind": kind}
    task.update(_fill({k: v for k, v in raw.items() if k != "kind"}, TASK_KEYS[kind], "task"))
    tree["task"] = task

    raw = _section(doc.get("schedule"), "schedule")
    kind = _kind(raw, "schedule", SCHEDULE_KIND_KEYS, "constant_cooldown")
    schema = {**SCHEDULE_COMMON, **SCHEDULE_KIND_KEYS[kind]}
    rest = {k: v for k, v in raw.items() if k != "kind"}
    for k in rest:
        if k not in schema and any(k in s for s in SCHEDULE_KIND_KEYS.values()):
            raise ConfigError("schedule", k, f"not a key of schedule kind {kind!r}")
    sched = {"kind": kind}
    sched.update(_fill(rest, schema, "schedule"))
    if "shape" in sched:
        try:
            sched["shape"] = str(CooldownShape.parse(sched["shape"]))
        except ScheduleError as e:
            raise ConfigError("schedule", "shape", str(e)) from None
    tree["schedule"] = sched

    raw = _section(doc.get("optimizer"), "optimizer")
    opt = _fill(raw, OPTIMIZER_KEYS, "optimizer", nullable=("clip_max", "weight_decay"))
    if opt["weight_decay"] is None:
        opt["weight_decay"] = WEIGHT_DECAY_DEFAULT[tree["task"]["kind"]]
    if opt["algorithm"] not in ALGORITHMS:
        raise ConfigError("optimizer", "algorithm", f"must be one of {list(ALGORITHMS)}")
    tree["optimizer"] = opt

    raw = _section(doc.get("trainer"), "trainer")
    tr = _fill(raw, TRAINER_KEYS, "trainer")
    swa = raw.get("swa")
    if swa is not None:
        tr["swa"] = _fill(_section(swa, "trainer.swa"), SWA_KEYS, "trainer.swa")
    else:
        tr["swa"] = None
    tree["trainer"] = tr

    if "sweep" in doc and doc["sweep"] is not None:
        raw = _section(doc["sweep"], "sweep")
        sw = _fill(raw, SWEEP_KEYS, "sweep")
        grid = raw.get("grid", {})
        if not isinstance(grid, dict):
            raise ConfigError("sweep", "grid", "expected an object of dotted key -> list")
        clean = {}
        for dotted, values in grid.items():
            parts = dotted.split(".")
            if len(parts) != 2 or parts[0] not in ("task", "schedule", "optimizer", "trainer"):
                raise ConfigError("sweep.grid", dotted, "expected a dotted key like 'schedule.peak_lr'")
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep.grid", dotted, "expected a non-empty list")
            clean[dotted] = list(values)
        sw["grid"] = clean
        if sw["replicates"] < 1:
            raise ConfigError("sweep", "replicates", "must be >= 1")
        tree["sweep"] = sw

    _validate_modules(tree)
    return tree


def _validate_modules(tree):
    """Run the module validators; the first violation wins."""
    try:
        spec = schedule_spec(tree["schedule"])
    except ScheduleError as e:
        raise ConfigError("schedule", None, str(e)) from None
    for v in validate_schedule(spec):
        raise ConfigError("schedule", None, f"{v.code}: {v.message}")
    try:
        task_spec(tree)
    except TaskError as e:
        raise ConfigError("task", None, str(e)) from None
    try:
        optimizer_config(tree["optimizer"])
    except OptimError as e:
        raise ConfigError("optimizer", None, str(e)) from None
    swa = tree["trainer"]["swa"]
    if swa is not None and (swa["h"] < 1 or swa["stride"] < 1):
        raise ConfigError("trainer.swa", None, "h and stride must be >= 1")
    try:
        trainer_config(tree)
    except TrainerError as e:
        raise ConfigError("trainer", None, str(e)) from None


def schedule_spec(s: dict) -> ScheduleSpec:
    kw = {k: s[k] for k in SCHEDULE_COMMON}
    kw["kind"] = s["kind"]
    if s["kind"] == "constant_cooldown":
        kw["decay_steps"] = s["decay_steps"]
        kw["shape"] = CooldownShape.parse(s["shape"])
    elif s["kind"] == "cosine":
        kw["final_lr_fraction"] = s["final_lr_fraction"]
    return ScheduleSpec(**kw)


def schedule_tree(spec: ScheduleSpec) -> dict:
    out = {"kind": spec.kind, "peak_lr": float(spec.peak_lr), "total_steps": spec.total_steps,
           "warmup_steps": spec.warmup_steps}
    if spec.kind == "constant_cooldown":
        out["decay_steps"] = spec.decay_steps
        out["shape"] = str(spec.shape)
    elif spec.kind == "cosine":
        out["final_lr_fraction"] = float(spec.final_lr_fraction)
    return out


def task_spec(tree: dict) -> TaskSpec:
    t = dict(tree["task"])
    kind = t.pop("kind")
    opts = QuadraticOptions(**t) if kind == "noisy_quadratic" else LMOptions(**t)
    return TaskSpec(kind, tree["seed"], opts)


def optimizer_config(o: dict) -> OptimizerConfig:
    return OptimizerConfig(o["beta1"], o["beta2"], o["eps"], o["weight_decay"], o["clip_max"])


def _trainer_fields(tree) -> dict:
    tr = tree["trainer"]
    swa = tr["swa"]
    return dict(
        task=task_spec(tree),
        schedule=schedule_spec(tree["schedule"]),
        optimizer=optimizer_config(tree["optimizer"]),
        batch_size=tr["batch_size"],
        eval_every=tr["eval_every"],
        checkpoint_every=tr["checkpoint_every"],
        swa_h=None if swa is None else swa["h"],
        swa_stride=1 if swa is None else swa["stride"],
        algorithm=tree["optimizer"]["algorithm"],
    )


def trainer_config(tree: dict) -> TrainerConfig:
    return TrainerConfig(**_trainer_fields(tree))


def tree_from_trainer(cfg: TrainerConfig) -> dict:
    """Inverse of ``trainer_config`` (without any sweep section)."""
    t = cfg.task
    task = {"kind": t.kind}
    task.update({k: getattr(t.options, k) for k in TASK_KEYS[t.kind]})
    o = cfg.optimizer
    return {
        "seed": t.seed,
        "task": task,
        "schedule": schedule_tree(cfg.schedule),
        "optimizer": {"algorithm": cfg.algorithm, "beta1": o.beta1, "beta2": o.beta2, "eps": o.eps,
                      "weight_decay": o.weight_decay, "clip_max": o.clip_max},
        "trainer": {"batch_size": cfg.batch_size, "eval_every": cfg.eval_every,
                    "checkpoint_every": cfg.checkpoint_every,
                    "swa": None if cfg.swa_h is None else {"h": cfg.swa_h, "stride": cfg.swa_stride}},
    }


def loads(text: str) -> dict:
    text = text.strip()
    if not text:
        return normalize({})
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", None, f"parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return normalize(doc)


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("", None, f"cannot read {p}: {e.strerror}") from None
    return loads(text)


def dumps(tree: dict) -> str:
    return json.dumps(tree, indent=2, sort_keys=True) + "\n"


def canonical(tree: dict) -> str:
    return json.dumps(tree, sort_keys=True, separators=(",", ":"))


def digest(tree: dict) -> str:
    """64-bit content hash of the defaulted tree, as 16 hex digits."""
    return hashlib.sha256(canonical(tree).encode()).hexdigest()[:16]


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def expand_sweep(tree: dict) -> list[tuple[str, dict]]:
    """Concrete (run_id, tree) pairs of a sweep, in a fixed order.

    Replicate ``r`` of every grid point gets the seed ``derive_seed(seed, r)``,
    so grid points are compared on common random streams.
    """
    sw = tree.get("sweep") or {"replicates": 1, "grid": {}}
    base = {k: v for k, v in tree.items() if k != "sweep"}
    keys = sorted(sw["grid"])
    runs = []
    for idx, combo in enumerate(itertools.product(*(sw["grid"][k] for k in keys))):
        doc = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            sec, key = k.split(".")
            doc[sec][key] = v
        for r in range(sw["replicates"]):
            d = copy.deepcopy(doc)
            d["seed"] = derive_seed(tree["seed"], r)
            runs.append((f"g{idx:03d}-r{r:02d}", normalize(d)))
    return runs
