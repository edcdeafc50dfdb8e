"""Binary checkpoint files.

Layout::

    b"CDLB1" | version (1 byte) | n_params (u64 LE) | n_params * f64 LE
    | meta_len (u64 LE) | meta_len bytes of UTF-8 JSON

The JSON block carries the step, the full trainer config tree, the schedule
in force, optimizer arrays (base64 of f64 LE bytes), the RNG cursor, the SWA
accumulator and ``kind`` (``raw`` or ``swa_window``). Arrays are stored
bit-exactly, so ``load(save(x))`` reproduces ``x``.
"""

from __future__ import annotations

import base64
import json
import struct
from pathlib import Path

import numpy as np

from .config import ConfigError, normalize, schedule_spec, schedule_tree, trainer_config, tree_from_trainer
from .trainer import Checkpoint

MAGIC = b"CDLB1"
VERSION = 1
KINDS = ("raw", "swa_window")
_U64 = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


def _enc(a) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _dec(s: str) -> np.ndarray:
    raw = base64.b64decode(s.encode("ascii"), validate=True)
    if len(raw) % 8:
        raise CheckpointError("array payload is not a whole number of f64 values")
    return np.frombuffer(raw, dtype="<f8").astype(float)


def _meta(ck: Checkpoint) -> dict:
    opt = {k: (_enc(v) if isinstance(v, np.ndarray) else v) for k, v in ck.opt.items()}
    swa = None
    if ck.swa is not None:
        s = ck.swa
        swa = {
            "h": s["h"],
            "k": s["k"],
            "seen": s["seen"],
            "mean": None if s["mean"] is None else _enc(s["mean"]),
            "latest": None if s["latest"] is None else [s["latest"][0], _enc(s["latest"][1])],
        }
    return {
        "step": ck.step,
        "kind": ck.kind,
        "config": tree_from_trainer(ck.config),
        "schedule": schedule_tree(ck.schedule),
        "optimizer_state": opt,
        "rng": ck.rng_state,
        "swa": swa,
    }


def dumps(ck: Checkpoint) -> bytes:
    if ck.kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {ck.kind!r}")
    params = np.ascontiguousarray(ck.params, dtype="<f8")
    meta = json.dumps(_meta(ck), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([MAGIC, bytes([VERSION]), _U64.pack(len(params)), params.tobytes(), _U64.pack(len(meta)), meta])


def loads(blob: bytes) -> Checkpoint:
    head = len(MAGIC) + 1 + 8
    if len(blob) < head:
        raise CheckpointError("truncated header")
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic")
    if blob[len(MAGIC)] != VERSION:
        raise CheckpointError(f"unsupported version {blob[len(MAGIC)]}")
    (n,) = _U64.unpack_from(blob, len(MAGIC) + 1)
    end = head + 8 * n
    if len(blob) < end + 8:
        raise CheckpointError("truncated parameter payload")
    params = np.frombuffer(blob[head:end], dtype="<f8").astype(float)
    (m,) = _U64.unpack_from(blob, end)
    if len(blob) != end + 8 + m:
        raise CheckpointError("truncated or oversized metadata block")
    try:
        meta = json.loads(blob[end + 8 :].decode("utf-8"))
        cfg = trainer_config(normalize(meta["config"]))
        sched = schedule_spec(meta["schedule"])
        opt = {k: (_dec(v) if isinstance(v, str) else v) for k, v in meta["optimizer_state"].items()}
        swa = meta["swa"]
        if swa is not None:
            swa = dict(swa)
            swa["mean"] = None if swa["mean"] is None else _dec(swa["mean"])
            if swa["latest"] is not None:
                swa["latest"] = (swa["latest"][0], _dec(swa["latest"][1]))
        kind = meta["kind"]
        step = meta["step"]
        rng = meta["rng"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError, ConfigError) as e:
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"bad metadata block: {e}") from None
    if kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    for k, v in opt.items():
        if isinstance(v, np.ndarray) and v.shape != params.shape:
            raise CheckpointError(f"optimizer array {k!r} does not match the parameter count")
    return Checkpoint(step, params, cfg, sched, opt, rng, swa, kind)


def save(ck: Checkpoint, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_name(p.name + ".tmp")
    tmp.write_bytes(dumps(ck))
    tmp.replace(p)
    return p


def load(path) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read {path}: {e.strerror}") from None
    return loads(blob)


def window_checkpoint(base: Checkpoint, end_step: int, mean: np.ndarray) -> Checkpoint:
    """A ``swa_window`` checkpoint holding one window mean; state fields come from ``base``."""
    return Checkpoint(end_step, np.array(mean, dtype=float), base.config, base.schedule, {}, base.rng_state, None, "swa_window")
