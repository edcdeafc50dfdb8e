"""Command-line entry point: ``cooldown <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 invalid config or input (also a
refused re-run of a complete run), 4 corrupt checkpoint, 5 divergence.
Run outputs go under ``--out-dir``, else ``$COOLDOWN_OUTPUT_DIR``, else ``./runs``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import checkpoint as ckpt_io
from . import config as cfgmod
from .averaging import AveragingError, lawa_average
from .compute import STRATEGIES, ComputeError, flops_per_sequence, load_models, plan_suite, savings
from .lawfit import FitOptions, LawFitError, fit, read_points_csv
from .optim import OptimError
from .schedule import CooldownShape, ScheduleError, fmt_float, schedule_table, table_to_csv
from .tasks import TaskError, make_task
from .trainer import (
    DivergenceError,
    TrainerError,
    interpolation_probe,
    resume_with_cooldown,
    rows_to_csv,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_CHECKPOINT, EXIT_DIVERGED = 0, 2, 3, 4, 5
ENV_OUTPUT_DIR = "COOLDOWN_OUTPUT_DIR"

_INPUT_ERRORS = (
    cfgmod.ConfigError, ScheduleError, ComputeError, LawFitError, TrainerError,
    TaskError, OptimError, AveragingError,
)


class RefusedError(Exception):
    pass


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(ENV_OUTPUT_DIR) or "runs")


def _write_text(path: str | None, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8", newline="\n")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise cfgmod.ConfigError("", None, f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise cfgmod.ConfigError("", None, f"{path}: parse error at line {e.lineno}: {e.msg}") from None


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# run directories -------------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _prepare_run_dir(root: Path, run_id: str, force: bool) -> Path:
    d = root / run_id
    man = d / "manifest.json"
    if man.exists():
        status = json.loads(man.read_text()).get("status")
        if status == "complete" and not force:
            raise RefusedError(f"run {run_id!r} is already complete in {root}; pass --force to overwrite")
    if d.exists():
        shutil.rmtree(d)
    (d / "checkpoints").mkdir(parents=True)
    return d


def _manifest(d: Path, run_id: str, digest: str, status: str, extra=None):
    m = {
        "run_id": run_id,
        "digest": digest,
        "created": _now(),
        "status": status,
        "metrics": "metrics.csv",
        "checkpoints": "checkpoints",
    }
    if extra:
        m.update(extra)
    (d / "manifest.json").write_text(_json(m), encoding="utf-8")


def _finish(d: Path, run_id: str, digest: str, record, extra=None):
    (d / "metrics.csv").write_text(rows_to_csv(record.rows), encoding="utf-8", newline="\n")
    for ck in record.checkpoints:
        ckpt_io.save(ck, d / "checkpoints" / f"step_{ck.step:08d}.cdlb")
    if record.swa_windows:
        base = record.checkpoints[0] if record.checkpoints else None
        for end, mean in record.swa_windows:
            ckpt_io.save(ckpt_io.window_checkpoint(base, end, mean), d / "checkpoints" / f"swa_{end:08d}.cdlb")
    summary = record.summary()
    summary.pop("wall_time")
    _manifest(d, run_id, digest, "complete", {"final": summary, **(extra or {})})


def _diverged(d: Path, run_id: str, digest: str, err: DivergenceError, extra=None):
    (d / "metrics.csv").write_text(rows_to_csv(err.rows), encoding="utf-8", newline="\n")
    _manifest(d, run_id, digest, "diverged", {"error": str(err), "diverged_at": err.step, **(extra or {})})


def execute_run(root: str, run_id: str, tree: dict, force: bool) -> str:
    """Train ``tree`` into ``root/run_id``; returns the final status."""
    root = Path(root)
    digest = cfgmod.digest(tree)
    d = _prepare_run_dir(root, run_id, force)
    (d / "config.json").write_text(cfgmod.dumps(tree), encoding="utf-8")
    _manifest(d, run_id, digest, "running")
    cfg = cfgmod.trainer_config(tree)
    try:
        record, _ = train(cfg)
    except DivergenceError as e:
        _diverged(d, run_id, digest, e)
        return "diverged"
    _finish(d, run_id, digest, record)
    return "complete"


# subcommands -------------------------------------------------------------------


def cmd_schedule(args) -> int:
    tree = cfgmod.load_config(args.config) if args.config else cfgmod.normalize({})
    spec = cfgmod.schedule_spec(tree["schedule"])
    _write_text(args.out, table_to_csv(schedule_table(spec, args.stride)))
    return EXIT_OK


def cmd_flops(args) -> int:
    models = load_models(_read_json(args.models))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "param_count", "embedding", "attention", "dense", "final_logits",
                "single_forward", "total", "flops_per_token", "ratio_to_6n"])
    for i, m in enumerate(models):
        f = flops_per_sequence(m)
        per_tok = f.total / m.seq_len
        w.writerow([m.name or f"model{i}", m.param_count, f.embedding, f.attention, f.dense, f.final_logits,
                    f.single_forward, f.total, fmt_float(per_tok), fmt_float(per_tok / (6 * m.param_count))])
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise cfgmod.ConfigError("", "ratios", f"expected comma-separated numbers, got {text!r}") from None


def cmd_plan(args) -> int:
    models = load_models(_read_json(args.models))
    ratios = _floats(args.ratios)
    base = plan_suite(models, ratios, "cosine")
    alt = plan_suite(models, ratios, args.strategy, args.cooldown_fraction)
    rep = savings(base, alt, args.throughput, args.utilization)
    out = {"baseline": base.to_dict(), "alternative": alt.to_dict(), "savings": rep.to_dict()}
    _write_text(args.out, _json(out))
    if args.csv:
        _write_text(args.csv, alt.to_csv())
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        text = Path(args.data).read_text(encoding="utf-8")
    except OSError as e:
        raise LawFitError(f"cannot read {args.data}: {e.strerror}") from None
    pts = read_points_csv(text)
    rep = fit(pts, FitOptions(n_restarts=args.restarts, huber_delta=args.delta))
    _write_text(args.out, _json(rep.to_dict()))
    return EXIT_OK


def cmd_train(args) -> int:
    tree = cfgmod.load_config(args.config)
    tree.pop("sweep", None)
    run_id = args.run_id or f"run-{cfgmod.digest(tree)}"
    status = execute_run(str(_out_dir(args)), run_id, tree, args.force)
    print(_out_dir(args) / run_id)
    if status == "diverged":
        print(f"error: run {run_id!r} diverged; see its manifest", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_cooldown(args) -> int:
    src = ckpt_io.load(args.checkpoint)
    if src.kind != "raw":
        raise TrainerError("cooldowns branch off raw checkpoints, not window averages")
    shape = CooldownShape.parse(args.shape)
    branch_cfg = cfgmod.tree_from_trainer(src.config)
    source_sha = hashlib.sha256(Path(args.checkpoint).read_bytes()).hexdigest()
    ident = {"config": branch_cfg, "from_step": src.step, "decay_steps": args.decay_steps,
             "shape": str(shape), "source_sha256": source_sha}
    digest = hashlib.sha256(cfgmod.canonical(ident).encode()).hexdigest()[:16]
    run_id = args.run_id or f"cooldown-{digest}"
    root = _out_dir(args)
    d = _prepare_run_dir(root, run_id, args.force)
    extra = {"source_checkpoint": str(args.checkpoint), "from_step": src.step,
             "decay_steps": args.decay_steps, "shape": str(shape)}
    _manifest(d, run_id, digest, "running", extra)
    try:
        record = resume_with_cooldown(src, args.decay_steps, shape)
    except DivergenceError as e:
        _diverged(d, run_id, digest, e, extra)
        return EXIT_DIVERGED
    _finish(d, run_id, digest, record, extra)
    print(d)
    return EXIT_OK


def cmd_swa(args) -> int:
    cks = [ckpt_io.load(p) for p in args.checkpoints]
    cks.sort(key=lambda c: c.step)
    tasks = {c.config.task for c in cks}
    if len(tasks) != 1:
        raise TrainerError("checkpoints come from different tasks")
    j = args.j or len(cks)
    avg = lawa_average([c.params for c in cks], j)
    out = ckpt_io.window_checkpoint(cks[-1], cks[-1].step, avg)
    ckpt_io.save(out, args.out)
    loss = make_task(cks[-1].config.task).eval_loss(avg)
    print(_json({"out": str(args.out), "j": j, "steps": [c.step for c in cks[-j:]], "eval_loss": loss}), end="")
    return EXIT_OK


def cmd_interp(args) -> int:
    a, b = ckpt_io.load(args.a), ckpt_io.load(args.b)
    path = interpolation_probe(a, b, args.points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "eval_loss"])
    for t, loss in path:
        w.writerow([fmt_float(t), fmt_float(loss)])
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_sweep(args) -> int:
    tree = cfgmod.load_config(args.config)
    runs = cfgmod.expand_sweep(tree)
    root = _out_dir(args)
    # refuse before starting anything
    if not args.force:
        for run_id, _ in runs:
            man = root / run_id / "manifest.json"
            if man.exists() and json.loads(man.read_text()).get("status") == "complete":
                raise RefusedError(f"run {run_id!r} is already complete in {root}; pass --force to overwrite")
    jobs = [(str(root), rid, t, True) for rid, t in runs]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            statuses = list(ex.map(execute_run, *zip(*jobs)))
    else:
        statuses = [execute_run(*j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "digest", "seed", "status", "final_eval_loss"])
    for (rid, t), st in zip(runs, statuses):
        final = ""
        if st == "complete":
            final = json.loads((root / rid / "manifest.json").read_text())["final"]["final_eval_loss"]
            final = fmt_float(final)
        w.writerow([rid, cfgmod.digest(t), t["seed"], st, final])
    (root / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    print(root / "sweep.csv")
    return EXIT_DIVERGED if "diverged" in statuses else EXIT_OK


# parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cooldown", description="Constant-LR + cooldown toolkit.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    s = add("schedule", cmd_schedule, "Dump the LR table of a config's schedule as CSV.")
    s.add_argument("--config", help="JSON config (defaults when omitted)")
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--out", default="-", help="output CSV path, '-' for stdout")

    s = add("flops", cmd_flops, "Per-sequence FLOPs report for a models file.")
    s.add_argument("--models", required=True, help='JSON document {"models": [...]}')
    s.add_argument("--out", default="-")

    s = add("plan", cmd_plan, "Plan a scaling suite and report savings against per-length cosine runs.")
    s.add_argument("--models", required=True)
    s.add_argument("--ratios", required=True, help="comma-separated tokens-per-parameter ratios")
    s.add_argument("--strategy", choices=STRATEGIES, default="cooldown")
    s.add_argument("--cooldown-fraction", type=float, default=0.2)
    s.add_argument("--throughput", type=float, help="sustained FLOP/s per GPU, for GPU hours")
    s.add_argument("--utilization", type=float, default=1.0)
    s.add_argument("--out", default="-", help="JSON report path")
    s.add_argument("--csv", help="also write the alternative plan's runs as CSV")

    s = add("fit", cmd_fit, "Fit L(N, D) = A/N^alpha + B/D^beta + E to a CSV of observations.")
    s.add_argument("--data", required=True, help="CSV with header n_params,tokens,loss")
    s.add_argument("--restarts", type=int, default=32)
    s.add_argument("--delta", type=float, default=1e-3, help="Huber delta")
    s.add_argument("--out", default="-")

    for name, fn, help_ in (("train", cmd_train, "Run a training config."),
                            ("sweep", cmd_sweep, "Run every grid point and replicate of a config's sweep section.")):
        s = add(name, fn, help_)
        s.add_argument("--config", required=True)
        s.add_argument("--out-dir", help=f"run output root (default ${ENV_OUTPUT_DIR} or ./runs)")
        s.add_argument("--force", action="store_true", help="overwrite completed runs")
        if name == "train":
            s.add_argument("--run-id")
        else:
            s.add_argument("--workers", type=int, default=1)

    s = add("cooldown", cmd_cooldown, "Branch a cooldown off a trunk checkpoint.")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--decay-steps", type=int, required=True)
    s.add_argument("--shape", default="1-sqrt", help="linear, 1-sqrt, cosine, mirror-cosine, 1-square or power:<a>")
    s.add_argument("--run-id")
    s.add_argument("--out-dir")
    s.add_argument("--force", action="store_true")

    s = add("swa", cmd_swa, "Average the last j checkpoints (LAWA) into a swa_window checkpoint.")
    s.add_argument("--checkpoints", nargs="+", required=True)
    s.add_argument("--j", type=int, help="number of latest checkpoints to average (default all)")
    s.add_argument("--out", required=True)

    s = add("interp", cmd_interp, "Eval loss along the line between two checkpoints.")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--points", type=int, default=11)
    s.add_argument("--out", default="-")
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse: 2 on usage errors, 0 for --help
        return int(e.code or 0)
    try:
        return args.fn(args)
    except ckpt_io.CheckpointError as e:
        print(f"error: corrupt checkpoint: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except RefusedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"error: diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
