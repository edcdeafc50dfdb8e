"""Transformer FLOPs accounting and scaling-suite cost planning.

FLOPs are integer-exact (Python ints never overflow). Suite token costs are
carried as ``Fraction`` so that ratios such as 36N / 60N come out exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

STRATEGIES = ("cosine", "cooldown", "swa")


class ComputeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_layers: int
    ffw_size: int
    key_size: int
    n_heads: int
    vocab_size: int
    seq_len: int
    param_count: int
    swiglu: bool = True
    name: str = ""

    def __post_init__(self):
        for k in ("d_model", "n_layers", "ffw_size", "key_size", "n_heads", "vocab_size", "seq_len", "param_count"):
            v = getattr(self, k)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ComputeError(f"{k} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class FlopsBreakdown:
    embedding: int
    attention: int  # per layer
    dense: int  # per layer
    final_logits: int
    single_forward: int
    total: int


def flops_per_sequence(cfg: ModelConfig) -> FlopsBreakdown:
    s, d, v = cfg.seq_len, cfg.d_model, cfg.vocab_size
    kh = cfg.key_size * cfg.n_heads
    embedding = 2 * s * v * d
    attention = (
        2 * 3 * s * d * kh  # q, k, v projections
        + 2 * s * s * kh  # logits
        + 3 * cfg.n_heads * s * s  # softmax
        + 2 * s * s * kh  # softmax @ values
        + 2 * s * kh * d  # output projection
    )
    dense = 2 * s * (3 if cfg.swiglu else 2) * d * cfg.ffw_size
    final_logits = 2 * s * d * v
    single = embedding + cfg.n_layers * (attention + dense) + final_logits
    # backward pass counted as twice the forward
    return FlopsBreakdown(embedding, attention, dense, final_logits, single, 3 * single)


def flops_for_tokens(cfg: ModelConfig, tokens) -> Fraction:
    """Training FLOPs for ``tokens`` tokens (exact rational)."""
    if tokens <= 0:
        raise ComputeError("tokens must be positive")
    return Fraction(flops_per_sequence(cfg).total, cfg.seq_len) * _exact(tokens)


def count_params(d_model, n_layers, ffw_size, key_size, n_heads, vocab_size, swiglu=True, tied_embeddings=True) -> int:
    """Weight-matrix parameter count of a pre-norm decoder (norm gains included, no biases)."""
    kh = key_size * n_heads
    attn = 4 * d_model * kh
    mlp = (3 if swiglu else 2) * d_model * ffw_size
    per_layer = attn + mlp + 2 * d_model
    emb = vocab_size * d_model * (1 if tied_embeddings else 2)
    return emb + n_layers * per_layer + d_model


def _exact(x) -> Fraction:
    # decimal literal semantics for floats: 0.2 -> 1/5
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass
class PlannedRun:
    model: str
    strategy: str
    tokens: Fraction
    flops: Fraction


@dataclass
class SuitePlan:
    strategy: str
    ratios: tuple
    cooldown_fraction: float | None
    models: list[ModelConfig]
    targets: dict[str, list[Fraction]]  # model name -> D_i
    runs: list[PlannedRun] = field(default_factory=list)

    @property
    def total_tokens(self) -> Fraction:
        return sum((r.tokens for r in self.runs), Fraction(0))

    @property
    def total_flops(self) -> Fraction:
        return sum((r.flops for r in self.runs), Fraction(0))

    def token_cost(self, model: str) -> Fraction:
        return sum((r.tokens for r in self.runs if r.model == model), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "ratios": list(self.ratios),
            "cooldown_fraction": self.cooldown_fraction,
            "models": [asdict(m) for m in self.models],
            "runs": [
                {"model": r.model, "strategy": r.strategy, "tokens": float(r.tokens), "flops": float(r.flops)}
                for r in self.runs
            ],
            "total_tokens": float(self.total_tokens),
            "total_flops": float(self.total_flops),
        }

    def to_csv(self) -> str:
        from .schedule import fmt_float

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "strategy", "tokens", "flops"])
        for r in self.runs:
            w.writerow([r.model, r.strategy, fmt_float(float(r.tokens)), fmt_float(float(r.flops))])
        return buf.getvalue()


def _model_name(cfg: ModelConfig, i: int) -> str:
    return cfg.name or f"model{i}"


def plan_suite(models: Sequence[ModelConfig], ratios, strategy: str, cooldown_fraction=0.2) -> SuitePlan:
    """Token and FLOPs cost of a scaling suite with targets D_i = M_i * N per model.

    ``cosine`` trains every target from scratch. ``cooldown`` runs one constant-LR
    trunk to (1 - f) * max D and branches one cooldown of f * D_i per target off
    the trunk checkpoint at (1 - f) * D_i. ``swa`` runs one trunk to max D and
    reads window averages off it. Warmup is shared by all strategies and ignored.
    """
    if not models:
        raise ComputeError("empty model list")
    ratios = tuple(ratios)
    if not ratios:
        raise ComputeError("empty ratio list")
    ms = [_exact(r) for r in ratios]
    if any(m <= 0 for m in ms) or any(b <= a for a, b in zip(ms, ms[1:])):
        raise ComputeError(f"ratios must be positive and strictly increasing, got {ratios}")
    if strategy not in STRATEGIES:
        raise ComputeError(f"unknown strategy {strategy!r}")
    frac = _exact(cooldown_fraction)
    if strategy == "cooldown" and not (0 < frac < 1):
        raise ComputeError("cooldown fraction must lie in (0, 1)")

    names = [_model_name(m, i) for i, m in enumerate(models)]
    if len(set(names)) != len(names):
        raise ComputeError("model names must be unique")
    plan = SuitePlan(strategy, ratios, float(cooldown_fraction) if strategy == "cooldown" else None, list(models), {})
    for name, cfg in zip(names, models):
        targets = [m * cfg.param_count for m in ms]
        plan.targets[name] = targets
        if strategy == "cosine":
            legs = [("cosine", d) for d in targets]
        elif strategy == "cooldown":
            legs = [("trunk", (1 - frac) * max(targets))] + [("cooldown", frac * d) for d in targets]
        else:
            legs = [("trunk", max(targets))]
        for kind, tokens in legs:
            plan.runs.append(PlannedRun(name, kind, tokens, flops_for_tokens(cfg, tokens)))
    return plan


@dataclass
class SavingsReport:
    baseline_flops: float
    alternative_flops: float
    ratio: float
    gpu_hours_baseline: float | None = None
    gpu_hours_alternative: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def savings(baseline: SuitePlan, alternative: SuitePlan, throughput: float | None = None, utilization: float = 1.0) -> SavingsReport:
    """Compare two plans; GPU hours use ``throughput`` FLOP/s at ``utilization`` when given."""
    if baseline.models != alternative.models or baseline.ratios != alternative.ratios:
        raise ComputeError("plans cover different models or ratios")
    b, a = baseline.total_flops, alternative.total_flops
    rep = SavingsReport(float(b), float(a), float(a / b))
    if throughput is not None:
        if throughput <= 0 or not (0 < utilization <= 1):
            raise ComputeError("throughput must be positive and utilization in (0, 1]")
        rate = _exact(throughput) * _exact(utilization) * 3600
        rep.gpu_hours_baseline = float(b / rate)
        rep.gpu_hours_alternative = float(a / rate)
    return rep


def load_models(tree: dict) -> list[ModelConfig]:
    """Model configs from a ``{"models": [{...}, ...]}`` document."""
    recs = tree.get("models")
    if not isinstance(recs, list):
        raise ComputeError("expected a 'models' list")
    known = set(ModelConfig.__dataclass_fields__)
    out = []
    for i, rec in enumerate(recs):
        extra = set(rec) - known
        if extra:
            raise ComputeError(f"models[{i}]: unknown keys {sorted(extra)}")
        try:
            out.append(ModelConfig(**rec))
        except TypeError as e:
            raise ComputeError(f"models[{i}]: {e}") from None
    return out
