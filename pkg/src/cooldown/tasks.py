"""Desk-scale training tasks with gradient oracles.

``noisy_quadratic``: loss(w) = 1/2 w^T H w with diagonal H log-spaced in
[eigen_min, eigen_max]; a minibatch gradient is H w + sigma * xi / sqrt(B).
The expected loss is exact, so eval needs no sampling.

``synthetic_lm``: next-token prediction on a seeded order-2 Markov corpus
with an embedding -> tanh hidden layer -> softmax model and hand-written
backprop. Eval loss is mean cross-entropy over a held-out slice.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

TASK_KINDS = ("noisy_quadratic", "synthetic_lm")


class TaskError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticOptions:
    dim: int = 100
    eigen_min: float = 0.01
    eigen_max: float = 1.0
    noise_scale: float = 1.0
    init_scale: float = 1.0


@dataclass(frozen=True)
class LMOptions:
    vocab: int = 64
    context: int = 8
    embed_dim: int = 16
    hidden: int = 64
    corpus_seed: int = 0
    corpus_len: int = 60_000
    eval_len: int = 2048
    concentration: float = 0.05  # Dirichlet concentration of the transition rows


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "noisy_quadratic"
    seed: int = 0
    options: QuadraticOptions | LMOptions = field(default_factory=QuadraticOptions)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise TaskError(f"unknown task kind {self.kind!r}")
        want = QuadraticOptions if self.kind == "noisy_quadratic" else LMOptions
        if not isinstance(self.options, want):
            raise TaskError(f"{self.kind} needs {want.__name__}")
        for msg in validate_task(self):
            raise TaskError(msg)


def validate_task(spec: TaskSpec) -> list[str]:
    o = spec.options
    out = []
    if spec.kind == "noisy_quadratic":
        if o.dim < 1:
            out.append("dim must be >= 1")
        if not (0 < o.eigen_min <= o.eigen_max):
            out.append("need 0 < eigen_min <= eigen_max")
        if o.noise_scale < 0:
            out.append("noise_scale must be >= 0")
    else:
        if o.vocab < 2:
            out.append("vocab must be >= 2")
        if o.context < 2 or o.embed_dim < 1 or o.hidden < 1:
            out.append("context must be >= 2 and layer sizes >= 1")
        if o.corpus_len < o.eval_len + 4 * o.context:
            out.append("corpus too short for the held-out slice")
        if o.concentration <= 0:
            out.append("concentration must be positive")
    return out


class NoisyQuadratic:
    def __init__(self, spec: TaskSpec):
        o = spec.options
        self.spec = spec
        self.dim = o.dim
        self.sigma = o.noise_scale
        if o.dim == 1:
            self.h = np.array([o.eigen_min])
        else:
            self.h = np.logspace(np.log10(o.eigen_min), np.log10(o.eigen_max), o.dim)
        self._init_scale = o.init_scale

    def init_params(self) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=[spec_key(self.spec.seed), 1]))
        return self._init_scale * rng.standard_normal(self.dim)

    def loss(self, w) -> float:
        return 0.5 * float(np.dot(self.h * w, w))

    eval_loss = loss

    def grad(self, w) -> np.ndarray:
        return self.h * w

    def sample(self, w, rng: np.random.Generator, batch_size: int):
        """Minibatch (loss, gradient) at ``w``."""
        if self.sigma == 0.0:
            return self.loss(w), self.grad(w)
        xi = rng.standard_normal(self.dim) * (self.sigma / np.sqrt(batch_size))
        return self.loss(w) + float(np.dot(xi, w)), self.h * w + xi


class SyntheticLM:
    def __init__(self, spec: TaskSpec):
        o = spec.options
        self.spec = spec
        self.V, self.C, self.d, self.H = o.vocab, o.context, o.embed_dim, o.hidden
        self.transitions, self.corpus = _corpus(o)
        split = o.corpus_len - o.eval_len - self.C
        self._train_starts = split - self.C  # context windows fully inside the train part
        self.eval_ctx, self.eval_tgt = self._windows(np.arange(split, split + o.eval_len))
        shapes = {
            "emb": (self.V, self.d),
            "w1": (self.C * self.d, self.H),
            "b1": (self.H,),
            "w2": (self.H, self.V),
            "b2": (self.V,),
        }
        self._slices = {}
        off = 0
        for k, shp in shapes.items():
            n = int(np.prod(shp))
            self._slices[k] = (slice(off, off + n), shp)
            off += n
        self.dim = off

    def _windows(self, starts):
        idx = starts[:, None] + np.arange(self.C)[None, :]
        return self.corpus[idx], self.corpus[starts + self.C]

    def unpack(self, w) -> dict[str, np.ndarray]:
        return {k: w[s].reshape(shp) for k, (s, shp) in self._slices.items()}

    def init_params(self) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=[spec_key(self.spec.seed), 1]))
        w = np.zeros(self.dim)
        p = self.unpack(w)
        p["emb"][...] = rng.standard_normal(p["emb"].shape)
        p["w1"][...] = rng.standard_normal(p["w1"].shape) / np.sqrt(self.C * self.d)
        p["w2"][...] = rng.standard_normal(p["w2"].shape) / np.sqrt(self.H)
        return w

    def _forward(self, w, ctx, tgt, want_grad):
        p = self.unpack(w)
        n = len(tgt)
        x = p["emb"][ctx].reshape(n, self.C * self.d)
        h = np.tanh(x @ p["w1"] + p["b1"])
        logits = h @ p["w2"] + p["b2"]
        logits = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(logits).sum(axis=1))
        loss = float(np.mean(lse - logits[np.arange(n), tgt]))
        if not want_grad:
            return loss, None
        dlog = np.exp(logits - lse[:, None])
        dlog[np.arange(n), tgt] -= 1.0
        dlog /= n
        g = np.zeros_like(w)
        gp = self.unpack(g)
        gp["w2"][...] = h.T @ dlog
        gp["b2"][...] = dlog.sum(axis=0)
        dpre = (dlog @ p["w2"].T) * (1.0 - h * h)
        gp["w1"][...] = x.T @ dpre
        gp["b1"][...] = dpre.sum(axis=0)
        dx = (dpre @ p["w1"].T).reshape(n, self.C, self.d)
        np.add.at(gp["emb"], ctx, dx)
        return loss, g

    def loss_on(self, w, ctx, tgt) -> float:
        return self._forward(w, ctx, tgt, False)[0]

    def grad_on(self, w, ctx, tgt):
        return self._forward(w, ctx, tgt, True)

    def eval_loss(self, w) -> float:
        return self.loss_on(w, self.eval_ctx, self.eval_tgt)

    def sample(self, w, rng: np.random.Generator, batch_size: int):
        starts = rng.integers(0, self._train_starts, size=batch_size)
        ctx, tgt = self._windows(starts)
        return self._forward(w, ctx, tgt, True)


@functools.lru_cache(maxsize=8)
def _corpus(o: LMOptions):
    """Transition table and token stream for ``o`` (cached; read-only arrays)."""
    rng = np.random.Generator(np.random.Philox(key=[spec_key(o.corpus_seed), 2]))
    trans = rng.dirichlet(np.full(o.vocab, o.concentration), size=(o.vocab, o.vocab))
    cum = np.cumsum(trans, axis=-1)
    u = rng.random(o.corpus_len)
    out = np.empty(o.corpus_len, dtype=np.int64)
    out[0], out[1] = rng.integers(o.vocab, size=2)
    for i in range(2, o.corpus_len):
        row = cum[out[i - 2], out[i - 1]]
        out[i] = min(int(np.searchsorted(row, u[i], side="right")), o.vocab - 1)
    trans.flags.writeable = False
    out.flags.writeable = False
    return trans, out


def spec_key(seed: int) -> int:
    return int(seed) & 0xFFFF_FFFF_FFFF_FFFF


def make_task(spec: TaskSpec):
    if spec.kind == "noisy_quadratic":
        return NoisyQuadratic(spec)
    return SyntheticLM(spec)
