"""Fit L(N, D) = A / N**alpha + B / D**beta + E to (N, D, loss) observations.

Huber loss on log residuals, with A = exp(a), B = exp(b), E = exp(e) so that
the prediction is logsumexp(a - alpha log N, b - beta log D, e). A grid of
starts is scored in one vectorized pass and the best ``n_restarts`` are
refined with L-BFGS-B.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp


class LawFitError(ValueError):
    pass


@dataclass(frozen=True)
class DataPoint:
    n_params: float
    tokens: float
    loss: float

    def __post_init__(self):
        if not (self.n_params > 0 and self.tokens > 0 and self.loss > 0):
            raise LawFitError(f"data point values must be positive: {self}")


@dataclass(frozen=True)
class LawParams:
    A: float
    alpha: float
    B: float
    beta: float
    E: float

    def as_tuple(self):
        return (self.A, self.alpha, self.B, self.beta, self.E)


def predict(p: LawParams, n_params, tokens):
    n = np.asarray(n_params, dtype=float)
    d = np.asarray(tokens, dtype=float)
    if np.any(n <= 0) or np.any(d <= 0):
        raise LawFitError("N and D must be positive")
    out = p.A * n ** (-p.alpha) + p.B * d ** (-p.beta) + p.E
    return float(out) if out.ndim == 0 else out


DEFAULT_LOG_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
DEFAULT_EXP_GRID = (0.0, 0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class FitOptions:
    n_restarts: int = 32
    huber_delta: float = 1e-3
    max_iters: int = 2000
    tolerance: float = 1e-14
    log_grid: tuple = DEFAULT_LOG_GRID  # values tried for a, b, e
    exp_grid: tuple = DEFAULT_EXP_GRID  # values tried for alpha, beta


@dataclass
class FitReport:
    params: LawParams
    objective: float
    residuals: list[float]  # log(pred) - log(observed), one per input point
    n_restarts_used: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


def huber(r, delta):
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))


def _log_pred(theta, logn, logd):
    a, b, e, alpha, beta = theta
    terms = np.stack([a - alpha * logn, b - beta * logd, np.full_like(logn, e)])
    return logsumexp(terms, axis=0), terms


def _objective(theta, logn, logd, logl, w, delta):
    lp, terms = _log_pred(theta, logn, logd)
    r = lp - logl
    f = float(np.sum(w * huber(r, delta)))
    dr = w * np.clip(r, -delta, delta)
    p = np.exp(terms - lp)  # softmax weights of the three terms
    g = np.array([
        np.sum(dr * p[0]),
        np.sum(dr * p[1]),
        np.sum(dr * p[2]),
        -np.sum(dr * p[0] * logn),
        -np.sum(dr * p[1] * logd),
    ])
    return f, g


def _grid_objectives(grid, logn, logd, logl, w, delta):
    a, b, e, alpha, beta = (grid[:, i : i + 1] for i in range(5))
    terms = np.stack([a - alpha * logn, b - beta * logd, np.broadcast_to(e, (len(grid), len(logn)))])
    r = logsumexp(terms, axis=0) - logl
    return np.sum(w * huber(r, delta), axis=1)


def _collapse(points):
    """Merge identical points into (unique points, multiplicity weights)."""
    counts: dict[tuple, int] = {}
    for p in points:
        key = (float(p.n_params), float(p.tokens), float(p.loss))
        counts[key] = counts.get(key, 0) + 1
    keys = sorted(counts)
    arr = np.array(keys, dtype=float).reshape(-1, 3)
    return arr, np.array([counts[k] for k in keys], dtype=float)


def fit(points, options: FitOptions | None = None, weights=None) -> FitReport:
    """Best-of-grid Huber fit. ``weights`` multiply each point's Huber term."""
    opts = options or FitOptions()
    points = list(points)
    if len(points) < 5:
        raise LawFitError(f"need at least 5 points to fit 5 parameters, got {len(points)}")
    if weights is None:
        uniq, w = _collapse(points)
    else:
        if len(weights) != len(points):
            raise LawFitError("weights must match points")
        # duplicates fold into summed weights, which keeps the fit order-free
        acc: dict[tuple, float] = {}
        for p, wi in zip(points, weights):
            key = (float(p.n_params), float(p.tokens), float(p.loss))
            acc[key] = acc.get(key, 0.0) + float(wi)
        keys = sorted(acc)
        uniq = np.array(keys, dtype=float).reshape(-1, 3)
        w = np.array([acc[k] for k in keys])

    warnings = []
    if len(np.unique(uniq[:, 0])) < 2:
        warnings.append("degenerate: fewer than 2 distinct N")
    if len(np.unique(uniq[:, 1])) < 2:
        warnings.append("degenerate: fewer than 2 distinct D")

    logn, logd, logl = np.log(uniq[:, 0]), np.log(uniq[:, 1]), np.log(uniq[:, 2])
    delta = opts.huber_delta
    grid = np.array(list(itertools.product(opts.log_grid, opts.log_grid, opts.log_grid, opts.exp_grid, opts.exp_grid)))
    grid_obj = _grid_objectives(grid, logn, logd, logl, w, delta)
    order = np.lexsort(tuple(grid[:, i] for i in range(4, -1, -1)) + (grid_obj,))
    starts = grid[order[: opts.n_restarts]]

    # optimizer works on obj / delta**2 so its relative tolerances are meaningful
    scale = 1.0 / (delta * delta)

    def fun(theta):
        f, g = _objective(theta, logn, logd, logl, w, delta)
        return f * scale, g * scale

    bounds = [(None, None)] * 3 + [(0.0, None)] * 2
    cands = []
    for s in starts:
        res = minimize(
            fun, s, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": opts.max_iters, "ftol": opts.tolerance, "gtol": opts.tolerance * 1e-2},
        )
        theta = np.asarray(res.x, dtype=float)
        f = _objective(theta, logn, logd, logl, w, delta)[0]
        f0 = _objective(s, logn, logd, logl, w, delta)[0]
        if f0 < f:  # never return worse than the start
            theta, f = np.array(s, dtype=float), f0
        cands.append((f, tuple(theta)))
    f_best, theta = min(cands)
    a, b, e, alpha, beta = theta
    A, B, E = math.exp(a), math.exp(b), math.exp(e)
    # a zero exponent makes its term a constant; fold it into E so E is identifiable
    if alpha == 0.0:
        A, E = 0.0, E + A
    if beta == 0.0:
        B, E = 0.0, E + B
    params = LawParams(A, float(alpha), B, float(beta), E)

    lp_all = np.log(predict(params, [p.n_params for p in points], [p.tokens for p in points]))
    resid = lp_all - np.log([p.loss for p in points])
    return FitReport(params, float(f_best), [float(x) for x in resid], len(starts), warnings)


def read_points_csv(text: str) -> list[DataPoint]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["n_params", "tokens", "loss"]:
        raise LawFitError("expected header n_params,tokens,loss")
    return [DataPoint(float(n), float(d), float(l)) for n, d, l in rows[1:] if n]


def points_to_csv(points) -> str:
    from .schedule import fmt_float

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_params", "tokens", "loss"])
    for p in points:
        w.writerow([fmt_float(p.n_params), fmt_float(p.tokens), fmt_float(p.loss)])
    return buf.getvalue()
