"""Learning-to-rank fusion of score vectors and context-aware re-ranking.

All learned rankers are linear in the (standardized) score columns:
ListNet (listwise top-one cross entropy), RankNet (pairwise logistic) and
coordinate ascent (direct metric search). LinearCatRev is the fixed
interpolation baseline alpha * s_cat + (1 - alpha) * s_rev.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, log_softmax, softmax

from . import kernels

KINDS = ("listnet", "ranknet", "coord-ascent", "linearcatrev")
RankedList = list[tuple[str, float]]


@dataclass
class RankGroup:
    """One user's candidate list: feature rows and relevance labels (None when unjudged)."""

    user_id: str
    venue_ids: list[str]
    X: np.ndarray
    y: np.ndarray | None = None


@dataclass
class RankingModel:
    kind: str
    columns: tuple[str, ...]
    weights: np.ndarray
    bias: float = 0.0
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.mean is None:
            return X
        return (X - self.mean) / self.scale

    def score(self, X) -> np.ndarray:
        return self.standardize(X) @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "format": "poirec.ranker",
            "version": 1,
            "kind": self.kind,
            "columns": list(self.columns),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": None if self.mean is None else self.mean.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RankingModel":
        arr = lambda v: None if v is None else np.asarray(v, dtype=float)
        return cls(data["kind"], tuple(data["columns"]), arr(data["weights"]), float(data["bias"]),
                   arr(data["mean"]), arr(data["scale"]), dict(data.get("meta", {})))


# -- losses -------------------------------------------------------------------


def listnet_targets(labels, graded: bool = False) -> np.ndarray:
    """Top-one probabilities of the label-derived gains.

    Graded labels are shifted by +2; softmax is shift-invariant, so this only
    documents that gains are non-negative.
    """
    gains = np.asarray(labels, dtype=float) + (2.0 if graded else 0.0)
    return softmax(gains)


def listnet_loss_and_gradient(weights, X, labels, graded: bool = False) -> tuple[float, np.ndarray]:
    """Cross entropy between label and model top-one distributions, and its gradient."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        raise ValueError("ListNet needs at least two rows")
    target = listnet_targets(labels, graded)
    logp = log_softmax(X @ weights)
    loss = -float(target @ logp)
    grad = (np.exp(logp) - target) @ X
    return loss, grad


def _pairs(labels):
    y = np.asarray(labels, dtype=float)
    i, j = np.nonzero(y[:, None] > y[None, :])
    return i, j


def ranknet_loss_and_gradient(weights, X, labels) -> tuple[float, np.ndarray]:
    """Mean pairwise logistic loss over pairs with y_i > y_j.

    P(i beats j) = logistic(s_i - s_j); loss = -log P, averaged over pairs.
    """
    X = np.asarray(X, dtype=float)
    i, j = _pairs(labels)
    if len(i) == 0:
        raise ValueError("RankNet needs at least one pair with unequal labels")
    diff = (X @ weights)[i] - (X @ weights)[j]
    loss = float(np.mean(np.logaddexp(0.0, -diff)))
    coef = -expit(-diff)  # d loss / d diff
    grad = (coef @ (X[i] - X[j])) / len(i)
    return loss, grad


# -- trainers -----------------------------------------------------------------


def _standardizer(groups: Sequence[RankGroup]):
    X = np.vstack([g.X for g in groups])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def train_listnet(groups, lr=0.05, epochs=200, seed=0, graded=False, backend=None) -> np.ndarray:
    groups = [g for g in groups if len(g.X) >= 2]
    d = groups[0].X.shape[1] if groups else 0
    w = np.zeros(d)
    if not groups:
        return w
    X = np.ascontiguousarray(np.vstack([g.X for g in groups]))
    target = np.ascontiguousarray(np.concatenate([listnet_targets(g.y, graded) for g in groups]))
    offsets = np.cumsum([0] + [len(g.X) for g in groups]).astype(np.int64)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(len(groups)).astype(np.int64)
        kernels.listnet_epoch(X, target, offsets, order, float(lr), w, backend=backend)
    return w


def train_ranknet(groups, lr=0.05, epochs=200, seed=0) -> np.ndarray:
    groups = [g for g in groups if len(_pairs(g.y)[0])]
    d = groups[0].X.shape[1] if groups else 0
    w = np.zeros(d)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for q in rng.permutation(len(groups)):
            _, grad = ranknet_loss_and_gradient(w, groups[q].X, groups[q].y)
            w -= lr * grad
    return w


class _MetricEvaluator:
    """Vectorized P@k / nDCG@k over a fixed set of padded candidate lists."""

    def __init__(self, groups, metric="P@5", graded=False):
        name, _, k = metric.partition("@")
        if name not in ("P", "nDCG") or not k.isdigit():
            raise ValueError(f"unsupported metric {metric!r}")
        self.name, self.k = name, int(k)
        n = max(len(g.X) for g in groups)
        d = groups[0].X.shape[1]
        self.X = np.zeros((len(groups), n, d))
        self.mask = np.zeros((len(groups), n), dtype=bool)
        self.rel = np.zeros((len(groups), n))
        self.gain = np.zeros((len(groups), n))
        self.idcg = np.zeros(len(groups))
        disc = 1.0 / np.log2(np.arange(2, self.k + 2))
        for q, g in enumerate(groups):
            m = len(g.X)
            self.X[q, :m] = g.X
            self.mask[q, :m] = True
            y = np.asarray(g.y, dtype=float)
            self.rel[q, :m] = y > 0
            self.gain[q, :m] = 2.0 ** (y + (2.0 if graded else 0.0)) - 1.0
            ideal = np.sort(self.gain[q, :m])[::-1][: self.k]
            self.idcg[q] = ideal @ disc[: len(ideal)]
        self.disc = disc

    def __call__(self, w) -> float:
        s = np.where(self.mask, self.X @ w, -np.inf)
        top = np.argsort(-s, axis=1, kind="stable")[:, : self.k]
        if self.name == "P":
            return float(np.take_along_axis(self.rel, top, axis=1).sum(axis=1).mean() / self.k)
        g = np.take_along_axis(self.gain, top, axis=1)
        dcg = g @ self.disc[: g.shape[1]]
        ok = self.idcg > 0
        vals = np.zeros_like(dcg)
        vals[ok] = dcg[ok] / self.idcg[ok]
        return float(vals.mean())


STEPS = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def coordinate_ascent_train(
    groups: Sequence[RankGroup],
    metric: str = "P@5",
    restarts: int = 3,
    seed: int = 0,
    max_cycles: int = 25,
    graded: bool = False,
) -> np.ndarray:
    """Cyclic per-coordinate line search maximizing the ranking metric.

    The first restart starts from uniform weights, later ones from random
    points. A coordinate moves only on strict improvement. The best weights
    are returned L1-normalized.
    """
    groups = [g for g in groups if len(g.X)]
    if not groups:
        raise ValueError("coordinate ascent needs at least one group")
    d = groups[0].X.shape[1]
    evaluate = _MetricEvaluator(groups, metric, graded)
    rng = np.random.default_rng(seed)
    best_w, best_val = None, -math.inf
    for r in range(max(restarts, 1)):
        w = np.full(d, 1.0 / d) if r == 0 else rng.uniform(-1.0, 1.0, d)
        val = evaluate(w)
        for _ in range(max_cycles):
            improved = False
            for k in range(d):
                cand_w, cand_val = None, val
                for step in STEPS:
                    for sign in (1.0, -1.0):
                        trial = w.copy()
                        trial[k] += sign * step
                        v = evaluate(trial)
                        if v > cand_val + 1e-12:
                            cand_w, cand_val = trial, v
                if cand_w is not None:
                    w, val, improved = cand_w, cand_val, True
            if not improved:
                break
        if val > best_val + 1e-12:
            best_w, best_val = w, val
    norm = np.abs(best_w).sum()
    return best_w / norm if norm > 0 else best_w


def linearcatrev_score(s_cat: float, s_rev: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * s_cat + (1.0 - alpha) * s_rev


def train_ranker(
    kind: str,
    groups: Sequence[RankGroup],
    columns: Sequence[str],
    lr: float = 0.05,
    epochs: int = 200,
    seed: int = 0,
    metric: str = "P@5",
    restarts: int = 3,
    graded: bool = False,
    alpha: float | None = None,
) -> RankingModel:
    """Fit a fusion model on standardized score columns.

    For ``linearcatrev`` the interpolation weight is ``alpha`` when given and
    otherwise picked from a 0.1 grid by the training metric.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown ranker {kind!r}")
    groups = [g for g in groups if g.y is not None and len(g.X)]
    if not groups:
        raise ValueError("no labeled groups to train on")
    mean, scale = _standardizer(groups)
    std = [RankGroup(g.user_id, g.venue_ids, (g.X - mean) / scale, g.y) for g in groups]
    meta = {"seed": seed, "epochs": epochs, "lr": lr}
    if kind == "listnet":
        w = train_listnet(std, lr, epochs, seed, graded)
    elif kind == "ranknet":
        w = train_ranknet(std, lr, epochs, seed)
    elif kind == "coord-ascent":
        w = coordinate_ascent_train(std, metric, restarts, seed, graded=graded)
        meta = {"seed": seed, "metric": metric, "restarts": restarts}
    else:
        cols = list(columns)
        if "s_cat" not in cols or "s_rev" not in cols:
            raise ValueError("linearcatrev needs s_cat and s_rev columns")
        i_cat, i_rev = cols.index("s_cat"), cols.index("s_rev")

        def weights_for(a):
            w = np.zeros(len(cols))
            w[i_cat], w[i_rev] = a, 1.0 - a
            return w

        if alpha is None:
            evaluate = _MetricEvaluator(std, metric, graded)
            grid = [round(0.1 * k, 1) for k in range(11)]
            vals = [evaluate(weights_for(a)) for a in grid]
            alpha = grid[int(np.argmax(vals))]
        w = weights_for(alpha)
        meta = {"alpha": alpha, "metric": metric}
    return RankingModel(kind, tuple(columns), np.asarray(w, dtype=float), 0.0, mean, scale, meta)


# -- ranking ------------------------------------------------------------------


def sort_ranked(pairs) -> RankedList:
    """Descending score, venue id ascending on ties."""
    return sorted(((v, float(s)) for v, s in pairs), key=lambda vs: (-vs[1], vs[0]))


def rank_candidates(model: RankingModel, group: RankGroup) -> RankedList:
    if len(group.venue_ids) == 0:
        return []
    return sort_ranked(zip(group.venue_ids, model.score(group.X)))


def rerank_with_context(ranked: RankedList, s_cxt: Mapping[str, float], lam: float) -> RankedList:
    """final = score + lam * S_cxt, re-sorted; lam = 0 returns the list unchanged."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0:
        return list(ranked)
    return sort_ranked((v, s + lam * s_cxt.get(v, 0.0)) for v, s in ranked)
