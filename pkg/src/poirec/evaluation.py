"""Top-k ranking metrics, cross-validation folds and the paired t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc


@dataclass
class Judgments:
    """Relevance per (user, venue); ``scale`` is "binary" (0/1) or "graded" (-2..+2)."""

    labels: dict[tuple[str, str], int] = field(default_factory=dict)
    scale: str = "binary"

    def __post_init__(self):
        if self.scale not in ("binary", "graded"):
            raise ValueError(f"unknown judgment scale {self.scale!r}")
        allowed = {0, 1} if self.scale == "binary" else {-2, -1, 0, 1, 2}
        for key, r in self.labels.items():
            if r not in allowed:
                raise ValueError(f"relevance {r} for {key} outside the {self.scale} scale")

    def get(self, user_id: str, venue_id: str) -> int | None:
        return self.labels.get((user_id, venue_id))

    def relevant(self, user_id: str, venue_id: str) -> bool:
        r = self.labels.get((user_id, venue_id))
        return r is not None and r > 0

    def gain(self, r: int | None) -> int:
        """Non-negative gain exponent: graded labels shift by +2, unjudged is 0."""
        if r is None:
            return 0
        return r + 2 if self.scale == "graded" else r

    def user_labels(self, user_id: str) -> dict[str, int]:
        return {v: r for (u, v), r in self.labels.items() if u == user_id}

    def users(self) -> list[str]:
        return sorted({u for u, _ in self.labels})


def precision_at_k(ranked: Sequence[str], judgments: Judgments, user_id: str, k: int = 5) -> float:
    """Hits among the top k over k; short lists count the gap as misses."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(judgments.relevant(user_id, v) for v in ranked[:k]) / k


def _dcg(gains: Sequence[int], k: int) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(gains[:k]))


def ndcg_at_k(ranked: Sequence[str], judgments: Judgments, user_id: str, k: int = 5) -> float:
    """DCG with gains 2^r - 1 and log2(1 + rank) discount, over the ideal DCG.

    The ideal ordering sorts all of the user's judged venues. Returns 0 when
    no judged venue has positive gain.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    gains = [judgments.gain(judgments.get(user_id, v)) for v in ranked]
    ideal = sorted((judgments.gain(r) for r in judgments.user_labels(user_id).values()), reverse=True)
    idcg = _dcg(ideal, k)
    if idcg <= 0.0:
        return 0.0
    return _dcg(gains, k) / idcg


def reciprocal_rank(ranked: Sequence[str], judgments: Judgments, user_id: str) -> float:
    for i, v in enumerate(ranked, start=1):
        if judgments.relevant(user_id, v):
            return 1.0 / i
    return 0.0


def mrr(ranked_lists: Mapping[str, Sequence[str]], judgments: Judgments) -> float:
    """Mean reciprocal rank of the first relevant venue; users without a hit add 0."""
    if not ranked_lists:
        raise ValueError("mrr needs at least one user")
    return float(np.mean([reciprocal_rank(r, judgments, u) for u, r in ranked_lists.items()]))


def per_user_metrics(ranked_lists: Mapping[str, Sequence[str]], judgments: Judgments, k: int = 5) -> dict[str, dict[str, float]]:
    return {
        u: {
            f"P@{k}": precision_at_k(r, judgments, u, k),
            f"nDCG@{k}": ndcg_at_k(r, judgments, u, k),
            "RR": reciprocal_rank(r, judgments, u),
        }
        for u, r in sorted(ranked_lists.items())
    }


def summarize(per_user: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    if not per_user:
        return {}
    names = next(iter(per_user.values())).keys()
    out = {name: float(np.mean([m[name] for m in per_user.values()])) for name in names}
    out["MRR"] = out.pop("RR")
    out["users"] = len(per_user)
    return out


def kfold_split(user_ids: Sequence[str], k: int = 5, seed: int = 0) -> list[list[str]]:
    """Shuffle users with ``seed`` and cut them into k folds differing in size by at most one."""
    ids = sorted(user_ids)
    if not 1 <= k <= len(ids):
        raise ValueError(f"k={k} outside 1..{len(ids)}")
    perm = np.random.default_rng(seed).permutation(len(ids))
    return [[ids[i] for i in part] for part in np.array_split(perm, k)]


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-tailed paired t-test of a against b.

    All-zero differences give (0, 1). Identical nonzero differences (zero
    variance) give t = +-inf and p = 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd <= 1e-15 * max(1.0, abs(mean)):
        if abs(mean) <= 1e-15:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    n = len(d)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    # Two-sided tail of Student's t via the regularized incomplete beta function.
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), p
