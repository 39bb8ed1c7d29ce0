"""Personalized keyword boosting and the PCA keyword-reduction baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .alignment import AlignmentModel, AlignmentPair, best_mapping
from .domain import RatingScale, UserRecord, VenueRecord, frequency_profile, rating_polarity

log = logging.getLogger(__name__)


@dataclass
class BoostedProfile:
    """Reduced keyword set of one user and its positive/negative frequencies."""

    user_id: str
    keywords: tuple[str, ...] = ()
    pos: dict[str, float] = field(default_factory=dict)
    neg: dict[str, float] = field(default_factory=dict)
    method: str = "boost"

    @property
    def empty(self) -> bool:
        return not self.keywords

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "method": self.method,
            "keywords": list(self.keywords),
            "pos": self.pos,
            "neg": self.neg,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostedProfile":
        return cls(data["user_id"], tuple(data["keywords"]), dict(data["pos"]), dict(data["neg"]), data.get("method", "boost"))


def _restricted_profile(user, venues, scale, keep: set[str], method: str) -> BoostedProfile:
    bags = []
    for checkin in user.history:
        venue = venues.get(checkin.venue_id)
        if venue is not None:
            bags.append((rating_polarity(checkin.rating, scale), venue.keywords))
    pos, neg = frequency_profile(bags, restrict_to=keep)
    return BoostedProfile(user.id, tuple(sorted(keep)), pos, neg, method)


def boosted_keywords(user: UserRecord, model: AlignmentModel | None, venues: Mapping[str, VenueRecord]) -> set[str]:
    """Keywords of tagged history venues that the best mapping assigns to a real tag."""
    out: set[str] = set()
    if model is None:
        return out
    for checkin in user.tagged():
        venue = venues.get(checkin.venue_id)
        if venue is None or not venue.keywords:
            continue
        pair = AlignmentPair(venue.keywords, checkin.tags, user.id)
        mapping = best_mapping(model, pair)
        out.update(pair.keywords[j] for j in mapping.mapped_positions())
    return out


def boost_keywords(
    user: UserRecord,
    model: AlignmentModel | None,
    venues: Mapping[str, VenueRecord],
    scale: RatingScale | str = RatingScale.FIVE,
) -> BoostedProfile:
    """Boosted keyword profile: the frequency profile restricted to mapped keywords.

    Users without tagged check-ins (or without a model) get an empty profile.
    """
    keep = boosted_keywords(user, model, venues)
    if not keep:
        return BoostedProfile(user.id)
    return _restricted_profile(user, venues, scale, keep, "boost")


@dataclass
class PCAResult:
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing
    projected: np.ndarray  # (n, k)
    mean: np.ndarray
    status: str = "ok"

    @property
    def explained_ratio(self) -> np.ndarray:
        total = self.total_variance
        return self.explained_variance / total if total > 0 else np.zeros_like(self.explained_variance)

    total_variance: float = 0.0


def pca_reduce(X, k: int) -> PCAResult:
    """Principal components of the rows of ``X`` via SVD of the centered data.

    Component signs are fixed so the largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two rows")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} outside 1..{min(n, d)}")
    mean = X.mean(axis=0)
    centered = X - mean
    total = float((centered ** 2).sum() / (n - 1))
    if total <= 1e-300:
        log.warning("PCA on identical rows: zero variance")
        return PCAResult(np.zeros((k, d)), np.zeros(k), np.zeros((n, k)), mean, "degenerate", 0.0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    var = np.zeros(k)
    var[: min(k, len(s))] = (s[:k] ** 2) / (n - 1)
    return PCAResult(comps, var, centered @ comps.T, mean, "ok", total)


def choose_components(X, target: float = 0.9) -> int:
    """Smallest k whose components keep ``target`` of the variance, capped at n - 1."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    cap = max(1, min(n - 1, d))
    centered = X - X.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    var = s ** 2
    if var.sum() <= 0:
        return 1
    k = int(np.searchsorted(np.cumsum(var) / var.sum(), target - 1e-12) + 1)
    return min(k, cap)


def pca_keywords(user: UserRecord, venues: Mapping[str, VenueRecord], target: float = 0.9) -> set[str]:
    """Keyword subset kept by PCA over the user's history keyword indicator rows.

    Keywords are ranked by the variance the retained components reconstruct
    for them (sum_c var_c * loading_cf^2); the top k survive, k being the
    number of retained components.
    """
    rows = [venues[c.venue_id].keywords for c in user.history if c.venue_id in venues]
    vocab = sorted({f for r in rows for f in r})
    if len(rows) < 2 or not vocab:
        return set(vocab)
    col = {f: j for j, f in enumerate(vocab)}
    X = np.zeros((len(rows), len(vocab)))
    for i, r in enumerate(rows):
        X[i, [col[f] for f in r]] = 1.0
    k = choose_components(X, target)
    res = pca_reduce(X, k)
    if res.status != "ok":
        return set()
    salience = res.explained_variance @ (res.components ** 2)
    order = sorted(range(len(vocab)), key=lambda j: (-salience[j], vocab[j]))
    return {vocab[j] for j in order[:k]}


def pca_profile(
    user: UserRecord,
    venues: Mapping[str, VenueRecord],
    scale: RatingScale | str = RatingScale.FIVE,
    target: float = 0.9,
) -> BoostedProfile:
    keep = pca_keywords(user, venues, target)
    if not keep:
        return BoostedProfile(user.id, method="pca")
    return _restricted_profile(user, venues, scale, keep, "pca")
