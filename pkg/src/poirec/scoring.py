"""Frequency-based similarity scores and the review-based opinion score."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import Polarity, RatingScale, UserRecord, VenueRecord, rating_polarity
from .linear import LinearModel, train_hinge

SCORE_FIELDS = ("s_cat", "s_rev", "s_key", "s_boost", "s_ml", "s_crf", "s_svm", "s_pca", "s_cxt")

# Score columns fused by each recommendation model.
MODEL_ROWS = {
    "PK-Boosting": ("s_cat", "s_rev", "s_key", "s_boost", "s_cxt"),
    "UT-ML": ("s_cat", "s_rev", "s_key", "s_ml", "s_cxt"),
    "UT-CRF": ("s_cat", "s_rev", "s_key", "s_crf", "s_cxt"),
    "UT-SVM": ("s_cat", "s_rev", "s_key", "s_svm", "s_cxt"),
    "PK-PCA": ("s_cat", "s_rev", "s_key", "s_pca", "s_cxt"),
    "LinearCatRev": ("s_cat", "s_rev"),
}

_TOKEN = re.compile(r"[^0-9a-z]+")


def frequency_score(pos: Mapping[str, float], neg: Mapping[str, float], items: Iterable[str]) -> float:
    """Sum over candidate items of pos(x) - neg(x); unseen items add nothing."""
    return float(sum(pos.get(x, 0.0) - neg.get(x, 0.0) for x in items))


@dataclass
class ScoreVector:
    """Scores for one (user, candidate) pair.

    ``missing`` names the scores that could not be computed; they hold 0.
    """

    user_id: str
    venue_id: str
    scores: dict[str, float] = field(default_factory=dict)
    missing: frozenset[str] = frozenset()

    def __getattr__(self, name):
        if name in SCORE_FIELDS:
            return self.scores.get(name, 0.0)
        raise AttributeError(name)

    def row(self, columns: Sequence[str]) -> list[float]:
        return [self.scores.get(c, 0.0) for c in columns]

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "venue_id": self.venue_id,
            "scores": {k: self.scores[k] for k in sorted(self.scores)},
            "missing": sorted(self.missing),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreVector":
        scores = {k: float(v) for k, v in data["scores"].items()}
        return cls(str(data["user_id"]), str(data["venue_id"]), scores, frozenset(data.get("missing", ())))


# -- text features ----------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than two characters."""
    return [t for t in _TOKEN.split(text.lower()) if len(t) >= 2]


class TfidfVectorizer:
    """tf = count / document length; idf = ln((1 + N) / (1 + df)) + 1; rows L2-normalized."""

    def __init__(self):
        self.vocabulary: dict[str, int] = {}
        self.idf = np.zeros(0)

    def fit(self, corpus: Sequence[str]) -> "TfidfVectorizer":
        if not corpus:
            raise ValueError("TF-IDF needs a nonempty corpus")
        docs = [set(tokenize(t)) for t in corpus]
        df = Counter(term for d in docs for term in d)
        self.vocabulary = {term: k for k, term in enumerate(sorted(df))}
        n = len(corpus)
        self.idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in sorted(df)])
        return self

    def term_frequencies(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), len(self.vocabulary)))
        for r, text in enumerate(texts):
            tokens = tokenize(text)
            for term, c in Counter(tokens).items():
                k = self.vocabulary.get(term)
                if k is not None:
                    out[r, k] = c / len(tokens)
        return out

    def transform(self, texts: Sequence[str], normalize: bool = True) -> np.ndarray:
        weights = self.term_frequencies(texts) * self.idf
        if normalize:
            norms = np.linalg.norm(weights, axis=1, keepdims=True)
            weights = np.divide(weights, norms, out=np.zeros_like(weights), where=norms > 0)
        return weights

    def to_dict(self) -> dict:
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        return {"terms": terms, "idf": self.idf.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TfidfVectorizer":
        v = cls()
        v.vocabulary = {t: k for k, t in enumerate(data["terms"])}
        v.idf = np.asarray(data["idf"], dtype=float)
        return v


def tfidf_vectorize(corpus: Sequence[str]) -> tuple[list[str], np.ndarray]:
    vec = TfidfVectorizer().fit(corpus)
    return sorted(vec.vocabulary, key=vec.vocabulary.get), vec.transform(corpus)


# -- review-based score -----------------------------------------------------


@dataclass
class ReviewModel:
    vectorizer: TfidfVectorizer | None
    classifier: LinearModel

    @property
    def available(self) -> bool:
        return self.vectorizer is not None and self.classifier.available

    def to_dict(self) -> dict:
        return {
            "vectorizer": self.vectorizer.to_dict() if self.vectorizer else None,
            "classifier": self.classifier.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewModel":
        vec = TfidfVectorizer.from_dict(data["vectorizer"]) if data["vectorizer"] else None
        return cls(vec, LinearModel.from_dict(data["classifier"]))


UNAVAILABLE = ReviewModel(None, LinearModel(np.zeros(0), 0.0, status="unavailable"))


def review_training_set(
    user: UserRecord,
    venues: Mapping[str, VenueRecord],
    scale: RatingScale | str = RatingScale.FIVE,
    max_reviews: int | None = None,
) -> tuple[list[str], list[int]]:
    """Positive reviews of liked venues (+1) and negative reviews of disliked venues (-1)."""
    texts, labels = [], []
    for checkin in user.history:
        venue = venues.get(checkin.venue_id)
        if venue is None:
            continue
        polarity = rating_polarity(checkin.rating, scale)
        if polarity is Polarity.NEUTRAL:
            continue
        for review in venue.reviews[:max_reviews]:
            if rating_polarity(review.rating) is polarity:
                texts.append(review.text)
                labels.append(1 if polarity is Polarity.POSITIVE else -1)
    return texts, labels


def train_review_classifier(
    user: UserRecord,
    venues: Mapping[str, VenueRecord],
    scale: RatingScale | str = RatingScale.FIVE,
    reg: float = 1e-2,
    epochs: int = 20,
    seed: int = 0,
    max_reviews: int | None = None,
) -> ReviewModel:
    texts, labels = review_training_set(user, venues, scale, max_reviews)
    if 1 not in labels or -1 not in labels:
        return UNAVAILABLE
    vec = TfidfVectorizer().fit(texts)
    clf = train_hinge(vec.transform(texts), labels, reg=reg, epochs=epochs, seed=seed)
    return ReviewModel(vec, clf)


def review_score(model: ReviewModel, venue: VenueRecord, max_reviews: int | None = None) -> float | None:
    """Mean decision value over the venue's reviews; None when not computable."""
    reviews = venue.reviews[:max_reviews]
    if not model.available or not reviews:
        return None
    X = model.vectorizer.transform([r.text for r in reviews])
    return float(np.mean(model.classifier.decision(X)))


# -- per-candidate score vector -------------------------------------------------


@dataclass
class ScoringConfig:
    """Which scores to compute and the knobs of the tag-prediction scores."""

    wanted: tuple[str, ...] = SCORE_FIELDS
    theta_ml: float = 0.5
    max_tags: int = 3
    max_reviews: int | None = None


@dataclass
class UserState:
    """Everything learned from one user's history that scoring needs."""

    user: UserRecord
    profiles: "UserProfiles"
    alignment: object = None  # AlignmentModel | None
    boosted: object = None  # BoostedProfile | None
    pca: object = None  # BoostedProfile | None
    taggers: dict = field(default_factory=dict)  # kind -> TaggerModel
    review: ReviewModel = UNAVAILABLE


def score_candidate(
    state: UserState,
    venue: VenueRecord,
    cfg: ScoringConfig | None = None,
    context_model=None,
    table=None,
) -> ScoreVector:
    """Score one candidate venue for one user.

    Scores that cannot be computed are listed in ``missing`` and hold 0, except
    an empty boosted (or PCA) profile, which falls back to the keyword score.
    """
    from .alignment import ml_decode_tags
    from .context import context_score
    from .tagging import predicted_tag_set

    cfg = cfg or ScoringConfig()
    p = state.profiles
    scores: dict[str, float] = {}
    missing: set[str] = set()
    wanted = set(cfg.wanted)

    def put(name, value):
        if name not in wanted:
            return
        if value is None:
            missing.add(name)
            value = 0.0
        scores[name] = float(value)

    s_key = frequency_score(p.pos_key, p.neg_key, venue.keywords)
    put("s_cat", frequency_score(p.pos_cat, p.neg_cat, venue.categories))
    put("s_key", s_key)
    if "s_rev" in wanted:
        put("s_rev", review_score(state.review, venue, cfg.max_reviews))
    for name, prof in (("s_boost", state.boosted), ("s_pca", state.pca)):
        if name not in wanted:
            continue
        if prof is None or prof.empty:
            put(name, s_key)
            missing.add(name)
        else:
            put(name, frequency_score(prof.pos, prof.neg, venue.keywords))
    if "s_ml" in wanted:
        if state.alignment is None:
            put("s_ml", None)
        else:
            tags = ml_decode_tags(state.alignment, venue.keywords, cfg.theta_ml, cfg.max_tags)
            put("s_ml", frequency_score(p.pos_tag, p.neg_tag, tags))
    for name, kind in (("s_crf", "maxent"), ("s_svm", "svm")):
        if name not in wanted:
            continue
        tagger = state.taggers.get(kind)
        if tagger is None:
            put(name, None)
        else:
            put(name, frequency_score(p.pos_tag, p.neg_tag, sorted(predicted_tag_set(tagger, venue.keywords))))
    if "s_cxt" in wanted:
        put("s_cxt", context_score(context_model, table, venue, state.user.context) if table is not None else None)
    return ScoreVector(state.user.id, venue.id, scores, frozenset(missing))
