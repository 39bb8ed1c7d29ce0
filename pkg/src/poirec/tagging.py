"""Tag prediction as zero-order sequence labeling.

Alignments turn every tagged venue into a labeled keyword sequence (keywords
mapped to the NULL tag get the label "null"). With only the current keyword
as a feature and independent labels, a linear-chain CRF normalizes per
position, i.e. it is multinomial logistic regression per token; that is the
"maxent" tagger here. The "svm" tagger is one-vs-rest linear hinge models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from .alignment import AlignmentModel, AlignmentPair, best_mapping
from .domain import DomainError, UserRecord, VenueRecord
from .linear import train_hinge

NULL_LABEL = "null"
KINDS = ("maxent", "svm")
FORMAT = "poirec.tagger"
VERSION = 1


@dataclass(frozen=True)
class LabeledSequence:
    tokens: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.tokens) != len(self.labels):
            raise DomainError("tokens and labels differ in length")


def derive_labeled_sequences(
    user: UserRecord, model: AlignmentModel | None, venues: Mapping[str, VenueRecord]
) -> list[LabeledSequence]:
    out = []
    if model is None:
        return out
    for checkin in user.tagged():
        venue = venues.get(checkin.venue_id)
        if venue is None or not venue.keywords:
            continue
        pair = AlignmentPair(venue.keywords, checkin.tags, user.id)
        out.append(label_pair(pair, best_mapping(model, pair).assignments))
    return out


def label_pair(pair: AlignmentPair, assignments: Sequence[int]) -> LabeledSequence:
    labels = tuple(pair.tags[m - 1] if m else NULL_LABEL for m in assignments)
    return LabeledSequence(pair.keywords, labels)


@dataclass
class TaggerModel:
    """Per-label weights over token identity; the last column is the bias."""

    kind: str
    labels: tuple[str, ...]
    features: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        self._col = {f: k for k, f in enumerate(self.features)}

    def scores(self, tokens: Sequence[str]) -> np.ndarray:
        bias = self.weights[:, -1]
        out = np.tile(bias, (len(tokens), 1))
        for r, tok in enumerate(tokens):
            k = self._col.get(tok)
            if k is not None:
                out[r] += self.weights[:, k]
        return out

    def posteriors(self, tokens: Sequence[str]) -> np.ndarray:
        return softmax(self.scores(tokens), axis=1)

    def predict(self, tokens: Sequence[str]) -> tuple[str, ...]:
        if not tokens:
            return ()
        return tuple(self.labels[i] for i in np.argmax(self.scores(tokens), axis=1))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "kind": self.kind,
            "labels": list(self.labels),
            "features": list(self.features),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaggerModel":
        if data.get("format") != FORMAT or data.get("version") != VERSION:
            raise DomainError("unsupported tagger model file")
        return cls(data["kind"], tuple(data["labels"]), tuple(data["features"]), np.asarray(data["weights"], dtype=float))


def _vocab(sequences):
    labels = sorted({l for s in sequences for l in s.labels} - {NULL_LABEL})
    if any(NULL_LABEL in s.labels for s in sequences):
        labels.insert(0, NULL_LABEL)
    features = sorted({t for s in sequences for t in s.tokens})
    return tuple(labels), tuple(features)


def _train_maxent(sequences, labels, features, reg, epochs):
    lab = {l: k for k, l in enumerate(labels)}
    col = {f: k for k, f in enumerate(features)}
    L, V = len(labels), len(features)
    counts = np.zeros((V, L))
    for s in sequences:
        for tok, l in zip(s.tokens, s.labels):
            counts[col[tok], lab[l]] += 1
    per_token = counts.sum(axis=1)
    n = per_token.sum()

    def objective(theta):
        W = theta.reshape(L, V + 1)
        Z = W[:, :V].T + W[:, V]  # (V, L)
        logp = log_softmax(Z, axis=1)
        loss = -(counts * logp).sum() / n + 0.5 * reg * (W[:, :V] ** 2).sum()
        resid = (per_token[:, None] * np.exp(logp) - counts) / n  # (V, L)
        grad = np.empty_like(W)
        grad[:, :V] = resid.T + reg * W[:, :V]
        grad[:, V] = resid.sum(axis=0)
        return loss, grad.ravel()

    res = minimize(objective, np.zeros(L * (V + 1)), jac=True, method="L-BFGS-B",
                   options={"maxiter": max(epochs, 1), "gtol": 1e-10, "ftol": 1e-14})
    return res.x.reshape(L, V + 1)


def _train_svm(sequences, labels, features, reg, epochs, seed):
    col = {f: k for k, f in enumerate(features)}
    tokens = [t for s in sequences for t in s.tokens]
    gold = np.array([l for s in sequences for l in s.labels])
    X = np.zeros((len(tokens), len(features)))
    X[np.arange(len(tokens)), [col[t] for t in tokens]] = 1.0
    W = np.zeros((len(labels), len(features) + 1))
    for k, label in enumerate(labels):
        y = np.where(gold == label, 1.0, -1.0)
        clf = train_hinge(X, y, reg=reg, epochs=epochs, seed=seed + k)
        W[k, :-1] = clf.weights
        W[k, -1] = clf.bias
    return W


def train_tagger(
    sequences: Sequence[LabeledSequence],
    kind: str = "maxent",
    reg: float = 1e-4,
    epochs: int = 200,
    seed: int = 0,
) -> TaggerModel:
    """Fit a zero-order tagger.

    ``maxent`` minimizes L2-regularized mean cross-entropy with L-BFGS
    (``epochs`` caps the iterations); ``svm`` trains one hinge model per label
    with seeded stochastic subgradient. A single-label corpus gives a
    constant predictor.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown tagger kind {kind!r}")
    if not sequences or not any(s.tokens for s in sequences):
        raise DomainError("need at least one nonempty labeled sequence")
    if reg <= 0:
        raise ValueError("regularization must be positive")
    labels, features = _vocab(sequences)
    if len(labels) == 1:
        W = np.zeros((1, len(features) + 1))
    elif kind == "maxent":
        W = _train_maxent(sequences, labels, features, reg, epochs)
    else:
        W = _train_svm(sequences, labels, features, reg, epochs, seed)
    return TaggerModel(kind, labels, features, W)


def predict_tags(model: TaggerModel, tokens: Sequence[str]) -> tuple[str, ...]:
    return model.predict(tokens)


def predicted_tag_set(model: TaggerModel, tokens: Sequence[str]) -> set[str]:
    return {l for l in model.predict(tokens) if l != NULL_LABEL}


def tagger_metrics(pred: Sequence[LabeledSequence], gold: Sequence[LabeledSequence]) -> tuple[float, float, float]:
    """Precision, recall and F-measure over non-null labels.

    A non-null prediction is a true positive when it equals the gold label and
    a false positive otherwise; a non-null gold label not predicted exactly is
    a false negative. Empty denominators give 0.
    """
    if len(pred) != len(gold):
        raise DomainError("prediction and gold corpora differ in length")
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        if len(p.labels) != len(g.labels):
            raise DomainError("sequence length mismatch")
        for pl, gl in zip(p.labels, g.labels):
            if pl != NULL_LABEL:
                if pl == gl:
                    tp += 1
                else:
                    fp += 1
            if gl != NULL_LABEL and pl != gl:
                fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f
