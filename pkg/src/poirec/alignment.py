"""Personalized keyword-to-tag alignment.

Each user gets a zero-order mapping model between the taste keywords of a
venue (f_1..f_J) and the tags the user attached to it (t_1..t_I). A keyword is
generated by choosing a tag position i in 0..I with probability p(i|I) and
then emitting f with p(f|t_i); position 0 is the NULL tag, which absorbs
keywords that did not motivate any tag. Parameters are fit with EM.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .domain import DomainError

NULL = "<null>"
EPSILON = 1e-6
FORMAT = "poirec.alignment"
VERSION = 1


@dataclass(frozen=True)
class AlignmentPair:
    keywords: tuple[str, ...]
    tags: tuple[str, ...]
    user_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.keywords or not self.tags:
            raise DomainError("alignment pair needs at least one keyword and one tag")
        if any(not x for x in self.keywords + self.tags):
            raise DomainError("alignment pair contains an empty string")


@dataclass(frozen=True)
class Mapping:
    assignments: tuple[int, ...]

    def mapped_positions(self) -> list[int]:
        return [j for j, m in enumerate(self.assignments) if m != 0]


@dataclass
class AlignmentModel:
    """Learned tables for one user.

    ``translation[0]`` is p(.|NULL); ``translation[k + 1]`` is p(.|tags[k]).
    Columns follow ``keywords``. ``position_prior[I][i]`` is p(i|I).
    """

    tags: tuple[str, ...]
    keywords: tuple[str, ...]
    translation: np.ndarray
    position_prior: dict[int, np.ndarray]
    tag_prior: dict[str, float] = field(default_factory=dict)
    length_priors: dict[str, dict[int, float]] = field(default_factory=dict)
    user_id: str = ""
    epsilon: float = EPSILON

    def __post_init__(self):
        self._tag_row = {t: k + 1 for k, t in enumerate(self.tags)}
        self._kw_col = {f: k for k, f in enumerate(self.keywords)}

    def tag_row(self, tag: str | None) -> int | None:
        if tag is None or tag == NULL:
            return 0
        return self._tag_row.get(tag)

    def translation_prob(self, keyword: str, tag: str | None) -> float:
        """p(keyword | tag) with epsilon for unseen or unsupported entries."""
        row = self.tag_row(tag)
        col = self._kw_col.get(keyword)
        if row is None or col is None:
            return self.epsilon
        p = float(self.translation[row, col])
        return p if p > 0.0 else self.epsilon

    def position_probs(self, n_tags: int) -> np.ndarray:
        prior = self.position_prior.get(n_tags)
        if prior is None:
            return np.full(n_tags + 1, 1.0 / (n_tags + 1))
        return prior

    def joint(self, pair: AlignmentPair) -> np.ndarray:
        """Matrix of p(i|I) p(f_j|t_i), shape (I + 1, J)."""
        rows = (None,) + pair.tags
        table = np.array([[self.translation_prob(f, t) for f in pair.keywords] for t in rows])
        return self.position_probs(len(pair.tags))[:, None] * table

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        translation = []
        for row, tag in enumerate((NULL,) + self.tags):
            for col, kw in enumerate(self.keywords):
                p = float(self.translation[row, col])
                if p > 0.0:
                    translation.append([tag, kw, p])
        positions = [
            [i, n, float(p)]
            for n in sorted(self.position_prior)
            for i, p in enumerate(self.position_prior[n])
        ]
        return {
            "format": FORMAT,
            "version": VERSION,
            "user_id": self.user_id,
            "epsilon": self.epsilon,
            "tags": list(self.tags),
            "keywords": list(self.keywords),
            "translation": translation,
            "position_prior": positions,
            "tag_prior": dict(self.tag_prior),
            "length_priors": {k: {str(n): p for n, p in v.items()} for k, v in self.length_priors.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlignmentModel":
        if data.get("format") != FORMAT:
            raise DomainError(f"not an alignment model: format={data.get('format')!r}")
        if data.get("version") != VERSION:
            raise DomainError(f"unsupported alignment model version {data.get('version')!r}")
        tags = tuple(data["tags"])
        keywords = tuple(data["keywords"])
        row = {t: k for k, t in enumerate((NULL,) + tags)}
        col = {f: k for k, f in enumerate(keywords)}
        trans = np.zeros((len(tags) + 1, len(keywords)))
        for tag, kw, p in data["translation"]:
            trans[row[tag], col[kw]] = p
        sizes: dict[int, dict[int, float]] = {}
        for i, n, p in data["position_prior"]:
            sizes.setdefault(int(n), {})[int(i)] = p
        position_prior = {n: np.array([v[i] for i in range(n + 1)]) for n, v in sizes.items()}
        return cls(
            tags=tags,
            keywords=keywords,
            translation=trans,
            position_prior=position_prior,
            tag_prior=dict(data.get("tag_prior", {})),
            length_priors={k: {int(n): p for n, p in v.items()} for k, v in data.get("length_priors", {}).items()},
            user_id=data.get("user_id", ""),
            epsilon=data.get("epsilon", EPSILON),
        )


def _empirical(counter: Counter) -> dict:
    total = sum(counter.values())
    return {k: v / total for k, v in sorted(counter.items())}


def init_model(pairs: Sequence[AlignmentPair], user_id: str = "") -> AlignmentModel:
    """Uniform starting point for EM.

    p(.|t) is uniform over the keywords that co-occur with t; p(.|NULL) is
    uniform over every keyword in the corpus; p(i|I) is uniform over 0..I.
    """
    if not pairs:
        raise DomainError("cannot initialize an alignment model from zero pairs")
    tags = tuple(sorted({t for p in pairs for t in p.tags}))
    keywords = tuple(sorted({f for p in pairs for f in p.keywords}))
    tag_row = {t: k + 1 for k, t in enumerate(tags)}
    kw_col = {f: k for k, f in enumerate(keywords)}

    support = np.zeros((len(tags) + 1, len(keywords)), dtype=bool)
    support[0, :] = True
    for p in pairs:
        cols = [kw_col[f] for f in p.keywords]
        for t in p.tags:
            support[tag_row[t], cols] = True
    trans = support / support.sum(axis=1, keepdims=True)

    lengths = sorted({len(p.tags) for p in pairs})
    position_prior = {n: np.full(n + 1, 1.0 / (n + 1)) for n in lengths}
    return AlignmentModel(
        tags=tags,
        keywords=keywords,
        translation=trans,
        position_prior=position_prior,
        tag_prior=_empirical(Counter(t for p in pairs for t in p.tags)),
        length_priors={
            "I": _empirical(Counter(len(p.tags) for p in pairs)),
            "J": _empirical(Counter(len(p.keywords) for p in pairs)),
        },
        user_id=user_id or pairs[0].user_id,
    )


def e_step_posteriors(model: AlignmentModel, pair: AlignmentPair) -> np.ndarray:
    """gamma[i, j]: posterior that keyword j is generated by tag position i."""
    joint = model.joint(pair)
    denom = joint.sum(axis=0)
    assert np.all(denom > 0.0), "zero posterior denominator despite smoothing"
    return joint / denom


def log_likelihood(model: AlignmentModel, pairs: Iterable[AlignmentPair]) -> float:
    """Sum over pairs and keywords of log sum_i p(i|I) p(f_j|t_i).

    The length terms p(I), p(J) are constant in the parameters and left out.
    """
    return float(sum(np.log(model.joint(p).sum(axis=0)).sum() for p in pairs))


class _Encoded:
    """Flat integer view of a corpus, as consumed by the EM kernel."""

    def __init__(self, model: AlignmentModel, pairs: Sequence[AlignmentPair]):
        kw_col = {f: k for k, f in enumerate(model.keywords)}
        self.sizes = sorted(model.position_prior)
        size_row = {n: r for r, n in enumerate(self.sizes)}
        kw, kw_ptr, tg, tg_ptr, rows = [], [0], [], [0], []
        for p in pairs:
            kw.extend(kw_col[f] for f in p.keywords)
            tg.extend(model.tag_row(t) for t in p.tags)
            kw_ptr.append(len(kw))
            tg_ptr.append(len(tg))
            rows.append(size_row[len(p.tags)])
        as_idx = lambda xs: np.ascontiguousarray(xs, dtype=np.int64)
        self.kw_idx, self.kw_ptr = as_idx(kw), as_idx(kw_ptr)
        self.tag_idx, self.tag_ptr = as_idx(tg), as_idx(tg_ptr)
        self.len_row = as_idx(rows)
        self.max_len = max(self.sizes)

    def pos_matrix(self, model: AlignmentModel) -> np.ndarray:
        out = np.zeros((len(self.sizes), self.max_len + 1))
        for r, n in enumerate(self.sizes):
            out[r, : n + 1] = model.position_prior[n]
        return out


def em_step(model: AlignmentModel, enc: _Encoded, backend: str | None = None) -> tuple[AlignmentModel, float]:
    """One E-step + M-step. Returns the new model and F(old model)."""
    trans = np.ascontiguousarray(model.translation)
    pos = enc.pos_matrix(model)
    count_trans = np.zeros_like(trans)
    count_pos = np.zeros_like(pos)
    loglik = kernels.em_accumulate(
        enc.kw_idx, enc.kw_ptr, enc.tag_idx, enc.tag_ptr, enc.len_row,
        trans, pos, count_trans, count_pos, backend=backend,
    )
    if math.isnan(loglik):
        raise FloatingPointError("zero likelihood for a training keyword")
    new_trans = count_trans / count_trans.sum(axis=1, keepdims=True)
    new_pos = {
        n: count_pos[r, : n + 1] / count_pos[r, : n + 1].sum()
        for r, n in enumerate(enc.sizes)
    }
    new = AlignmentModel(
        tags=model.tags,
        keywords=model.keywords,
        translation=new_trans,
        position_prior=new_pos,
        tag_prior=model.tag_prior,
        length_priors=model.length_priors,
        user_id=model.user_id,
        epsilon=model.epsilon,
    )
    return new, loglik


def em_train(
    pairs: Sequence[AlignmentPair],
    max_iters: int = 100,
    tol: float = 1e-6,
    backend: str | None = None,
    user_id: str = "",
) -> tuple[AlignmentModel, list[float]]:
    """Fit an alignment model with EM, starting from :func:`init_model`.

    ``max_iters`` bounds the number of M-steps. The returned trace holds the
    log-likelihood of each successive parameter set, ending with that of the
    returned model, and is non-decreasing.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    model = init_model(pairs, user_id=user_id)
    enc = _Encoded(model, pairs)
    trace: list[float] = []
    for _ in range(max_iters):
        updated, loglik = em_step(model, enc, backend)
        trace.append(loglik)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
        model = updated
    else:
        trace.append(log_likelihood(model, pairs))
    return model, trace


def best_mapping(model: AlignmentModel, pair: AlignmentPair) -> Mapping:
    """Per-keyword argmax of p(i|I) p(f_j|t_i); ties go to the smaller i.

    The model factorizes over keyword positions, so the per-position argmax is
    the exact most likely mapping.
    """
    return Mapping(tuple(int(i) for i in np.argmax(model.joint(pair), axis=0)))


def ml_decode_tags(
    model: AlignmentModel,
    keywords: Sequence[str],
    theta: float = 0.5,
    max_tags: int = 3,
) -> tuple[str, ...]:
    """Most likely tags for an unseen keyword sequence.

    Each tag is scored s(t) = p(t) * max_j p(f_j|t). Tags whose only support is
    the smoothing floor are dropped; of the rest, up to ``max_tags`` with
    s(t) >= theta * max s are returned, best first (ties by tag name).
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if not keywords or not model.tags:
        return ()
    scores = {}
    for tag in model.tags:
        best = max(model.translation_prob(f, tag) for f in keywords)
        if best > model.epsilon:
            scores[tag] = model.tag_prior.get(tag, 0.0) * best
    if not scores:
        return ()
    top = max(scores.values())
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(t for t, s in ranked[:max_tags] if s >= theta * top)


def user_pairs(user, venues) -> list[AlignmentPair]:
    """Alignment pairs from a user's tagged check-ins (venues lacking keywords skipped)."""
    out = []
    for checkin in user.history:
        venue = venues.get(checkin.venue_id)
        if checkin.tags and venue is not None and venue.keywords:
            out.append(AlignmentPair(venue.keywords, checkin.tags, user.id))
    return out


def train_user_model(user, venues, max_iters: int = 100, tol: float = 1e-6, backend=None) -> AlignmentModel | None:
    """Per-user model over the user's tagged check-ins; None if there are none."""
    pairs = user_pairs(user, venues)
    if not pairs:
        return None
    model, _ = em_train(pairs, max_iters=max_iters, tol=tol, backend=backend, user_id=user.id)
    return model
