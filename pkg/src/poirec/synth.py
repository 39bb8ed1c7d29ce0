"""Synthetic datasets with planted preferences.

The generative story:

* every venue has 1-3 categories, about 8.7 Zipf-distributed taste keywords
  and a latent quality ``q`` in [-1, 1];
* a venue's reviews are positive with probability logistic(3 q) and draw
  words from a matching sentiment pool;
* every user prefers three categories, dislikes two, and owns 2-5 preferred
  keywords, each tied to a personal tag (the planted translation table);
* utility = 1 * [preferred category] - 1 * [disliked category]
  + 0.5 * [preferred keyword] + 1.2 q + noise, thresholded into ratings;
* a visited venue holding a preferred keyword is tagged with its tag with
  probability ``tag_prob``;
* candidate relevance adds +-0.6 for contextual (in)appropriateness, judged
  by the sign of the summed per-dimension means of the feature table.

With ``noise = 0`` a venue outside the preferred categories tops out at
0.5 + 1.2 = 1.7 < the 1.75 liking threshold.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .context import AppropriatenessExample, ContextFeatureTable, context_feature_vector
from .domain import (
    CONTEXT_VALUES,
    DURATIONS,
    GROUPS,
    TRIP_TYPES,
    CheckIn,
    ContextSpec,
    Review,
    UserRecord,
    VenueRecord,
)
from .evaluation import Judgments
from .io import user_to_dict, venue_to_dict, write_candidates, write_jsonl, write_qrels

CATEGORIES = (
    "american-restaurant", "aquarium", "art-gallery", "bakery", "bar", "beach", "bookstore", "brewery",
    "cafe", "gym", "hotel", "italian-restaurant", "museum", "night-market", "nightclub", "park",
    "pizza-place", "pub", "shopping-mall", "steakhouse", "sushi-restaurant", "theater", "wine-bar", "zoo",
)
POSITIVE_WORDS = (
    "great", "delicious", "friendly", "amazing", "lovely", "excellent", "tasty", "cozy", "perfect", "fantastic",
    "fresh", "wonderful", "helpful", "charming", "superb", "enjoyed", "recommend", "best", "pleasant", "fun",
)
NEGATIVE_WORDS = (
    "awful", "rude", "dirty", "slow", "bland", "terrible", "overpriced", "cold", "noisy", "disappointing",
    "horrible", "stale", "worst", "mediocre", "crowded", "greasy", "unfriendly", "bad", "poor", "avoid",
)
FILLER_WORDS = (
    "the", "place", "food", "service", "we", "went", "there", "with", "and", "was", "staff", "menu", "table",
    "evening", "visit", "drinks", "area", "time", "ordered", "price", "night", "music", "room", "view",
    "lunch", "dinner", "friends", "family", "again", "located", "street", "downtown", "parking", "wait",
    "coffee", "seat", "sunday", "friday", "weekend", "corner",
)

W_CAT, W_DISLIKE, W_KEY, W_QUALITY, W_CONTEXT = 1.0, 1.0, 0.5, 1.2, 0.6
LIKE_AT = 1.75
# Rating cut points on utility: below the first is 1, at or above the last is 5.
CUTS = (-0.25, 0.5, LIKE_AT, LIKE_AT + 0.5)
# Keyword popularity follows 1 / rank**ZIPF. Preferred keywords come from
# PREF_RANGE of that ranking, N_PREF (half-open) of them per user; each appears
# in KW_QUOTA history venues per home city.
ZIPF = 0.8
PREF_RANGE = (5, 100)
N_PREF = (2, 6)
KW_QUOTA = 2
CAND_KW_SHARE = 0.25


@dataclass
class SynthConfig:
    n_users: int = 200
    n_venues: int = 1000
    n_cities: int = 5
    n_keywords: int = 600
    n_tags: int = 60
    history_size: int = 40
    candidates_per_user: int = 30
    reviews_per_venue: int = 10
    noise: float = 0.3
    tag_prob: float = 0.9
    n_appropriateness: int = 2000
    seed: int = 7

    def __post_init__(self):
        if self.n_users < 10 or self.n_venues < 50:
            raise ValueError("need at least 10 users and 50 venues")
        if self.n_cities < 3:
            raise ValueError("need at least 3 cities (two for history, one for candidates)")


@dataclass
class SynthData:
    venues: dict[str, VenueRecord]
    users: dict[str, UserRecord]
    candidates: dict[str, list[str]]
    judgments: Judgments
    table: ContextFeatureTable
    appropriateness: list[AppropriatenessExample]
    planted: dict = field(default_factory=dict)


def rating_from_utility(u: float) -> int:
    return 1 + int(np.searchsorted(CUTS, u, side="right"))


def _review(rng, positive: bool) -> Review:
    if rng.random() < 0.1:
        rating = 3
    else:
        rating = int(rng.choice((4, 5))) if positive else int(rng.choice((1, 2)))
    own, other = (POSITIVE_WORDS, NEGATIVE_WORDS) if positive else (NEGATIVE_WORDS, POSITIVE_WORDS)
    words = []
    for _ in range(int(rng.integers(8, 15))):
        r = rng.random()
        pool = own if r < 0.35 else (other if r < 0.40 else FILLER_WORDS)
        words.append(pool[int(rng.integers(len(pool)))])
    return Review(rating, " ".join(words))


def _appropriate(table, categories, ctx) -> float:
    return float(context_feature_vector(table, categories, ctx)[[0, 3, 6]].sum())


def _random_context(rng) -> ContextSpec:
    return ContextSpec(
        DURATIONS[int(rng.integers(len(DURATIONS)))],
        GROUPS[int(rng.integers(len(GROUPS)))],
        TRIP_TYPES[int(rng.integers(len(TRIP_TYPES)))],
    )


def generate(cfg: SynthConfig | None = None) -> SynthData:
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    keywords = [f"taste-{i:03d}" for i in range(cfg.n_keywords)]
    tag_pool = [f"tag-{i:02d}" for i in range(cfg.n_tags)]
    cities = [f"city-{i}" for i in range(cfg.n_cities)]
    kw_weight = 1.0 / np.arange(1, cfg.n_keywords + 1) ** ZIPF
    kw_weight /= kw_weight.sum()

    # Venues.
    venues: dict[str, VenueRecord] = {}
    quality: dict[str, float] = {}
    for n in range(cfg.n_venues):
        vid = f"v{n:05d}"
        n_cat = 1 + int(rng.binomial(2, 0.3))
        cats = tuple(CATEGORIES[i] for i in rng.choice(len(CATEGORIES), n_cat, replace=False))
        n_kw = min(cfg.n_keywords, 5 + int(rng.poisson(3.7)))
        kws = tuple(keywords[i] for i in rng.choice(cfg.n_keywords, n_kw, replace=False, p=kw_weight))
        q = float(rng.uniform(-1.0, 1.0))
        p_pos = 1.0 / (1.0 + np.exp(-3.0 * q))
        reviews = tuple(_review(rng, bool(rng.random() < p_pos)) for _ in range(cfg.reviews_per_venue))
        venues[vid] = VenueRecord(vid, cities[n % cfg.n_cities], cats, kws, reviews, name=f"venue {n}")
        quality[vid] = q
    by_city: dict[str, list[str]] = {c: [] for c in cities}
    for vid, v in venues.items():
        by_city[v.city].append(vid)

    # Context feature table: F_app for every (category, context value).
    table = ContextFeatureTable(
        {(c, x): round(float(rng.uniform(-1.0, 1.0)), 4) for c in CATEGORIES for x in CONTEXT_VALUES}
    )

    users: dict[str, UserRecord] = {}
    candidates: dict[str, list[str]] = {}
    labels: dict[tuple[str, str], int] = {}
    planted = {"tags": {}, "preferred_categories": {}, "disliked_categories": {}, "quality": quality}
    mid = keywords[PREF_RANGE[0]: min(cfg.n_keywords, PREF_RANGE[1])]
    for n in range(cfg.n_users):
        uid = f"u{n:04d}"
        cat_idx = rng.choice(len(CATEGORIES), 5, replace=False)
        liked_cats = {CATEGORIES[i] for i in cat_idx[:3]}
        disliked_cats = {CATEGORIES[i] for i in cat_idx[3:]}
        n_pref = int(rng.integers(*N_PREF))
        pref_kw = [mid[i] for i in rng.choice(len(mid), n_pref, replace=False)]
        tags = [tag_pool[i] for i in rng.choice(len(tag_pool), n_pref, replace=False)]
        tag_of = dict(zip(pref_kw, tags))
        ctx = _random_context(rng)

        def utility(vid, noisy=True):
            v = venues[vid]
            u = W_CAT * bool(liked_cats & set(v.categories)) - W_DISLIKE * bool(disliked_cats & set(v.categories))
            u += W_KEY * bool(tag_of.keys() & set(v.keywords)) + W_QUALITY * quality[vid]
            return u + (float(rng.normal(0.0, cfg.noise)) if noisy and cfg.noise > 0 else 0.0)

        city_idx = rng.choice(cfg.n_cities, 3, replace=False)
        home = [cities[i] for i in city_idx[:2]]
        test_city = cities[city_idx[2]]

        def pick(pool, k, for_history):
            """k venues from pool, biased toward the user's preferences.

            History draws KW_QUOTA venues per preferred keyword and 30% from
            preferred categories; candidates draw CAND_KW_SHARE holding any
            preferred keyword and 40% from preferred categories. The rest is
            uniform.
            """
            pool = sorted(pool)
            cat_pool = [v for v in pool if liked_cats & set(venues[v].categories)]
            if for_history:
                sources = [(KW_QUOTA, [v for v in pool if f in venues[v].keywords]) for f in pref_kw]
                sources.append((round(0.3 * k), cat_pool))
            else:
                kw_pool = [v for v in pool if tag_of.keys() & set(venues[v].keywords)]
                sources = [(round(0.4 * k), cat_pool), (round(CAND_KW_SHARE * k), kw_pool)]
            sources.append((k, pool))
            chosen: list[str] = []
            for want, src in sources:
                avail = [v for v in src if v not in chosen]
                take = min(want, len(avail), k - len(chosen))
                chosen.extend(avail[int(i)] for i in (rng.choice(len(avail), take, replace=False) if take > 0 else ()))
            return chosen

        per_city = cfg.history_size // 2
        history = []
        for city in home:
            for vid in pick(by_city[city], per_city, True):
                v = venues[vid]
                rating = rating_from_utility(utility(vid))
                vtags = tuple(tag_of[f] for f in v.keywords if f in tag_of and rng.random() < cfg.tag_prob)
                history.append(CheckIn(vid, rating, vtags))
        users[uid] = UserRecord(uid, tuple(history), ctx)

        cands = pick(by_city[test_city], cfg.candidates_per_user, False)
        candidates[uid] = sorted(cands)
        for vid in cands:
            u = utility(vid)
            u += W_CONTEXT if _appropriate(table, venues[vid].categories, ctx) > 0 else -W_CONTEXT
            labels[(uid, vid)] = rating_from_utility(u) - 3

        planted["tags"][uid] = {t: f for f, t in tag_of.items()}
        planted["preferred_categories"][uid] = sorted(liked_cats)
        planted["disliked_categories"][uid] = sorted(disliked_cats)

    # Appropriateness examples: sign of the summed means, with a margin.
    examples: list[AppropriatenessExample] = []
    while len(examples) < cfg.n_appropriateness:
        n_cat = 1 + int(rng.binomial(2, 0.3))
        cats = tuple(CATEGORIES[i] for i in rng.choice(len(CATEGORIES), n_cat, replace=False))
        ctx = _random_context(rng)
        m = _appropriate(table, cats, ctx)
        if abs(m) >= 0.25:
            examples.append(AppropriatenessExample(cats, ctx, m > 0))

    planted["config"] = asdict(cfg)
    return SynthData(venues, users, candidates, Judgments(labels, "graded"), table, examples, planted)


FILES = {
    "venues": "venues.jsonl",
    "users": "users.jsonl",
    "candidates": "candidates.jsonl",
    "qrels": "qrels.txt",
    "features": "context_features.csv",
    "appropriateness": "appropriateness.jsonl",
    "planted": "planted.json",
}


def write_dataset(data: SynthData, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in FILES.items()}
    write_jsonl(paths["venues"], (venue_to_dict(v) for _, v in sorted(data.venues.items())))
    write_jsonl(paths["users"], (user_to_dict(u) for _, u in sorted(data.users.items())))
    write_candidates(paths["candidates"], data.candidates)
    write_qrels(paths["qrels"], data.judgments)
    data.table.write_csv(paths["features"])
    write_jsonl(paths["appropriateness"], (e.to_dict() for e in data.appropriateness))
    paths["planted"].write_text(json.dumps(data.planted, sort_keys=True, indent=1) + "\n", encoding="utf8")
    return paths


def synth_generate(out_dir, cfg: SynthConfig | None = None) -> dict[str, Path]:
    """Generate a dataset and write it under ``out_dir``."""
    return write_dataset(generate(cfg), out_dir)


def planted_tagging_corpus(n_tokens: int = 5000, n_keywords: int = 80, n_tags: int = 12, seed: int = 0):
    """Noise-free labeled sequences for tagger evaluation.

    Each keyword maps deterministically to one tag or to "null" (half of the
    vocabulary). Returns (sequences, alignment pairs, mapping).
    """
    from .alignment import AlignmentPair
    from .tagging import NULL_LABEL, LabeledSequence

    rng = np.random.default_rng(seed)
    vocab = [f"taste-{i:03d}" for i in range(n_keywords)]
    tags = [f"tag-{i:02d}" for i in range(n_tags)]
    mapping = {f: (tags[i % n_tags] if i < n_keywords // 2 else NULL_LABEL) for i, f in enumerate(vocab)}
    seqs, pairs, count = [], [], 0
    while count < n_tokens:
        length = min(int(rng.integers(4, 11)), n_tokens - count)
        toks = tuple(vocab[i] for i in rng.choice(n_keywords, length, replace=False))
        labels = tuple(mapping[f] for f in toks)
        seqs.append(LabeledSequence(toks, labels))
        tagset = tuple(dict.fromkeys(l for l in labels if l != NULL_LABEL))
        pairs.append(AlignmentPair(toks, tagset) if tagset else None)
        count += length
    return seqs, pairs, mapping
