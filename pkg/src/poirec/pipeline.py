"""End-to-end experiment runner.

Stages run in order: profiles, alignment, boosting and tag prediction,
scoring, learning to rank (cross-validated over users), optional context
re-ranking, evaluation. Every stage can serialize its output.
"""

from __future__ import annotations

import configparser
import json
import logging
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .alignment import train_user_model
from .boosting import boost_keywords, pca_profile
from .context import train_appropriateness
from .domain import CheckIn, RatingScale, UserRecord, VenueRecord, build_profiles
from .evaluation import Judgments, kfold_split, per_user_metrics, summarize
from .io import Dataset, format_run, ingest, write_jsonl
from .ranking import KINDS as RANKER_KINDS
from .ranking import RankGroup, RankingModel, rank_candidates, rerank_with_context, train_ranker
from .scoring import (
    MODEL_ROWS,
    SCORE_FIELDS,
    ScoreVector,
    ScoringConfig,
    UserState,
    score_candidate,
    train_review_classifier,
)
from .synth import FILES
from .tagging import derive_labeled_sequences, train_tagger

log = logging.getLogger(__name__)

KEYWORD_SCORES = ("s_key", "s_boost", "s_ml", "s_crf", "s_svm", "s_pca")
REVIEW_SCORES = ("s_rev",)


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


@dataclass
class PipelineConfig:
    data_dir: str | None = None
    venues: str | None = None
    users: str | None = None
    candidates: str | None = None
    qrels: str | None = None
    features: str | None = None
    appropriateness: str | None = None
    out_dir: str | None = None
    model: str = "PK-Boosting"
    ranker: str = "listnet"
    context_mode: str = "fusion"
    lam: float = 1.0
    epsilon: float = 1e-6
    theta_ml: float = 0.5
    max_tags: int = 3
    alpha: float | None = None
    em_iters: int = 100
    review_reg: float = 1e-2
    tagger_reg: float = 1e-4
    context_reg: float = 1e-3
    context_train_fraction: float = 1.0
    tagger_scope: str = "user"
    lr: float = 0.05
    epochs: int = 200
    restarts: int = 3
    metric: str = "P@5"
    folds: int = 5
    k: int = 5
    seed: int = 0
    history_limit: int | None = None
    history_order: str | None = None
    use_keywords: bool = True
    use_reviews: bool = True
    ablate: tuple[str, ...] = ()
    run_tag: str = "poirec"

    def __post_init__(self):
        if self.model not in MODEL_ROWS:
            raise ConfigError(f"unknown model row {self.model!r}; choose from {sorted(MODEL_ROWS)}")
        if self.ranker not in RANKER_KINDS:
            raise ConfigError(f"unknown ranker {self.ranker!r}")
        if self.context_mode not in ("fusion", "rerank"):
            raise ConfigError("context_mode must be fusion or rerank")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if self.history_order not in (None, "sequential", "interleaved"):
            raise ConfigError("history_order must be sequential or interleaved")
        if self.tagger_scope not in ("user", "pooled"):
            raise ConfigError("tagger_scope must be user or pooled")
        if self.history_limit is not None and self.history_limit < 1:
            raise ConfigError("history_limit must be positive")
        if not 0.0 < self.context_train_fraction <= 1.0:
            raise ConfigError("context_train_fraction must lie in (0, 1]")
        self.ablate = tuple(self.ablate)
        bad = set(self.ablate) - set(SCORE_FIELDS)
        if bad:
            raise ConfigError(f"unknown score(s) to ablate: {sorted(bad)}")

    def path(self, name: str) -> Path | None:
        explicit = getattr(self, name)
        if explicit:
            return Path(explicit)
        if self.data_dir:
            p = Path(self.data_dir) / FILES[name]
            return p if p.exists() or name in ("venues", "users") else None
        return None

    @property
    def columns(self) -> tuple[str, ...]:
        """Fusion columns after score ablation, source removal and context mode."""
        cols = [c for c in MODEL_ROWS[self.model] if c not in self.ablate]
        if not self.use_keywords:
            cols = [c for c in cols if c not in KEYWORD_SCORES]
        if not self.use_reviews:
            cols = [c for c in cols if c not in REVIEW_SCORES]
        if self.context_mode == "rerank":
            cols = [c for c in cols if c != "s_cxt"]
        return tuple(cols)


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _convert(name: str, text: str):
    default = PipelineConfig.__dataclass_fields__[name].default
    text = text.strip()
    if name == "ablate":
        return tuple(t.strip() for t in text.split(",") if t.strip())
    if text.lower() in ("", "none") and default is None:
        return None
    if name in ("history_limit",) or isinstance(default, bool) is False and isinstance(default, int):
        if not isinstance(default, float):
            return int(text)
    if isinstance(default, bool):
        return _to_bool(text)
    if isinstance(default, float) or name == "alpha":
        return float(text)
    return text


def load_config(path=None, overrides: Mapping[str, object] | None = None) -> PipelineConfig:
    """Read a ``key = value`` file (no sections) and apply overrides; overrides win."""
    values: dict[str, object] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string("[pipeline]\n" + Path(path).read_text(encoding="utf8"), source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        known = {f.name for f in fields(PipelineConfig)}
        for key, text in parser["pipeline"].items():
            name = key.replace("-", "_")
            if name == "lambda":
                name = "lam"
            if name not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            try:
                values[name] = _convert(name, text)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key}: {exc}") from None
        base = Path(path).parent
        for name in ("data_dir", "venues", "users", "candidates", "qrels", "features", "appropriateness", "out_dir"):
            if isinstance(values.get(name), str) and not Path(values[name]).is_absolute():
                values[name] = str(base / values[name])
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return PipelineConfig(**values)


# -- data preparation -----------------------------------------------------------


def load_dataset(cfg: PipelineConfig) -> Dataset:
    for name in ("venues", "users"):
        p = cfg.path(name)
        if p is None or not p.exists():
            raise FileNotFoundError(f"{name} file not found: {p}")
    opt = {name: cfg.path(name) for name in ("candidates", "qrels", "features", "appropriateness")}
    for name, p in opt.items():
        if getattr(cfg, name) and not p.exists():
            raise FileNotFoundError(f"{name} file not found: {p}")
    return ingest(cfg.path("venues"), cfg.path("users"), opt["candidates"], opt["qrels"], opt["features"], opt["appropriateness"])


def order_history(user: UserRecord, venues: Mapping[str, VenueRecord], order: str | None, seed: int = 0) -> UserRecord:
    """Reorder a history by city.

    ``sequential`` lists every check-in of the first city before the second;
    ``interleaved`` alternates cities. Check-ins are shuffled within each city.
    """
    if order is None:
        return user
    rng = np.random.default_rng([seed, zlib.crc32(user.id.encode())])
    by_city: dict[str, list[CheckIn]] = {}
    for c in user.history:
        by_city.setdefault(venues[c.venue_id].city, []).append(c)
    lists = []
    for city in by_city:
        items = by_city[city]
        lists.append([items[i] for i in rng.permutation(len(items))])
    if order == "sequential":
        history = [c for lst in lists for c in lst]
    else:
        history = []
        for i in range(max(map(len, lists), default=0)):
            history.extend(lst[i] for lst in lists if i < len(lst))
    return UserRecord(user.id, tuple(history), user.context)


def limit_history(user: UserRecord, limit: int | None) -> UserRecord:
    if limit is None:
        return user
    return UserRecord(user.id, user.history[:limit], user.context)


def needed_scores(columns: Iterable[str], context_mode: str = "fusion") -> tuple[str, ...]:
    wanted = set(columns)
    if context_mode == "rerank":
        wanted.add("s_cxt")
    return tuple(f for f in SCORE_FIELDS if f in wanted)


def prepare_user(
    user: UserRecord,
    venues: Mapping[str, VenueRecord],
    cfg: PipelineConfig,
    wanted: Sequence[str],
    scale: RatingScale = RatingScale.FIVE,
    pooled_taggers: Mapping | None = None,
) -> UserState:
    """Profiles, alignment, boosting, taggers and review model for one user."""
    wanted = set(wanted)
    profiles = build_profiles(user, venues, scale)
    state = UserState(user, profiles)
    needs_alignment = wanted & {"s_boost", "s_ml", "s_crf", "s_svm"}
    if needs_alignment:
        model = train_user_model(user, venues, max_iters=cfg.em_iters)
        if model is not None:
            model.epsilon = cfg.epsilon
        state.alignment = model
    if "s_boost" in wanted:
        state.boosted = boost_keywords(user, state.alignment, venues, scale)
    if "s_pca" in wanted:
        state.pca = pca_profile(user, venues, scale)
    kinds = [k for s, k in (("s_crf", "maxent"), ("s_svm", "svm")) if s in wanted]
    if kinds:
        if pooled_taggers is not None:
            state.taggers = {k: pooled_taggers[k] for k in kinds if k in pooled_taggers}
        else:
            seqs = derive_labeled_sequences(user, state.alignment, venues)
            if seqs:
                state.taggers = {k: train_tagger(seqs, k, reg=cfg.tagger_reg, seed=cfg.seed) for k in kinds}
    if "s_rev" in wanted:
        state.review = train_review_classifier(user, venues, scale, reg=cfg.review_reg, seed=cfg.seed)
    return state


def train_pooled_taggers(dataset: Dataset, cfg: PipelineConfig, kinds: Sequence[str]):
    seqs = []
    for _, user in sorted(dataset.users.items()):
        model = train_user_model(user, dataset.venues, max_iters=cfg.em_iters)
        seqs.extend(derive_labeled_sequences(user, model, dataset.venues))
    if not seqs:
        return {}
    return {k: train_tagger(seqs, k, reg=cfg.tagger_reg, seed=cfg.seed) for k in kinds}


def train_context_model(dataset: Dataset, cfg: PipelineConfig):
    """Appropriateness classifier on a seeded fraction of the examples (None if unavailable)."""
    if dataset.table is None or not dataset.appropriateness:
        return None
    examples = dataset.appropriateness
    if cfg.context_train_fraction < 1.0:
        n = max(1, int(round(cfg.context_train_fraction * len(examples))))
        idx = np.sort(np.random.default_rng(cfg.seed).permutation(len(examples))[:n])
        examples = [examples[i] for i in idx]
    return train_appropriateness(examples, dataset.table, reg=cfg.context_reg, seed=cfg.seed)


@dataclass
class ScoredData:
    vectors: dict[str, list[ScoreVector]]
    states: dict[str, UserState] = field(default_factory=dict)
    context_model: object = None


def score_dataset(dataset: Dataset, cfg: PipelineConfig, wanted: Sequence[str]) -> ScoredData:
    """Score every candidate of every user with a candidate list."""
    users = {}
    for uid in sorted(dataset.candidates):
        user = order_history(dataset.users[uid], dataset.venues, cfg.history_order, cfg.seed)
        users[uid] = limit_history(user, cfg.history_limit)
    pooled = None
    kinds = [k for s, k in (("s_crf", "maxent"), ("s_svm", "svm")) if s in wanted]
    if kinds and cfg.tagger_scope == "pooled":
        pooled = train_pooled_taggers(Dataset(dataset.venues, users), cfg, kinds)
    context_model = train_context_model(dataset, cfg) if "s_cxt" in wanted else None
    scfg = ScoringConfig(wanted=tuple(wanted), theta_ml=cfg.theta_ml, max_tags=cfg.max_tags)
    vectors, states = {}, {}
    for uid, user in users.items():
        state = prepare_user(user, dataset.venues, cfg, wanted, dataset.scale, pooled)
        states[uid] = state
        vectors[uid] = [
            score_candidate(state, dataset.venues[vid], scfg, context_model, dataset.table)
            for vid in dataset.candidates[uid]
        ]
    return ScoredData(vectors, states, context_model)


# -- fusion -------------------------------------------------------------------


def make_groups(vectors: Mapping[str, Sequence[ScoreVector]], columns: Sequence[str], judgments: Judgments | None = None):
    groups = {}
    for uid, vs in sorted(vectors.items()):
        X = np.array([v.row(columns) for v in vs], dtype=float).reshape(len(vs), len(columns))
        y = None
        if judgments is not None:
            y = np.array([judgments.get(uid, v.venue_id) if judgments.get(uid, v.venue_id) is not None else 0 for v in vs])
        groups[uid] = RankGroup(uid, [v.venue_id for v in vs], X, y)
    return groups


def _training_group(g: RankGroup, judgments: Judgments) -> RankGroup:
    """Only the judged rows of a group are used for training."""
    keep = [i for i, v in enumerate(g.venue_ids) if judgments.get(g.user_id, v) is not None]
    return RankGroup(g.user_id, [g.venue_ids[i] for i in keep], g.X[keep], g.y[keep])


def fit_ranker(groups: Sequence[RankGroup], cfg: PipelineConfig, judgments: Judgments, kind: str | None = None) -> RankingModel:
    kind = kind or cfg.ranker
    train = [_training_group(g, judgments) for g in groups]
    train = [g for g in train if len(g.venue_ids)]
    return train_ranker(
        kind, train, cfg_columns(cfg, kind), lr=cfg.lr, epochs=cfg.epochs, seed=cfg.seed,
        metric=cfg.metric, restarts=cfg.restarts, graded=judgments.scale == "graded", alpha=cfg.alpha,
    )


def cfg_columns(cfg: PipelineConfig, kind: str | None = None) -> tuple[str, ...]:
    return cfg.columns


def cross_validated_ranking(
    vectors: Mapping[str, Sequence[ScoreVector]],
    cfg: PipelineConfig,
    judgments: Judgments,
) -> tuple[dict[str, list[tuple[str, float]]], list[RankingModel]]:
    """Rank each judged user with a model trained on the other folds.

    Users without judgments are ranked by a model trained on every judged user.
    LinearCatRev follows the same protocol with its own interpolation weight.
    """
    columns = cfg.columns
    if not columns:
        raise ConfigError("no score columns left to fuse")
    kind = "linearcatrev" if cfg.model == "LinearCatRev" else cfg.ranker
    groups = make_groups(vectors, columns, judgments)
    judged = [u for u in groups if any(judgments.get(u, v) is not None for v in groups[u].venue_ids)]
    ranked: dict[str, list[tuple[str, float]]] = {}
    models = []
    if len(judged) >= 2:
        folds = kfold_split(judged, min(cfg.folds, len(judged)), cfg.seed)
        for fold in folds:
            held = set(fold)
            model = fit_ranker([groups[u] for u in judged if u not in held], cfg, judgments, kind)
            models.append(model)
            for u in fold:
                ranked[u] = rank_candidates(model, groups[u])
    rest = [u for u in groups if u not in ranked]
    if rest:
        if not judged:
            raise ConfigError("no relevance judgments to train the ranker")
        model = fit_ranker([groups[u] for u in judged], cfg, judgments, kind)
        models.append(model)
        for u in rest:
            ranked[u] = rank_candidates(model, groups[u])
    if cfg.context_mode == "rerank":
        for u, lst in ranked.items():
            s_cxt = {v.venue_id: v.scores.get("s_cxt", 0.0) for v in vectors[u]}
            ranked[u] = rerank_with_context(lst, s_cxt, cfg.lam)
    return dict(sorted(ranked.items())), models


# -- full runs ----------------------------------------------------------------


@dataclass
class RunResult:
    ranked: dict[str, list[tuple[str, float]]]
    per_user: dict[str, dict[str, float]]
    metrics: dict[str, float]
    run_text: str
    models: list[RankingModel] = field(default_factory=list)


def evaluate_ranked(ranked, judgments: Judgments, k: int = 5):
    lists = {u: [v for v, _ in lst] for u, lst in ranked.items() if judgments.user_labels(u)}
    per_user = per_user_metrics(lists, judgments, k) if lists else {}
    return per_user, summarize(per_user)


def fuse_and_evaluate(scored: ScoredData, cfg: PipelineConfig, judgments: Judgments) -> RunResult:
    ranked, models = cross_validated_ranking(scored.vectors, cfg, judgments)
    per_user, metrics = evaluate_ranked(ranked, judgments, cfg.k)
    return RunResult(ranked, per_user, metrics, format_run(ranked, cfg.run_tag), models)


def write_artifacts(out_dir, scored: ScoredData, result: RunResult, cfg: PipelineConfig) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "profiles": out / "profiles.jsonl",
        "alignment": out / "alignment.jsonl",
        "boosted": out / "boosted.jsonl",
        "scores": out / "scores.jsonl",
        "rankers": out / "rankers.jsonl",
        "run": out / "run.txt",
        "metrics": out / "metrics.json",
    }
    states = scored.states
    write_jsonl(paths["profiles"], ({"user_id": u, **s.profiles.to_dict()} for u, s in sorted(states.items())))
    write_jsonl(paths["alignment"], (s.alignment.to_dict() for _, s in sorted(states.items()) if s.alignment is not None))
    boosted = [p for _, s in sorted(states.items()) for p in (s.boosted, s.pca) if p is not None]
    write_jsonl(paths["boosted"], (p.to_dict() for p in boosted))
    write_jsonl(paths["scores"], (v.to_dict() for _, vs in sorted(scored.vectors.items()) for v in vs))
    write_jsonl(paths["rankers"], (m.to_dict() for m in result.models))
    paths["run"].write_text(result.run_text, encoding="utf8")
    report = {"config": _config_dict(cfg), "columns": list(cfg.columns), "metrics": result.metrics, "per_user": result.per_user}
    paths["metrics"].write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf8")
    return paths


def _config_dict(cfg: PipelineConfig) -> dict:
    return {f.name: (list(v) if isinstance(v := getattr(cfg, f.name), tuple) else v) for f in fields(cfg)}


def run_pipeline(cfg: PipelineConfig, dataset: Dataset | None = None) -> RunResult:
    """Execute every stage; writes artifacts when ``cfg.out_dir`` is set."""
    dataset = dataset or load_dataset(cfg)
    scored = score_dataset(dataset, cfg, needed_scores(cfg.columns, cfg.context_mode))
    if not scored.vectors or not any(scored.vectors.values()):
        result = RunResult({}, {}, {}, "")
    else:
        result = fuse_and_evaluate(scored, cfg, dataset.judgments)
    if cfg.out_dir:
        write_artifacts(cfg.out_dir, scored, result, cfg)
    return result


# -- ablations ------------------------------------------------------------------


def score_ablation_variants(cfg: PipelineConfig) -> dict[str, PipelineConfig]:
    """The full model, the model minus each one of its scores, and the baselines."""
    out = {cfg.model: cfg}
    for col in MODEL_ROWS[cfg.model]:
        out[f"-{col}"] = replace(cfg, ablate=tuple(cfg.ablate) + (col,))
    out["-keywords"] = replace(cfg, use_keywords=False)
    out["-reviews"] = replace(cfg, use_reviews=False)
    for row in ("LinearCatRev", "PK-PCA"):
        if row != cfg.model:
            out[row] = replace(cfg, model=row)
    return out


def run_variants(dataset: Dataset, variants: Mapping[str, PipelineConfig]) -> dict[str, RunResult]:
    """Score once with every needed column, then refit fusion per variant."""
    first = next(iter(variants.values()))
    wanted = set()
    for v in variants.values():
        wanted |= set(needed_scores(MODEL_ROWS[v.model], v.context_mode))
    scored = score_dataset(dataset, first, tuple(f for f in SCORE_FIELDS if f in wanted))
    return {name: fuse_and_evaluate(scored, v, dataset.judgments) for name, v in variants.items()}


def history_sweep(dataset: Dataset, cfg: PipelineConfig, limits: Sequence[int]) -> dict[int, RunResult]:
    """One run per history length (check-ins kept after ordering)."""
    return {n: run_pipeline(replace(cfg, history_limit=n, out_dir=None), dataset) for n in limits}
