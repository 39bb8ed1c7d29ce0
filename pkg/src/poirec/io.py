"""Line-oriented dataset formats: JSONL stores, qrels, TREC run files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .domain import (
    CheckIn,
    ContextSpec,
    DomainError,
    RatingScale,
    Review,
    UserRecord,
    VenueRecord,
)
from .evaluation import Judgments

log = logging.getLogger(__name__)


class DataError(DomainError):
    """Malformed input file; the message names file and line."""


def _read_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def read_jsonl_rows(path) -> Iterator[dict]:
    """JSON objects of a JSONL file; blank lines skipped, bad lines raise DataError."""
    for _, obj in _read_jsonl(path):
        yield obj


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def parse_context(obj: Mapping | None) -> ContextSpec | None:
    if not obj:
        return None
    return ContextSpec(obj["duration"], obj["group"], obj.get("type", obj.get("trip_type")))


def venue_from_dict(obj: Mapping) -> VenueRecord:
    return VenueRecord(
        id=str(obj["id"]),
        city=obj.get("city", ""),
        name=obj.get("name", ""),
        categories=tuple(obj.get("categories", ())),
        keywords=tuple(obj.get("keywords", ())),
        reviews=tuple(Review(int(r["rating"]), r.get("text", "")) for r in obj.get("reviews", ())),
    )


def venue_to_dict(v: VenueRecord) -> dict:
    return {
        "id": v.id,
        "city": v.city,
        "name": v.name,
        "categories": list(v.categories),
        "keywords": list(v.keywords),
        "reviews": [{"rating": r.rating, "text": r.text} for r in v.reviews],
    }


def user_from_dict(obj: Mapping) -> UserRecord:
    history = tuple(
        CheckIn(str(h["venue_id"]), int(h["rating"]), tuple(h.get("tags", ()))) for h in obj.get("history", ())
    )
    return UserRecord(str(obj["id"]), history, parse_context(obj.get("context")))


def user_to_dict(u: UserRecord) -> dict:
    out = {
        "id": u.id,
        "history": [{"venue_id": c.venue_id, "rating": c.rating, "tags": list(c.tags)} for c in u.history],
    }
    if u.context is not None:
        out["context"] = {"duration": u.context.duration, "group": u.context.group, "type": u.context.trip_type}
    return out


def _load_keyed(path, parse, kind):
    out = {}
    for lineno, obj in _read_jsonl(path):
        try:
            rec = parse(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad {kind} record ({exc})") from None
        if rec.id in out:
            raise DataError(f"{path}:{lineno}: duplicate {kind} id {rec.id!r}")
        out[rec.id] = rec
    return out


def read_venues(path) -> dict[str, VenueRecord]:
    return _load_keyed(path, venue_from_dict, "venue")


def read_users(path) -> dict[str, UserRecord]:
    return _load_keyed(path, user_from_dict, "user")


def read_candidates(path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lineno, obj in _read_jsonl(path):
        try:
            out.setdefault(str(obj["user_id"]), []).extend(str(v) for v in obj["venue_ids"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad candidate record ({exc})") from None
    return out


def write_candidates(path, candidates: Mapping[str, Sequence[str]]) -> None:
    write_jsonl(path, ({"user_id": u, "venue_ids": list(vs)} for u, vs in sorted(candidates.items())))


def read_qrels(path, scale: str | None = None) -> Judgments:
    """Parse ``user_id 0 venue_id relevance`` lines.

    The scale is inferred when not given: any negative label or a label above
    1 means graded.
    """
    labels: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                labels[(parts[0], parts[2])] = int(parts[3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: relevance {parts[3]!r} is not an integer") from None
    if scale is None:
        scale = "graded" if any(r < 0 or r > 1 for r in labels.values()) else "binary"
    try:
        return Judgments(labels, scale)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_qrels(path, judgments: Judgments) -> None:
    with open(path, "w", encoding="utf8") as fh:
        for (u, v), r in sorted(judgments.labels.items()):
            fh.write(f"{u} 0 {v} {r}\n")


def format_run(ranked: Mapping[str, Sequence[tuple[str, float]]], run_tag: str = "poirec") -> str:
    lines = []
    for user_id in sorted(ranked):
        for rank, (venue_id, score) in enumerate(ranked[user_id], start=1):
            lines.append(f"{user_id} Q0 {venue_id} {rank} {score:.10f} {run_tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_run(path, ranked: Mapping[str, Sequence[tuple[str, float]]], run_tag: str = "poirec") -> None:
    Path(path).write_text(format_run(ranked, run_tag), encoding="utf8")


def read_run(path) -> dict[str, list[tuple[str, float]]]:
    """Parse a TREC run file, ordering each user's venues by the rank column."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows.setdefault(parts[0], []).append((int(parts[3]), parts[2], float(parts[4])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad rank or score") from None
    return {u: [(v, s) for _, v, s in sorted(r)] for u, r in rows.items()}


def infer_rating_scale(users: Mapping[str, UserRecord]) -> RatingScale:
    ratings = [c.rating for u in users.values() for c in u.history]
    return RatingScale.GRADED if any(r <= 0 for r in ratings) else RatingScale.FIVE


@dataclass
class Dataset:
    venues: dict[str, VenueRecord]
    users: dict[str, UserRecord]
    candidates: dict[str, list[str]] = field(default_factory=dict)
    judgments: Judgments = field(default_factory=Judgments)
    table: object = None  # ContextFeatureTable
    appropriateness: list = field(default_factory=list)
    scale: RatingScale = RatingScale.FIVE
    warnings: list[str] = field(default_factory=list)

    def report(self) -> dict:
        n_kw = [len(v.keywords) for v in self.venues.values()]
        n_cat = [len(v.categories) for v in self.venues.values()]
        n_rev = [len(v.reviews) for v in self.venues.values()]
        tags_per_user = [len({t for c in u.history for t in c.tags}) for u in self.users.values()]
        mean = lambda xs: round(sum(xs) / len(xs), 4) if xs else 0.0
        return {
            "venues": len(self.venues),
            "users": len(self.users),
            "candidate_lists": len(self.candidates),
            "candidates": sum(len(v) for v in self.candidates.values()),
            "judgments": len(self.judgments.labels),
            "judgment_scale": self.judgments.scale,
            "rating_scale": self.scale.value,
            "context_features": len(self.table) if self.table is not None else 0,
            "appropriateness_examples": len(self.appropriateness),
            "avg_reviews_per_venue": mean(n_rev),
            "avg_categories_per_venue": mean(n_cat),
            "avg_keywords_per_venue": mean(n_kw),
            "avg_tags_per_user": mean(tags_per_user),
            "distinct_tags": len({t for u in self.users.values() for c in u.history for t in c.tags}),
            "warnings": list(self.warnings),
        }


def ingest(
    venues_path,
    users_path,
    candidates_path=None,
    qrels_path=None,
    features_path=None,
    appropriateness_path=None,
    scale: str | None = None,
) -> Dataset:
    """Load and cross-check a dataset. Dangling references become warnings and are dropped."""
    from .context import AppropriatenessExample, load_feature_table

    venues = read_venues(venues_path)
    users = read_users(users_path)
    warnings: list[str] = []
    for uid, user in list(users.items()):
        dangling = [c.venue_id for c in user.history if c.venue_id not in venues]
        if dangling:
            warnings.append(f"user {uid}: {len(dangling)} history venue(s) not in venue store: {dangling[:5]}")
            users[uid] = UserRecord(uid, tuple(c for c in user.history if c.venue_id in venues), user.context)

    candidates: dict[str, list[str]] = {}
    if candidates_path is not None:
        for uid, vids in read_candidates(candidates_path).items():
            if uid not in users:
                warnings.append(f"candidates for unknown user {uid}")
                continue
            missing = [v for v in vids if v not in venues]
            if missing:
                warnings.append(f"user {uid}: {len(missing)} candidate venue(s) unknown: {missing[:5]}")
            candidates[uid] = [v for v in vids if v in venues]
        if not any(candidates.values()):
            warnings.append("candidate file holds no candidates; nothing will be ranked")

    judgments = read_qrels(qrels_path) if qrels_path is not None else Judgments()
    table = load_feature_table(features_path) if features_path is not None else None
    examples = []
    if appropriateness_path is not None:
        for lineno, obj in _read_jsonl(appropriateness_path):
            try:
                examples.append(AppropriatenessExample.from_dict(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{appropriateness_path}:{lineno}: bad example ({exc})") from None

    rating_scale = RatingScale(scale) if scale else infer_rating_scale(users)
    for w in warnings:
        log.warning(w)
    return Dataset(venues, users, candidates, judgments, table, examples, rating_scale, warnings)
