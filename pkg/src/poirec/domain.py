"""Core entities, rating polarity, and per-user frequency profiles."""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

DURATIONS = ("day-trip", "night-trip", "weekend-trip", "longer-trip")
GROUPS = ("alone", "with-friends", "with-family", "with-others")
TRIP_TYPES = ("business-trip", "holiday-trip", "other-trip")
CONTEXT_VALUES = DURATIONS + GROUPS + TRIP_TYPES

_WS = re.compile(r"\s+")


class DomainError(ValueError):
    """Input violates a domain invariant."""


def normalize_label(text: str) -> str:
    """Lowercase, trim, and join internal whitespace with hyphens.

    >>> normalize_label("  Good for   Groups ")
    'good-for-groups'
    """
    return _WS.sub("-", text.strip().lower())


def normalize_labels(items: Iterable[str]) -> tuple[str, ...]:
    """Normalize and deduplicate, keeping first-seen order."""
    seen: dict[str, None] = {}
    for item in items:
        norm = normalize_label(item)
        if norm:
            seen.setdefault(norm, None)
    return tuple(seen)


class RatingScale(str, enum.Enum):
    FIVE = "1-5"
    GRADED = "graded"


class Polarity(str, enum.Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"


def rating_polarity(rating: int, scale: RatingScale | str = RatingScale.FIVE) -> Polarity:
    """Map a rating onto positive / neutral / negative.

    On the 1..5 scale {4, 5} are positive, 3 neutral, {1, 2} negative. On the
    graded -2..+2 scale the sign decides and 0 is neutral.
    """
    scale = RatingScale(scale)
    if scale is RatingScale.FIVE:
        if rating not in (1, 2, 3, 4, 5):
            raise DomainError(f"rating {rating!r} outside 1..5")
        if rating >= 4:
            return Polarity.POSITIVE
        return Polarity.NEUTRAL if rating == 3 else Polarity.NEGATIVE
    if rating not in (-2, -1, 0, 1, 2):
        raise DomainError(f"rating {rating!r} outside -2..+2")
    if rating > 0:
        return Polarity.POSITIVE
    return Polarity.NEUTRAL if rating == 0 else Polarity.NEGATIVE


@dataclass(frozen=True)
class Review:
    rating: int
    text: str

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise DomainError(f"review rating {self.rating!r} outside 1..5")


@dataclass(frozen=True)
class VenueRecord:
    id: str
    city: str = ""
    categories: tuple[str, ...] = ()
    keywords: tuple[str, ...] = ()
    reviews: tuple[Review, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.id:
            raise DomainError("venue id must be nonempty")
        object.__setattr__(self, "categories", normalize_labels(self.categories))
        object.__setattr__(self, "keywords", normalize_labels(self.keywords))
        object.__setattr__(self, "reviews", tuple(self.reviews))


@dataclass(frozen=True)
class ContextSpec:
    duration: str
    group: str
    trip_type: str

    def __post_init__(self):
        for value, vocab, name in (
            (self.duration, DURATIONS, "duration"),
            (self.group, GROUPS, "group"),
            (self.trip_type, TRIP_TYPES, "trip_type"),
        ):
            if value not in vocab:
                raise DomainError(f"unknown {name} {value!r}; expected one of {vocab}")

    def values(self) -> tuple[str, str, str]:
        # Order used for feature construction: type, group, duration.
        return (self.trip_type, self.group, self.duration)


@dataclass(frozen=True)
class CheckIn:
    venue_id: str
    rating: int
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tags", normalize_labels(self.tags))


@dataclass(frozen=True)
class UserRecord:
    id: str
    history: tuple[CheckIn, ...] = ()
    context: ContextSpec | None = None

    def __post_init__(self):
        if not self.id:
            raise DomainError("user id must be nonempty")
        object.__setattr__(self, "history", tuple(self.history))

    def tagged(self) -> list[CheckIn]:
        return [c for c in self.history if c.tags]


@dataclass
class UserProfiles:
    """Positive/negative user-level normalized frequencies per item family."""

    pos_cat: dict[str, float] = field(default_factory=dict)
    neg_cat: dict[str, float] = field(default_factory=dict)
    pos_key: dict[str, float] = field(default_factory=dict)
    neg_key: dict[str, float] = field(default_factory=dict)
    pos_tag: dict[str, float] = field(default_factory=dict)
    neg_tag: dict[str, float] = field(default_factory=dict)
    pos_boost: dict[str, float] = field(default_factory=dict)
    neg_boost: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {name: dict(sorted(getattr(self, name).items())) for name in PROFILE_FIELDS}

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, float]]) -> "UserProfiles":
        return cls(**{name: dict(data.get(name, {})) for name in PROFILE_FIELDS})


PROFILE_FIELDS = (
    "pos_cat", "neg_cat", "pos_key", "neg_key",
    "pos_tag", "neg_tag", "pos_boost", "neg_boost",
)


def frequency_profile(
    bags: Iterable[tuple[Polarity, Iterable[str]]],
    restrict_to: set[str] | None = None,
) -> tuple[dict[str, float], dict[str, float]]:
    """User-level normalized frequencies over a history of item bags.

    Each bag is the item list of one visited venue with that visit's polarity.
    Numerators count item occurrences in positive (resp. negative) bags; the
    denominator counts every item occurrence in the history, neutral included.
    """
    pos: Counter[str] = Counter()
    neg: Counter[str] = Counter()
    total = 0
    for polarity, items in bags:
        for item in items:
            if restrict_to is not None and item not in restrict_to:
                continue
            total += 1
            if polarity is Polarity.POSITIVE:
                pos[item] += 1
            elif polarity is Polarity.NEGATIVE:
                neg[item] += 1
    if total == 0:
        return {}, {}
    return (
        {k: v / total for k, v in sorted(pos.items())},
        {k: v / total for k, v in sorted(neg.items())},
    )


def build_profiles(
    user: UserRecord,
    venues: Mapping[str, VenueRecord],
    scale: RatingScale | str = RatingScale.FIVE,
) -> UserProfiles:
    """Category, keyword and tag profiles for one user.

    Boosted profiles are left empty; :func:`poirec.boosting.boost_keywords`
    fills them once an alignment model exists.
    """
    visits = []
    for checkin in user.history:
        venue = venues.get(checkin.venue_id)
        if venue is None:
            raise DomainError(f"user {user.id}: unknown venue {checkin.venue_id!r}")
        visits.append((rating_polarity(checkin.rating, scale), venue, checkin))

    pos_cat, neg_cat = frequency_profile((p, v.categories) for p, v, _ in visits)
    pos_key, neg_key = frequency_profile((p, v.keywords) for p, v, _ in visits)
    pos_tag, neg_tag = frequency_profile((p, c.tags) for p, _, c in visits)
    return UserProfiles(pos_cat, neg_cat, pos_key, neg_key, pos_tag, neg_tag)
