"""Contextual appropriateness of venues under a trip context."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import CONTEXT_VALUES, ContextSpec, DomainError, VenueRecord, normalize_label
from .linear import LinearModel, train_hinge

N_FEATURES = 9


class FeatureTableError(DomainError):
    pass


@dataclass
class ContextFeatureTable:
    """F_app(category, context value) in [-1, +1]."""

    values: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for (cat, cxt), v in self.values.items():
            if cxt not in CONTEXT_VALUES:
                raise FeatureTableError(f"unknown context value {cxt!r}")
            if not -1.0 <= v <= 1.0:
                raise FeatureTableError(f"F_app({cat}, {cxt}) = {v} outside [-1, 1]")

    def get(self, category: str, context_value: str) -> float:
        return self.values.get((category, context_value), 0.0)

    def __len__(self):
        return len(self.values)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["category", "context", "value"])
            for (cat, cxt), v in sorted(self.values.items()):
                w.writerow([cat, cxt, repr(float(v))])


def load_feature_table(path: str | Path) -> ContextFeatureTable:
    """Read a ``category,context,value`` CSV; errors carry the offending line number."""
    values: dict[tuple[str, str], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["category", "context", "value"]:
            raise FeatureTableError(f"{path}:1: expected header category,context,value")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise FeatureTableError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            cat, cxt = normalize_label(row[0]), normalize_label(row[1])
            if cxt not in CONTEXT_VALUES:
                raise FeatureTableError(f"{path}:{lineno}: unknown context value {row[1]!r}")
            try:
                value = float(row[2])
            except ValueError:
                raise FeatureTableError(f"{path}:{lineno}: value {row[2]!r} is not a number") from None
            if not -1.0 <= value <= 1.0:
                raise FeatureTableError(f"{path}:{lineno}: value {value} outside [-1, 1]")
            values[(cat, cxt)] = value
    return ContextFeatureTable(values)


def context_feature_vector(table: ContextFeatureTable, categories: Sequence[str], ctx: ContextSpec) -> np.ndarray:
    """(mean, min, max) of F_app over the venue's categories, per active context value.

    Context values are taken in the order trip type, group, duration. Missing
    table entries count as 0; a venue without categories gives zeros.
    """
    out = np.zeros(N_FEATURES)
    if not categories:
        return out
    for d, value in enumerate(ctx.values()):
        vals = np.array([table.get(c, value) for c in categories])
        out[3 * d: 3 * d + 3] = (vals.mean(), vals.min(), vals.max())
    return out


@dataclass(frozen=True)
class AppropriatenessExample:
    categories: tuple[str, ...]
    context: ContextSpec
    label: bool

    def to_dict(self) -> dict:
        return {
            "categories": list(self.categories),
            "context": {"duration": self.context.duration, "group": self.context.group, "type": self.context.trip_type},
            "label": "appropriate" if self.label else "inappropriate",
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AppropriatenessExample":
        from .io import parse_context  # local import: io depends on this module

        label = data["label"]
        if isinstance(label, str):
            if label not in ("appropriate", "inappropriate"):
                raise DomainError(f"bad appropriateness label {label!r}")
            label = label == "appropriate"
        return cls(tuple(normalize_label(c) for c in data["categories"]), parse_context(data["context"]), bool(label))


def example_matrix(table: ContextFeatureTable, examples: Iterable[AppropriatenessExample]):
    examples = list(examples)
    X = np.array([context_feature_vector(table, e.categories, e.context) for e in examples]).reshape(-1, N_FEATURES)
    y = np.array([1.0 if e.label else -1.0 for e in examples])
    return X, y


def train_appropriateness(
    examples: Sequence[AppropriatenessExample],
    table: ContextFeatureTable,
    reg: float = 1e-3,
    epochs: int = 50,
    seed: int = 0,
) -> LinearModel:
    """Linear hinge classifier over the 9 context features."""
    if not examples:
        raise DomainError("no appropriateness examples")
    X, y = example_matrix(table, examples)
    return train_hinge(X, y, reg=reg, epochs=epochs, seed=seed)


def context_score(
    model: LinearModel | None,
    table: ContextFeatureTable,
    venue: VenueRecord,
    ctx: ContextSpec | None,
) -> float | None:
    """Decision value of the appropriateness classifier; None without model or context."""
    if model is None or ctx is None or not model.available:
        return None
    return float(model.decision(context_feature_vector(table, venue.categories, ctx))[0])
