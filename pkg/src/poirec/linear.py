"""Linear hinge-loss classifiers trained with Pegasos-style stochastic subgradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class LinearModel:
    """w . x + b. ``status`` is "ok", "degenerate" (one class), or "unavailable"."""

    weights: np.ndarray
    bias: float = 0.0
    status: str = "ok"

    @property
    def available(self) -> bool:
        return self.status != "unavailable"

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision(X) >= 0.0, 1, -1)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "status": self.status}

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        return cls(np.asarray(data["weights"], dtype=float), float(data["bias"]), data.get("status", "ok"))


def train_hinge(
    X,
    y,
    reg: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
    backend: str | None = None,
) -> LinearModel:
    """Regularized hinge loss, one stochastic subgradient step per example.

    ``y`` holds +1/-1 labels. The bias is learned as the weight of a constant
    feature. Single-class input yields a constant model flagged "degenerate".
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("need a nonempty 2-D feature matrix with one label per row")
    if reg <= 0:
        raise ValueError("regularization must be positive")
    labels = set(np.unique(y))
    if not labels <= {-1.0, 1.0}:
        raise ValueError("labels must be +1 / -1")
    if len(labels) == 1:
        return LinearModel(np.zeros(X.shape[1]), float(y[0]), status="degenerate")

    Xa = np.ascontiguousarray(np.hstack([X, np.ones((len(X), 1))]))
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(len(y)) for _ in range(epochs)]).astype(np.int64)
    w = np.zeros(Xa.shape[1])
    kernels.pegasos(Xa, np.ascontiguousarray(y), order, float(reg), w, backend=backend)
    return LinearModel(w[:-1].copy(), float(w[-1]))
