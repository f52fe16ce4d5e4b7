"""Finite sample containers shared by the critic, estimator and mechanisms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Weighted point cloud; weights default to uniform 1/n."""

    samples: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("samples must be a 2-D array of shape (n, d)")
        if x.shape[0] == 0:
            raise ValueError("empirical distribution needs at least one sample")
        if self.weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (x.shape[0],):
                raise ValueError("weights must have one entry per sample")
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.n

    def mean(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


@dataclass(frozen=True)
class PairedSamples:
    """n pairs (x_i, y_i); row i of ``x`` is paired with row i of ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        y = y[:, None] if y.ndim == 1 else y
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("x and y must be arrays of shape (n, d)")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"unequal pair counts: {x.shape[0]} x-points vs {y.shape[0]} y-points")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dx(self) -> int:
        return self.x.shape[1]

    @property
    def dy(self) -> int:
        return self.y.shape[1]

    def __len__(self) -> int:
        return self.n

    def stacked(self) -> np.ndarray:
        return np.hstack([self.x, self.y])
