"""Parameter sensitivity scoring and top-fraction selection.

Two scoring rules over a flat parameter vector:

    magnitude_map   absolute value of the given vector (weights or an
                    aggregated update)
    jacobian_map    mean squared loss gradient per parameter across a
                    set of batches (empirical Fisher diagonal)

select_top_r keeps the highest-scoring round(r * n) entries (half up),
breaking score ties in favor of the lower index.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .model.nets import ModelState, forward_backward


@dataclass(frozen=True)
class SelectionMask:
    """Sorted index set of the selected (encrypted) coordinates."""

    indices: np.ndarray        # int64, strictly increasing
    total: int
    ratio: float

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def complement(self) -> np.ndarray:
        keep = np.ones(self.total, dtype=bool)
        keep[self.indices] = False
        return np.nonzero(keep)[0]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.total).tobytes())
        h.update(self.indices.astype("<i8").tobytes())
        return h.hexdigest()[:16]


def magnitude_map(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise UsageError("sensitivity scores need a flat vector")
    if not np.isfinite(values).all():
        raise UsageError("non-finite entries in the score input")
    return np.abs(values)


def jacobian_map(model: ModelState, batches: list[tuple[np.ndarray, np.ndarray]]
                 ) -> np.ndarray:
    if not batches:
        raise UsageError("jacobian scoring needs at least one batch")
    total = np.zeros_like(model.flat)
    for xb, yb in batches:
        _, grad = forward_backward(model, xb, yb)
        total += grad * grad
    return total / len(batches)


def select_top_r(scores: np.ndarray, ratio: float) -> SelectionMask:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise UsageError("scores must be a non-empty flat vector")
    if not np.isfinite(scores).all():
        raise UsageError("non-finite sensitivity scores")
    if not 0.0 <= ratio <= 1.0:
        raise UsageError(f"selection ratio {ratio} outside [0, 1]")
    n = scores.size
    k = int(math.floor(ratio * n + 0.5))  # round half up
    # stable sort on negated scores: descending by score, ties by index
    order = np.argsort(-scores, kind="stable")[:k]
    return SelectionMask(np.sort(order).astype(np.int64), n, float(ratio))
