"""Bi-objective Pareto efficiency and the weightings derived from the front."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from mohpi.errors import ShapeMismatchError


@dataclass(frozen=True)
class WeightVector:
    w1: float
    w2: float
    source_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "source_index": self.source_index}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightVector":
        return cls(float(d["w1"]), float(d["w2"]), d.get("source_index"))

    def inverted(self) -> "WeightVector":
        return WeightVector(self.w2, self.w1, self.source_index)


def pareto_mask(points) -> np.ndarray:
    """Boolean mask of non-dominated rows under minimization.

    A row is dropped only if another row is <= in both coordinates and < in at
    least one; identical rows therefore all survive. O(n log n).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeMismatchError(f"expected an (n, 2) matrix, got shape {pts.shape}")
    n = pts.shape[0]
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    a, b = pts[order, 0], pts[order, 1]
    best_b = np.inf  # smallest second coordinate among rows with a strictly smaller first one
    start = 0
    while start < n:
        stop = start
        while stop < n and a[stop] == a[start]:
            stop += 1
        group_min = b[start]  # groups are sorted by b
        if group_min < best_b:
            k = start
            while k < stop and b[k] == group_min:
                mask[order[k]] = True
                k += 1
        best_b = min(best_b, group_min)
        start = stop
    return mask


def derive_weights(normalized_points, indices: Optional[Sequence[int]] = None) -> List[WeightVector]:
    """Turn normalized Pareto-efficient objective pairs into weightings.

    Each pair is rescaled to sum to one; (0, 0) maps to (0.5, 0.5). The result
    is deduplicated (12 decimals) and sorted ascending by ``w1``.
    """
    pts = np.asarray(normalized_points, dtype=float).reshape(-1, 2)
    if indices is None:
        indices = range(len(pts))
    seen = {}
    for idx, (o1, o2) in zip(indices, pts):
        total = o1 + o2
        if total == 0:
            w = WeightVector(0.5, 0.5, int(idx))
        else:
            w = WeightVector(float(o1 / total), float(o2 / total), int(idx))
        key = round(w.w1, 12)
        if key not in seen:
            seen[key] = w
    return [seen[k] for k in sorted(seen)]


def grid_weights(k: int) -> List[WeightVector]:
    """``k`` evenly spaced weightings on w1 in [0, 1] (endpoints included)."""
    if k <= 0:
        return []
    if k == 1:
        return [WeightVector(0.5, 0.5)]
    out = []
    for i in range(k):
        w1 = i / (k - 1)
        out.append(WeightVector(w1, 1.0 - w1))
    return out


def merge_weights(*groups: Sequence[WeightVector]) -> List[WeightVector]:
    """Union of weight lists, deduplicated on rounded ``w1`` (first wins), sorted."""
    seen = {}
    for group in groups:
        for w in group:
            seen.setdefault(round(w.w1, 12), w)
    return [seen[k] for k in sorted(seen)]


def front_weights(normalized, invert: bool = False, grid: int = 0) -> List[WeightVector]:
    """Pareto-derived weightings for an (n, 2) matrix of normalized objectives,
    optionally swapped and supplemented by a uniform grid."""
    normalized = np.asarray(normalized, dtype=float)
    mask = pareto_mask(normalized)
    idx = np.flatnonzero(mask)
    weights = derive_weights(normalized[idx], idx)
    if invert:
        weights = merge_weights([w.inverted() for w in weights])
    return merge_weights(weights, grid_weights(grid))
