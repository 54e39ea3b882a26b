"""Random-forest regression surrogate with inspectable axis-aligned partitions.

Trees are grown CART-style (exhaustive midpoint thresholds, minimizing the
summed squared error of the two children). Each tree draws its bootstrap
sample and its per-node feature orderings from its own RNG stream seeded by
``(seed, tree_index)``, so a forest is identical no matter how many worker
threads built it.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from mohpi.errors import DegenerateTargetError, ShapeMismatchError, ValidationError

FORMAT = "mohpi-forest"
FORMAT_VERSION = 1
_SEED_MASK = (1 << 64) - 1


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & _SEED_MASK, *[int(k) & _SEED_MASK for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


def worker_count() -> int:
    """Thread cap from ``MOHPI_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("MOHPI_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: Optional[int] = None  # None: max(1, d // 3)
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")

    def resolved_mtry(self, d: int) -> int:
        mtry = max(1, d // 3) if self.mtry is None else self.mtry
        if not 1 <= mtry <= d:
            raise ValidationError(f"mtry must lie in [1, {d}], got {mtry}")
        return mtry

    def with_seed(self, seed: int) -> "ForestParams":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls(**d)


@njit(cache=True, nogil=True)
def _grow(X, y, sample, keys, mtry, min_leaf, max_depth):
    n = sample.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    order = sample.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)
    ys = np.empty(n)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    count = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]
        cnt = e - s

        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(s, e):
            yi = y[order[i]]
            total += yi
            if yi < ymin:
                ymin = yi
            if yi > ymax:
                ymax = yi
        mean = total / cnt
        value[node] = mean
        if cnt < 2 * min_leaf or ymin == ymax or (max_depth >= 0 and depth >= max_depth):
            continue

        perm = np.argsort(keys[node])
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for r in range(d):
            if r >= mtry and best_f >= 0:
                break
            f = perm[r]
            stotal = 0.0
            for i in range(cnt):
                vals[i] = X[order[s + i], f]
                ys[i] = y[order[s + i]] - mean
                stotal += ys[i]
            o = np.argsort(vals[:cnt], kind="mergesort")
            if vals[o[0]] == vals[o[cnt - 1]]:
                continue
            sl = 0.0
            for i in range(cnt - 1):
                sl += ys[o[i]]
                nl = i + 1
                if nl < min_leaf:
                    continue
                nr = cnt - nl
                if nr < min_leaf:
                    break
                a = vals[o[i]]
                b = vals[o[i + 1]]
                if a == b:
                    continue
                sr = stotal - sl
                score = sl * sl / nl + sr * sr / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = a + 0.5 * (b - a)
                    if thr >= b:
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        for i in range(s, e):
            if X[order[i], best_f] <= best_thr:
                buf[nl] = order[i]
                nl += 1
        k = nl
        for i in range(s, e):
            if X[order[i], best_f] > best_thr:
                buf[k] = order[i]
                k += 1
        for i in range(cnt):
            order[s + i] = buf[i]

        lid = count
        rid = count + 1
        count += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        st_node[top] = rid
        st_start[top] = s + nl
        st_end[top] = e
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lid
        st_start[top] = s
        st_end[top] = s + nl
        st_depth[top] = depth + 1
        top += 1

    return feature[:count].copy(), threshold[:count].copy(), left[:count].copy(), right[:count].copy(), value[:count].copy()


@njit(cache=True, nogil=True)
def _predict_packed(roots, feature, threshold, left, right, value, X):
    n = X.shape[0]
    n_trees = roots.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc / n_trees
    return out


@njit(cache=True, nogil=True)
def _boxes(feature, threshold, left, right, domain):
    n_nodes = feature.shape[0]
    d = domain.shape[0]
    lo = np.empty((n_nodes, d))
    hi = np.empty((n_nodes, d))
    lo[0, :] = domain[:, 0]
    hi[0, :] = domain[:, 1]
    # children are always allocated after their parent
    for node in range(n_nodes):
        f = feature[node]
        if f < 0:
            continue
        thr = threshold[node]
        li = left[node]
        ri = right[node]
        lo[li, :] = lo[node, :]
        hi[li, :] = hi[node, :]
        lo[ri, :] = lo[node, :]
        hi[ri, :] = hi[node, :]
        hi[li, f] = min(hi[node, f], thr)
        lo[ri, f] = max(lo[node, f], thr)
    return lo, hi


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flattened binary tree; ``feature[i] == -1`` marks a leaf.

    Internal nodes send ``x[feature] <= threshold`` left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    domain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    @property
    def d(self) -> int:
        return int(self.domain.shape[0])

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.d)
        roots = np.zeros(1, np.int64)
        return _predict_packed(roots, self.feature, self.threshold, self.left, self.right, self.value, X)

    def leaf_partition(self, domain=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return leaf_partition(self, domain)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, domain) -> "RegressionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
            np.asarray(domain, dtype=float),
        )

    @classmethod
    def from_nodes(cls, nodes: Sequence[tuple], domain) -> "RegressionTree":
        """Build a tree by hand. ``nodes[i]`` is ``(feature, threshold, left, right)``
        for an internal node or ``(value,)`` for a leaf; node 0 is the root and
        children must come after their parent."""
        n = len(nodes)
        feature = np.full(n, -1, np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, np.int64)
        right = np.full(n, -1, np.int64)
        value = np.zeros(n)
        for i, node in enumerate(nodes):
            if len(node) == 1:
                value[i] = node[0]
            else:
                f, thr, li, ri = node
                if not (li > i and ri > i):
                    raise ValidationError("children must be listed after their parent")
                feature[i], threshold[i], left[i], right[i] = f, thr, li, ri
        return cls(feature, threshold, left, right, value, np.asarray(domain, dtype=float))


def leaf_partition(tree: RegressionTree, domain=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leaf boxes of ``tree`` intersected with ``domain``.

    Returns ``(lo, hi, values)`` with ``lo``/``hi`` of shape (n_leaves, d).
    A point belongs to a box when ``lo < x <= hi`` (or ``x == lo`` on the
    domain's lower edge).
    """
    dom = tree.domain if domain is None else np.asarray(domain, dtype=float)
    lo, hi = _boxes(tree.feature, tree.threshold, tree.left, tree.right, dom)
    leaves = tree.feature < 0
    lo = np.maximum(lo[leaves], dom[:, 0])
    hi = np.minimum(hi[leaves], dom[:, 1])
    hi = np.maximum(hi, lo)
    return lo, hi, tree.value[leaves].copy()


def _as_matrix(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != d:
        raise ShapeMismatchError(f"expected vectors of length {d}, got shape {X.shape}")
    return np.ascontiguousarray(X)


@dataclass(eq=False)
class Forest:
    trees: List[RegressionTree]
    params: ForestParams
    domain: np.ndarray
    _packed: Optional[tuple] = field(default=None, init=False, repr=False)

    @property
    def d(self) -> int:
        return int(self.domain.shape[0])

    def _pack(self):
        if self._packed is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]]).astype(np.int64)
            shift = lambda arr, off: np.where(arr >= 0, arr + off, -1)
            self._packed = (
                offsets,
                np.concatenate([t.feature for t in self.trees]),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]),
                np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]),
                np.concatenate([t.value for t in self.trees]),
            )
        return self._packed

    def predict(self, X):
        """Mean tree prediction. A single vector returns a float."""
        single = np.asarray(X).ndim == 1
        out = _predict_packed(*self._pack(), _as_matrix(X, self.d))
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "params": self.params.to_dict(),
            "domain": self.domain.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValidationError("not a version-1 mohpi forest document")
        domain = np.asarray(d["domain"], dtype=float)
        trees = [RegressionTree.from_dict(t, domain) for t in d["trees"]]
        return cls(trees, ForestParams.from_dict(d["params"]), domain)


def default_domain(X: np.ndarray) -> np.ndarray:
    """Unit cube, widened to cover any coordinate outside it (e.g. the -1 sentinel)."""
    dom = np.zeros((X.shape[1], 2))
    dom[:, 1] = 1.0
    if X.size:
        dom[:, 0] = np.minimum(0.0, X.min(axis=0))
        dom[:, 1] = np.maximum(1.0, X.max(axis=0))
    return dom


def fit_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, tree_index: int, domain: np.ndarray) -> RegressionTree:
    n, d = X.shape
    rng = np.random.default_rng(np.random.SeedSequence([int(params.seed) & _SEED_MASK, int(tree_index)]))
    if params.bootstrap:
        sample = rng.integers(0, n, size=n, dtype=np.int64)
    else:
        sample = np.arange(n, dtype=np.int64)
    keys = rng.random((2 * n + 1, d))
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    arrays = _grow(X, y, sample, keys, params.resolved_mtry(d), int(params.min_samples_leaf), max_depth)
    return RegressionTree(*arrays, domain=domain)


def fit(X, y, params: ForestParams = ForestParams(), domain=None, n_threads: Optional[int] = None) -> Forest:
    """Fit a forest on encoded configurations ``X`` and targets ``y``."""
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    if X.ndim != 2:
        raise ShapeMismatchError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeMismatchError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] < 2:
        raise DegenerateTargetError("at least 2 samples are needed to fit a forest")
    if not np.all(np.isfinite(y)):
        raise ValidationError("targets must be finite")
    params.resolved_mtry(X.shape[1])
    dom = default_domain(X) if domain is None else np.asarray(domain, dtype=float)
    if dom.shape != (X.shape[1], 2):
        raise ShapeMismatchError(f"domain must have shape ({X.shape[1]}, 2), got {dom.shape}")

    workers = min(n_threads or worker_count(), params.n_trees)
    build = lambda t: fit_tree(X, y, params, t, dom)
    if workers <= 1:
        trees = [build(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(build, range(params.n_trees)))
    return Forest(trees, params, dom)


def predict(forest: Forest, x):
    return forest.predict(x)
