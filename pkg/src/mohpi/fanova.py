"""Functional ANOVA on random-forest partitions and the multi-objective sweep.

Every tree is a piecewise-constant function on a box partition of the encoded
domain. Under the independent uniform measure on that domain, marginals and
variance components are exact finite sums over the leaves; nothing here is
sampled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from mohpi.dataset import MetaDataset
from mohpi.errors import ShapeMismatchError, ValidationError
from mohpi.forest import Forest, ForestParams, RegressionTree, derive_seed, fit, leaf_partition
from mohpi.pareto import WeightVector


def scalarize(o1n, o2n, w: WeightVector) -> np.ndarray:
    """Weighted sum ``w1 * o1n + w2 * o2n`` of the normalized objectives."""
    o1n = np.asarray(o1n, dtype=float)
    o2n = np.asarray(o2n, dtype=float)
    if o1n.shape != o2n.shape:
        raise ShapeMismatchError(f"objective vectors differ in shape: {o1n.shape} vs {o2n.shape}")
    return w.w1 * o1n + w.w2 * o2n


@njit(cache=True, nogil=True)
def _marginal_1d(lo, hi, dom_lo, dom_hi, contrib):
    cuts = np.unique(np.concatenate((lo, hi, np.array([dom_lo, dom_hi]))))
    k = cuts.shape[0] - 1
    diff = np.zeros(k + 1)
    start = np.searchsorted(cuts, lo)
    stop = np.searchsorted(cuts, hi)
    for leaf in range(lo.shape[0]):
        diff[start[leaf]] += contrib[leaf]
        diff[stop[leaf]] -= contrib[leaf]
    a = np.cumsum(diff)[:k]
    p = (cuts[1:] - cuts[:-1]) / (dom_hi - dom_lo)
    return cuts, p, a


@njit(cache=True, nogil=True)
def _frac_without_one(frac):
    # product over all columns except j, for every j (prefix/suffix products)
    n, d = frac.shape
    out = np.ones((n, d))
    for leaf in range(n):
        acc = 1.0
        for j in range(d):
            out[leaf, j] = acc
            acc *= frac[leaf, j]
        acc = 1.0
        for j in range(d - 1, -1, -1):
            out[leaf, j] *= acc
            acc *= frac[leaf, j]
    return out


@njit(cache=True, nogil=True)
def _main_effects(lo, hi, values, domain, mean):
    width = domain[:, 1] - domain[:, 0]
    frac = (hi - lo) / width
    excl = _frac_without_one(frac)
    d = lo.shape[1]
    main = np.zeros(d)
    for j in range(d):
        contrib = values * excl[:, j]
        _, p, a = _marginal_1d(lo[:, j].copy(), hi[:, j].copy(), domain[j, 0], domain[j, 1], contrib)
        acc = 0.0
        for k in range(p.shape[0]):
            acc += p[k] * (a[k] - mean) ** 2
        main[j] = acc
    return main


class _Leaves:
    """Leaf boxes of one tree plus the per-dimension length fractions."""

    def __init__(self, tree: RegressionTree, domain=None):
        self.domain = tree.domain if domain is None else np.asarray(domain, dtype=float)
        self.lo, self.hi, self.values = leaf_partition(tree, self.domain)
        self.width = self.domain[:, 1] - self.domain[:, 0]
        self.frac = (self.hi - self.lo) / self.width
        self.mu = np.prod(self.frac, axis=1)
        self.mean = float(np.dot(self.mu, self.values))
        self.variance = float(np.dot(self.mu, (self.values - self.mean) ** 2))
        live = self.values[self.mu > 0]
        self.degenerate = live.size == 0 or live.min() == live.max()

    def frac_without(self, dims: Sequence[int]) -> np.ndarray:
        keep = [k for k in range(self.frac.shape[1]) if k not in set(dims)]
        if not keep:
            return np.ones(self.frac.shape[0])
        return np.prod(self.frac[:, keep], axis=1)

    def marginal_1d(self, j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact marginal over dimension ``j``.

        Returns ``(cuts, p, a)``: the interval end points, each interval's
        probability mass, and the marginal value on each interval.
        """
        contrib = self.values * self.frac_without([j])
        return _marginal_1d(self.lo[:, j].copy(), self.hi[:, j].copy(),
                            self.domain[j, 0], self.domain[j, 1], contrib)


@dataclass(frozen=True)
class TreeDecomposition:
    mean: float
    variance: float
    measure: float
    main: np.ndarray  # variance of each main effect
    degenerate: bool

    @property
    def fractions(self) -> np.ndarray:
        if self.degenerate:
            return np.zeros_like(self.main)
        return self.main / self.variance


def decompose_tree(tree: RegressionTree, domain=None) -> TreeDecomposition:
    leaves = _Leaves(tree, domain)
    d = leaves.frac.shape[1]
    main = np.zeros(d)
    if not leaves.degenerate:
        main = _main_effects(leaves.lo, leaves.hi, leaves.values, leaves.domain, leaves.mean)
    return TreeDecomposition(leaves.mean, leaves.variance, float(leaves.mu.sum()), main, leaves.degenerate)


def tree_marginal(tree: RegressionTree, dims: Sequence[int], values: Sequence[float], domain=None) -> float:
    """Average of ``tree`` over all dimensions outside ``dims``, with ``dims``
    pinned to ``values``."""
    dims = list(dims)
    values = np.asarray(values, dtype=float).reshape(-1)
    if not dims or len(dims) != values.size:
        raise ShapeMismatchError("dims must be non-empty and match values in length")
    leaves = _Leaves(tree, domain)
    ok = np.ones(leaves.values.size, dtype=bool)
    for j, v in zip(dims, values):
        lo, hi = leaves.lo[:, j], leaves.hi[:, j]
        on_floor = (v == leaves.domain[j, 0]) & (lo == leaves.domain[j, 0])
        ok &= ((lo < v) | on_floor) & (v <= hi)
    return float(np.dot(leaves.values[ok], leaves.frac_without(dims)[ok]))


def tree_importance(tree: RegressionTree, dim: int, domain=None) -> Tuple[float, float, bool]:
    """Main-effect variance fraction of ``dim``: ``(fraction, total_variance, degenerate)``."""
    dec = decompose_tree(tree, domain)
    return float(dec.fractions[dim]), dec.variance, dec.degenerate


def tree_pairwise_importance(tree: RegressionTree, i: int, j: int, domain=None) -> float:
    if i == j:
        raise ValidationError("pairwise importance needs two distinct dimensions")
    leaves = _Leaves(tree, domain)
    if leaves.degenerate:
        return 0.0
    ci, pi, ai = leaves.marginal_1d(i)
    cj, pj, aj = leaves.marginal_1d(j)
    ki, kj = ci.size - 1, cj.size - 1
    si = np.searchsorted(ci, leaves.lo[:, i])
    ei = np.searchsorted(ci, leaves.hi[:, i])
    sj = np.searchsorted(cj, leaves.lo[:, j])
    ej = np.searchsorted(cj, leaves.hi[:, j])
    contrib = leaves.values * leaves.frac_without([i, j])
    diff = np.zeros((ki + 1, kj + 1))
    np.add.at(diff, (si, sj), contrib)
    np.add.at(diff, (si, ej), -contrib)
    np.add.at(diff, (ei, sj), -contrib)
    np.add.at(diff, (ei, ej), contrib)
    joint = np.cumsum(np.cumsum(diff, axis=0), axis=1)[:ki, :kj]
    resid = joint - ai[:, None] - aj[None, :] + leaves.mean
    v_ij = float(np.sum(pi[:, None] * pj[None, :] * resid**2))
    return v_ij / leaves.variance


@dataclass
class ForestImportance:
    mean: np.ndarray
    std: np.ndarray
    degenerate: bool
    tree_fractions: np.ndarray  # (n_trees, d); zeros for degenerate trees
    tree_degenerate: np.ndarray
    tree_variance: np.ndarray
    tree_measure: np.ndarray


def forest_importance(forest: Forest) -> ForestImportance:
    """Mean and spread of per-tree main-effect fractions; degenerate trees are
    left out of the statistics."""
    decs = [decompose_tree(t, forest.domain) for t in forest.trees]
    fr = np.array([dec.fractions for dec in decs]).reshape(len(decs), forest.d)
    degen = np.array([dec.degenerate for dec in decs], dtype=bool)
    live = fr[~degen]
    if live.shape[0] == 0:
        mean = np.zeros(forest.d)
        std = np.zeros(forest.d)
    else:
        mean = live.mean(axis=0)
        std = live.std(axis=0)
    return ForestImportance(
        mean=mean,
        std=std,
        degenerate=bool(degen.all()),
        tree_fractions=fr,
        tree_degenerate=degen,
        tree_variance=np.array([dec.variance for dec in decs]),
        tree_measure=np.array([dec.measure for dec in decs]),
    )


def pairwise_importance(forest: Forest, dim_i: int, dim_j: int) -> float:
    vals = [
        tree_pairwise_importance(t, dim_i, dim_j, forest.domain)
        for t in forest.trees
        if not _Leaves(t, forest.domain).degenerate
    ]
    return float(np.mean(vals)) if vals else 0.0


@dataclass
class ImportanceCurve:
    """Importance of one hyperparameter (or one pair) across weightings."""

    hyperparameter: str
    w1: List[float] = field(default_factory=list)
    importance: List[float] = field(default_factory=list)
    std: List[float] = field(default_factory=list)
    degenerate: List[bool] = field(default_factory=list)
    members: Tuple[str, ...] = ()

    @property
    def points(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.w1, self.importance, self.std))

    def to_dict(self) -> dict:
        out = {
            "hyperparameter": self.hyperparameter,
            "importance": list(self.importance),
            "std": list(self.std),
            "degenerate": list(self.degenerate),
        }
        if len(self.members) == 2:
            out["interaction"] = list(self.members)
        return out

    @classmethod
    def from_dict(cls, d: dict, w1: Sequence[float]) -> "ImportanceCurve":
        members = tuple(d.get("interaction", (d["hyperparameter"],)))
        return cls(d["hyperparameter"], list(w1), list(d["importance"]), list(d["std"]), list(d["degenerate"]), members)


@dataclass
class FanovaOptions:
    forest: ForestParams = field(default_factory=ForestParams)
    pairwise: bool = False
    weights: List[WeightVector] = field(default_factory=list)

    def __post_init__(self):
        if not self.weights:
            raise ValidationError("at least one weighting is required")


def weight_seed(base_seed: int, weight_index: int) -> int:
    return derive_seed(base_seed, weight_index)


def mo_fanova(ds: MetaDataset, opts: FanovaOptions, diagnostics: Optional[list] = None,
              surrogates: Optional[list] = None) -> List[ImportanceCurve]:
    """fANOVA importance per weighting, one forest per weighting.

    Weights are processed in ascending ``w1``; the forest for the k-th weight
    is seeded with ``weight_seed(opts.forest.seed, k)``. When given, the
    ``diagnostics``/``surrogates`` lists receive each weighting's
    :class:`ForestImportance` and fitted forest.
    """
    ds.require_bi_objective()
    weights = sorted(opts.weights, key=lambda w: w.w1)
    norm = ds.normalized()
    domain = ds.space.domain()
    names = ds.space.names
    d = len(names)
    pairs = list(combinations(range(d), 2)) if opts.pairwise else []

    curves = [ImportanceCurve(name, members=(name,)) for name in names]
    curves += [ImportanceCurve(f"{names[i]}:{names[j]}", members=(names[i], names[j])) for i, j in pairs]

    for k, w in enumerate(weights):
        y = scalarize(norm[:, 0], norm[:, 1], w)
        forest = fit(ds.X, y, opts.forest.with_seed(weight_seed(opts.forest.seed, k)), domain=domain)
        imp = forest_importance(forest)
        if diagnostics is not None:
            diagnostics.append(imp)
        if surrogates is not None:
            surrogates.append(forest)
        for dim in range(d):
            c = curves[dim]
            c.w1.append(w.w1)
            c.importance.append(float(imp.mean[dim]))
            c.std.append(float(imp.std[dim]))
            c.degenerate.append(imp.degenerate)
        for offset, (i, j) in enumerate(pairs):
            c = curves[d + offset]
            per_tree = np.array([
                tree_pairwise_importance(t, i, j, domain)
                for t, dead in zip(forest.trees, imp.tree_degenerate) if not dead
            ])
            c.w1.append(w.w1)
            c.importance.append(float(per_tree.mean()) if per_tree.size else 0.0)
            c.std.append(float(per_tree.std()) if per_tree.size else 0.0)
            c.degenerate.append(imp.degenerate)
    return curves
