"""Bi-objective benchmark problems with known importances, plus the
demographic-parity loss used by fairness objectives.

Objectives are sums of per-dimension basis terms on the *encoded* coordinate
``u`` of each hyperparameter, plus optional products of two coordinates:

    linear     u
    quadratic  u**2
    step       1 if u > 0.5 else 0
    sin        sin(2 * pi * u)

An inactive conditional coordinate contributes 0 to every term.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mohpi.configspace import (
    INACTIVE,
    ConfigSpace,
    HyperparameterSpec,
    encode,
    load_space,
    space_from_dict,
)
from mohpi.dataset import MetaDataset, ObjectiveColumn
from mohpi.errors import EmptyGroupError, SchemaError, ShapeMismatchError, UnsupportedBasisError, ValidationError
from mohpi.pareto import WeightVector

BASES = {
    "linear": lambda u: u,
    "quadratic": lambda u: u * u,
    "step": lambda u: (u > 0.5).astype(float),
    "sin": lambda u: np.sin(2.0 * np.pi * u),
}
POLYNOMIAL = {"linear": 1, "quadratic": 2}
QUADRATURE_POINTS = 1_000_000

_PROBLEM_KEYS = {"name", "dims", "space", "objectives"}
_OBJECTIVE_KEYS = {"name", "terms", "interactions", "noise_sigma"}


@dataclass(frozen=True)
class Term:
    dim: int
    basis: str
    coef: float


@dataclass(frozen=True)
class Interaction:
    dims: Tuple[int, int]
    coef: float


@dataclass(frozen=True)
class SyntheticObjective:
    name: str
    terms: Tuple[Term, ...] = ()
    interactions: Tuple[Interaction, ...] = ()
    noise_sigma: float = 0.0

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        active = X != INACTIVE
        out = np.zeros(X.shape[0])
        for t in self.terms:
            u = X[:, t.dim]
            out += np.where(active[:, t.dim], t.coef * BASES[t.basis](u), 0.0)
        for it in self.interactions:
            a, b = it.dims
            ua = np.where(active[:, a], X[:, a], 0.0)
            ub = np.where(active[:, b], X[:, b], 0.0)
            out += it.coef * ua * ub
        return out


@dataclass(frozen=True)
class SyntheticProblem:
    space: ConfigSpace
    objectives: Tuple[SyntheticObjective, ...]
    name: str = "synthetic"

    def evaluate(self, X) -> np.ndarray:
        """Noise-free objective values, shape (n, n_objectives)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.space):
            raise ShapeMismatchError(f"expected {len(self.space)} columns, got {X.shape[1]}")
        return np.column_stack([obj.evaluate(X) for obj in self.objectives])

    @property
    def has_interactions(self) -> bool:
        return any(obj.interactions for obj in self.objectives)


def _float_dim(name: str) -> HyperparameterSpec:
    return HyperparameterSpec(name, "float", lower=0.0, upper=1.0, default=0.5)


def _resolve_space(doc: dict, base_dir: Optional[Path]) -> ConfigSpace:
    if "space" in doc and "dims" in doc:
        raise SchemaError("give either 'dims' or 'space', not both")
    if "space" in doc:
        raw = doc["space"]
        if isinstance(raw, dict):
            return space_from_dict(raw)
        if isinstance(raw, str):
            p = Path(raw)
            if base_dir is not None and not p.is_absolute() and (base_dir / p).exists():
                p = base_dir / p
            return load_space(p)
        raise SchemaError("'space' must be a schema object or a path")
    dims = doc.get("dims")
    if not isinstance(dims, list) or not dims:
        raise SchemaError("'dims' must be a non-empty list")
    if all(isinstance(d, str) for d in dims):
        return ConfigSpace(tuple(_float_dim(d) for d in dims), name=str(doc.get("name", "synthetic")))
    return space_from_dict({"name": doc.get("name", "synthetic"), "hyperparameters": dims})


def make_problem(spec, base_dir=None) -> SyntheticProblem:
    """Build a problem from its JSON description (a dict or a JSON string)."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise SchemaError("problem spec must be a JSON object")
    unknown = set(spec) - _PROBLEM_KEYS
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)}")
    space = _resolve_space(spec, Path(base_dir) if base_dir else None)

    def dim_index(name) -> int:
        if name not in space:
            raise SchemaError(f"undefined dimension {name!r}")
        return space.index(name)

    objs = spec.get("objectives")
    if not isinstance(objs, list) or not objs:
        raise SchemaError("'objectives' must be a non-empty list")
    objectives = []
    for raw in objs:
        if not isinstance(raw, dict):
            raise SchemaError("each objective must be an object")
        unknown = set(raw) - _OBJECTIVE_KEYS
        if unknown:
            raise SchemaError(f"unknown objective keys {sorted(unknown)}")
        if "name" not in raw:
            raise SchemaError("objective without 'name'")
        terms = []
        for t in raw.get("terms", []):
            if set(t) - {"dim", "basis", "coef"} or "dim" not in t:
                raise SchemaError(f"bad term {t!r}")
            basis = t.get("basis", "linear")
            if basis not in BASES:
                raise SchemaError(f"unknown basis {basis!r}")
            terms.append(Term(dim_index(t["dim"]), basis, float(t.get("coef", 1.0))))
        inters = []
        for it in raw.get("interactions", []):
            dims = it.get("dims")
            if set(it) - {"dims", "coef"} or not isinstance(dims, list) or len(dims) != 2:
                raise SchemaError(f"bad interaction {it!r}")
            a, b = dim_index(dims[0]), dim_index(dims[1])
            if a == b:
                raise SchemaError("an interaction needs two distinct dimensions")
            inters.append(Interaction((a, b), float(it.get("coef", 1.0))))
        sigma = float(raw.get("noise_sigma", 0.0))
        if sigma < 0:
            raise SchemaError("noise_sigma must be >= 0")
        objectives.append(SyntheticObjective(str(raw["name"]), tuple(terms), tuple(inters), sigma))
    names = [o.name for o in objectives]
    if len(set(names)) != len(names):
        raise SchemaError("objective names must be unique")
    clash = set(names) & set(space.names)
    if clash:
        raise SchemaError(f"objective names clash with hyperparameters: {sorted(clash)}")
    return SyntheticProblem(space, tuple(objectives), name=str(spec.get("name", space.name)))


def load_problem(path) -> SyntheticProblem:
    """Load a problem spec file; bare names resolve to bundled problems."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        bundled = resources.files("mohpi") / "data" / f"{p.name}.json"
        if bundled.is_file():
            return make_problem(bundled.read_text(encoding="utf-8"))
    return make_problem(p.read_text(encoding="utf-8"), base_dir=p.parent)


def _sample_config(space: ConfigSpace, u: np.ndarray) -> dict:
    config = {}
    for j, spec in enumerate(space.specs):
        if space.is_active(spec.name, config):
            config[spec.name] = spec.from_unit(float(u[j]))
    return config


def sample_runs(problem: SyntheticProblem, n: int, seed: int) -> MetaDataset:
    """Evaluate ``n`` uniformly drawn configurations (random search)."""
    if n < 2:
        raise ValidationError("n must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    U = rng.random((n, len(problem.space)))
    configs = [_sample_config(problem.space, u) for u in U]
    X = np.array([encode(problem.space, c) for c in configs])
    Y = problem.evaluate(X)
    cols = []
    for k, obj in enumerate(problem.objectives):
        values = Y[:, k]
        if obj.noise_sigma > 0:
            values = values + rng.normal(0.0, obj.noise_sigma, size=n)
        cols.append(ObjectiveColumn.from_values(obj.name, values))
    return MetaDataset(problem.space, X, tuple(cols), tuple(configs))


def _snap(spec: HyperparameterSpec, u: np.ndarray) -> np.ndarray:
    """Encoded coordinate actually produced when sampling ``u`` uniformly."""
    if spec.kind == "float":
        return u
    if spec.kind == "boolean":
        return (u >= 0.5).astype(float)
    if spec.kind == "categorical":
        k = len(spec.categories) - 1
        return np.floor(u * k + 0.5) / k
    lo, hi = spec._scale()
    v = lo + u * (hi - lo)
    if spec.log_scale:
        v = 10.0 ** v
    v = np.clip(np.floor(np.clip(v, spec.lower, spec.upper) + 0.5), spec.lower, spec.upper)
    if spec.log_scale:
        v = np.log10(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def _uniform_moments(powers: int) -> np.ndarray:
    return np.array([1.0 / (m + 1) for m in range(powers + 1)])


class _DimTerm:
    """Combined polynomial/basis term of one dimension, scaled per objective."""

    def __init__(self, spec: HyperparameterSpec):
        self.spec = spec
        self.bases: Dict[str, float] = {}

    def add(self, basis: str, coef: float):
        self.bases[basis] = self.bases.get(basis, 0.0) + coef

    def closed_form(self) -> bool:
        return self.spec.kind == "float" and all(b in POLYNOMIAL for b in self.bases)

    def _grid(self) -> np.ndarray:
        u = (np.arange(QUADRATURE_POINTS) + 0.5) / QUADRATURE_POINTS
        return _snap(self.spec, u)

    def values_on(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for basis, coef in self.bases.items():
            out += coef * BASES[basis](u)
        return out

    def variance(self) -> float:
        if not self.bases:
            return 0.0
        if self.closed_form():
            a = self.bases.get("linear", 0.0)
            b = self.bases.get("quadratic", 0.0)
            m = _uniform_moments(4)
            # Var(a u + b u^2) from raw moments of U(0, 1)
            return a * a * (m[2] - m[1] ** 2) + b * b * (m[4] - m[2] ** 2) + 2 * a * b * (m[3] - m[1] * m[2])
        return float(np.var(self.values_on(self._grid())))

    def value_range(self) -> float:
        if not self.bases:
            return 0.0
        u = np.concatenate([self._grid(), _snap(self.spec, np.array([0.0, 1.0]))])
        v = self.values_on(u)
        return float(v.max() - v.min())


def _coordinate_moments(spec: HyperparameterSpec) -> Tuple[float, float]:
    if spec.kind == "float":
        return 0.5, 1.0 / 12.0
    u = _snap(spec, (np.arange(QUADRATURE_POINTS) + 0.5) / QUADRATURE_POINTS)
    return float(u.mean()), float(u.var())


def analytic_importance(problem: SyntheticProblem, w: WeightVector, dataset: Optional[MetaDataset] = None) -> np.ndarray:
    """Ground-truth main-effect variance fractions of ``w1 * f1~ + w2 * f2~``.

    ``f~`` is min-max normalized with the ranges of ``dataset`` when given
    (matching the analysis pipeline) or with the exact function range
    otherwise. Noise is ignored. Without interactions the fractions sum to 1.
    """
    space = problem.space
    if len(problem.objectives) != 2:
        raise ValidationError("analytic importance needs exactly 2 objectives")
    if space.has_conditionals:
        raise UnsupportedBasisError("analytic importance does not support conditional hyperparameters")

    if dataset is not None:
        ranges = [c.normalizer.max - c.normalizer.min for c in dataset.objectives]
    else:
        if problem.has_interactions:
            raise UnsupportedBasisError("exact ranges with interactions need a dataset for normalization")
        ranges = []
        for obj in problem.objectives:
            per_dim = [_DimTerm(s) for s in space.specs]
            for t in obj.terms:
                per_dim[t.dim].add(t.basis, t.coef)
            ranges.append(sum(p.value_range() for p in per_dim))
    scale = [w.w1 / ranges[0] if ranges[0] > 0 else 0.0, w.w2 / ranges[1] if ranges[1] > 0 else 0.0]

    d = len(space)
    dims = [_DimTerm(s) for s in space.specs]
    pair_coef: Dict[Tuple[int, int], float] = {}
    for obj, c in zip(problem.objectives, scale):
        for t in obj.terms:
            dims[t.dim].add(t.basis, c * t.coef)
        for it in obj.interactions:
            key = tuple(sorted(it.dims))
            pair_coef[key] = pair_coef.get(key, 0.0) + c * it.coef

    moments = [_coordinate_moments(s) for s in space.specs] if pair_coef else None
    for (a, b), coef in pair_coef.items():
        # E[coef * u_a * u_b | u_a] adds a linear term in u_a
        dims[a].add("linear", coef * moments[b][0])
        dims[b].add("linear", coef * moments[a][0])

    main = np.array([p.variance() for p in dims])
    total = float(main.sum())
    for (a, b), coef in pair_coef.items():
        total += coef * coef * moments[a][1] * moments[b][1]
    if total <= 0:
        return np.zeros(d)
    return main / total


def dp_loss(predictions, sensitive, shared_n: bool = False) -> float:
    """Demographic-parity loss: absolute gap between the positive-prediction
    rates of the two groups ``sensitive == 0`` and ``sensitive == 1``.

    ``shared_n`` divides both group sums by the total count instead of the
    group sizes.
    """
    y = np.asarray(predictions)
    s = np.asarray(sensitive)
    if y.shape != s.shape or y.ndim != 1:
        raise ShapeMismatchError("predictions and sensitive must be vectors of equal length")
    g0, g1 = s == 0, s == 1
    if not g0.any() or not g1.any():
        raise EmptyGroupError("both sensitive groups need at least one member")
    y = y.astype(float)
    if shared_n:
        n = y.size
        return float(abs(y[g0].sum() / n - y[g1].sum() / n))
    return float(abs(y[g0].sum() / g0.sum() - y[g1].sum() / g1.sum()))
