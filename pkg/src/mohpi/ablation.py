"""Greedy surrogate-based ablation paths, one per objective weighting.

Two forests are trained on the raw objectives once; per weighting their
predictions are min-max normalized with the dataset normalizers, weighted and
summed. Starting from the default configuration, the single flip towards the
incumbent that yields the lowest weighted prediction is committed each round
until the incumbent is reached. Deltas can be negative and are kept as-is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from mohpi.configspace import INACTIVE, ConfigSpace, Configuration, decode, default_config, encode
from mohpi.dataset import MetaDataset, MinMaxNormalizer
from mohpi.forest import Forest, ForestParams, derive_seed, fit
from mohpi.pareto import WeightVector


@dataclass(frozen=True)
class AblationStep:
    hyperparameter: str
    new_value: Any
    performance_after: float
    delta: float
    cascaded: Tuple[str, ...] = ()  # conditional children changed by the same flip

    def to_dict(self) -> dict:
        out = {
            "hyperparameter": self.hyperparameter,
            "new_value": self.new_value,
            "delta": self.delta,
            "performance_after": self.performance_after,
        }
        if self.cascaded:
            out["cascaded"] = list(self.cascaded)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AblationStep":
        return cls(d["hyperparameter"], d.get("new_value"), d["performance_after"], d["delta"],
                   tuple(d.get("cascaded", ())))


@dataclass
class AblationPath:
    weight: WeightVector
    default_performance: float
    incumbent_index: int
    steps: List[AblationStep] = field(default_factory=list)

    @property
    def incumbent_performance(self) -> float:
        return self.steps[-1].performance_after if self.steps else self.default_performance

    @property
    def no_improvement(self) -> bool:
        """True when every committed flip made the prediction worse or left it unchanged."""
        return bool(self.steps) and all(s.delta <= 0 for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "w1": self.weight.w1,
            "w2": self.weight.w2,
            "incumbent_row": self.incumbent_index,
            "default_performance": self.default_performance,
            "no_improvement": self.no_improvement,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AblationPath":
        return cls(
            WeightVector(d["w1"], d.get("w2", 1.0 - d["w1"])),
            d["default_performance"],
            d["incumbent_row"],
            [AblationStep.from_dict(s) for s in d["steps"]],
        )


@dataclass
class AblationOptions:
    forest: ForestParams = field(default_factory=ForestParams)
    weights: List[WeightVector] = field(default_factory=list)
    raw_incumbent: bool = False


def fit_objective_surrogates(ds: MetaDataset, params: ForestParams) -> Tuple[Forest, Forest]:
    """One forest per raw (unnormalized) objective, seeded ``(seed, 1)`` and ``(seed, 2)``."""
    ds.require_bi_objective()
    domain = ds.space.domain()
    s1 = fit(ds.X, ds.objectives[0].raw, params.with_seed(derive_seed(params.seed, 1)), domain=domain)
    s2 = fit(ds.X, ds.objectives[1].raw, params.with_seed(derive_seed(params.seed, 2)), domain=domain)
    return s1, s2


def weighted_prediction(s1: Forest, s2: Forest, normalizers: Sequence[MinMaxNormalizer], w: WeightVector, x):
    """``w1 * norm1(S1(x)) + w2 * norm2(S2(x))`` for one vector or a batch."""
    x = np.asarray(x, dtype=float)
    batch = x.reshape(-1, s1.d)
    p1 = normalizers[0].apply(s1.predict(batch))
    p2 = normalizers[1].apply(s2.predict(batch))
    out = w.w1 * p1 + w.w2 * p2
    return float(out[0]) if x.ndim == 1 else out


def incumbent(ds: MetaDataset, w: WeightVector, raw: bool = False) -> Tuple[int, Configuration]:
    """Row minimizing the scalarized objectives (normalized unless ``raw``);
    ties go to the lowest row index."""
    obj = ds.raw() if raw else ds.normalized()
    score = w.w1 * obj[:, 0] + w.w2 * obj[:, 1]
    idx = int(np.argmin(score))
    config = dict(ds.configs[idx]) if ds.configs else decode(ds.space, ds.X[idx])
    return idx, config


def _apply_flip(space: ConfigSpace, current: np.ndarray, target: np.ndarray, defaults: np.ndarray, dim: int):
    """Copy ``target[dim]`` into ``current`` and bring the children's activity
    in line. Returns the new vector and the names of changed children."""
    out = current.copy()
    out[dim] = target[dim]
    changed = []
    parent = space.specs[dim]
    for child in space.children(parent.name):
        c = space.index(child)
        required = parent.to_unit(space[child].condition[1])
        if out[dim] == required:
            new = out[c] if out[c] != INACTIVE else defaults[c]
        else:
            new = INACTIVE
        if new != out[c]:
            out[c] = new
            changed.append(child)
    return out, tuple(changed)


def _eligible(space: ConfigSpace, current: np.ndarray, target: np.ndarray) -> List[int]:
    dims = []
    for i, spec in enumerate(space.specs):
        if current[i] == target[i]:
            continue
        # a child toggles its activity only through its parent
        if spec.condition is not None and (current[i] == INACTIVE or target[i] == INACTIVE):
            continue
        dims.append(i)
    return dims


def ablation_path(s1: Forest, s2: Forest, normalizers: Sequence[MinMaxNormalizer], space: ConfigSpace,
                  default: Configuration, incumbent_config: Configuration, w: WeightVector,
                  incumbent_index: int = -1) -> AblationPath:
    current = encode(space, default)
    target = encode(space, incumbent_config)
    defaults = encode(space, default_config(space))
    # children of inactive parents default to their spec default once activated
    for i, spec in enumerate(space.specs):
        if defaults[i] == INACTIVE:
            defaults[i] = spec.to_unit(spec.default)

    before = weighted_prediction(s1, s2, normalizers, w, current)
    path = AblationPath(w, before, incumbent_index)
    while True:
        dims = _eligible(space, current, target)
        if not dims:
            break
        flips = [_apply_flip(space, current, target, defaults, i) for i in dims]
        perf = weighted_prediction(s1, s2, normalizers, w, np.array([f[0] for f in flips]))
        best = int(np.argmin(perf))
        dim = dims[best]
        current, cascaded = flips[best]
        after = float(perf[best])
        name = space.specs[dim].name
        path.steps.append(AblationStep(name, incumbent_config.get(name), after, before - after, cascaded))
        before = after
    return path


def mo_ablation(ds: MetaDataset, opts: AblationOptions, surrogates: Optional[list] = None) -> List[AblationPath]:
    """One ablation path per weighting, ordered by ``w1``."""
    s1, s2 = fit_objective_surrogates(ds, opts.forest)
    if surrogates is not None:
        surrogates.extend([s1, s2])
    normalizers = [c.normalizer for c in ds.objectives]
    default = default_config(ds.space)
    paths = []
    for w in sorted(opts.weights, key=lambda w: w.w1):
        idx, inc = incumbent(ds, w, raw=opts.raw_incumbent)
        paths.append(ablation_path(s1, s2, normalizers, ds.space, default, inc, w, idx))
    return paths
