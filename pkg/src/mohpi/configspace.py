"""Hyperparameter spaces and their numeric encoding.

Encoding rules (per dimension, in declaration order):

- float/int: min-max scaled to [0, 1], on log10 scale when ``log`` is set
- categorical: ordinal index / (n_categories - 1)
- boolean: 0.0 / 1.0
- inactive conditional hyperparameter: ``INACTIVE`` (-1.0)
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from mohpi.errors import (
    ConditionError,
    DomainError,
    InactiveValueError,
    OutOfDomainError,
    OutOfRangeError,
    SchemaError,
)

INACTIVE = -1.0
KINDS = ("float", "int", "categorical", "boolean")

Configuration = Dict[str, Any]

_HP_KEYS = {"name", "type", "lower", "upper", "log", "categories", "default", "condition"}
_SPACE_KEYS = {"name", "hyperparameters"}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class HyperparameterSpec:
    name: str
    kind: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    log_scale: bool = False
    categories: Tuple[str, ...] = ()
    default: Any = None
    condition: Optional[Tuple[str, Any]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind in ("float", "int"):
            if self.lower is None or self.upper is None:
                raise SchemaError(f"{self.name}: 'lower' and 'upper' are required")
            if not self.lower < self.upper:
                raise DomainError(f"{self.name}: lower ({self.lower}) must be < upper ({self.upper})")
            if self.log_scale and self.lower <= 0:
                raise DomainError(f"{self.name}: log scale needs lower > 0, got {self.lower}")
        elif self.kind == "categorical":
            if len(self.categories) < 2:
                raise DomainError(f"{self.name}: categorical needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise DomainError(f"{self.name}: duplicate categories")
        if not self.contains(self.default):
            raise DomainError(f"{self.name}: default {self.default!r} outside the domain")

    def contains(self, value: Any) -> bool:
        if self.kind == "float":
            return _is_number(value) and self.lower <= value <= self.upper
        if self.kind == "int":
            return _is_number(value) and float(value).is_integer() and self.lower <= value <= self.upper
        if self.kind == "categorical":
            return isinstance(value, str) and value in self.categories
        return isinstance(value, (bool, np.bool_))

    def _scale(self) -> Tuple[float, float]:
        if self.log_scale:
            return math.log10(self.lower), math.log10(self.upper)
        return float(self.lower), float(self.upper)

    def to_unit(self, value: Any) -> float:
        if not self.contains(value):
            raise OutOfDomainError(f"{self.name}: value {value!r} outside the domain")
        if self.kind in ("float", "int"):
            lo, hi = self._scale()
            v = math.log10(value) if self.log_scale else float(value)
            return min(max((v - lo) / (hi - lo), 0.0), 1.0)
        if self.kind == "categorical":
            return self.categories.index(value) / (len(self.categories) - 1)
        return 1.0 if value else 0.0

    def from_unit(self, u: float) -> Any:
        if not 0.0 <= u <= 1.0:
            raise OutOfRangeError(f"{self.name}: coordinate {u} outside [0, 1]")
        if self.kind in ("float", "int"):
            lo, hi = self._scale()
            v = lo + u * (hi - lo)
            if self.log_scale:
                v = 10.0 ** v
            v = min(max(v, self.lower), self.upper)
            if self.kind == "int":
                return int(min(max(_round_half_up(v), self.lower), self.upper))
            return float(v)
        if self.kind == "categorical":
            return self.categories[_round_half_up(u * (len(self.categories) - 1))]
        return u >= 0.5

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "type": self.kind}
        if self.kind in ("float", "int"):
            out["lower"] = self.lower
            out["upper"] = self.upper
            out["log"] = self.log_scale
        if self.kind == "categorical":
            out["categories"] = list(self.categories)
        out["default"] = self.default
        if self.condition is not None:
            out["condition"] = {"parent": self.condition[0], "value": self.condition[1]}
        return out


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, (bool, np.bool_))


@dataclass(frozen=True)
class ConfigSpace:
    """An ordered, immutable collection of hyperparameter specs.

    Declaration order is the dimension order of every encoded vector.
    """

    specs: Tuple[HyperparameterSpec, ...]
    name: str = "space"
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        index = {}
        for i, spec in enumerate(self.specs):
            if spec.name in index:
                raise SchemaError(f"duplicate hyperparameter name {spec.name!r}")
            index[spec.name] = i
        object.__setattr__(self, "_index", index)
        self._check_conditions()

    def _check_conditions(self):
        parents = {s.name: s.condition[0] for s in self.specs if s.condition is not None}
        for child, parent in parents.items():
            if parent not in self._index:
                raise ConditionError(f"{child}: unknown parent {parent!r}")
            if parent == child:
                raise ConditionError(f"{child}: conditional cycle ({child} -> {child})")
        for start in parents:
            seen = [start]
            node = start
            while node in parents:
                node = parents[node]
                if node in seen:
                    raise ConditionError("conditional cycle: " + " -> ".join(seen + [node]))
                seen.append(node)
        for child, parent in parents.items():
            if parent in parents:
                raise ConditionError(
                    f"{child}: parent {parent!r} is itself conditional; only one level is supported"
                )
            required = self[child].condition[1]
            if not self[parent].contains(required):
                raise ConditionError(f"{child}: condition value {required!r} outside the domain of {parent!r}")

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, name: str) -> HyperparameterSpec:
        return self.specs[self._index[name]]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.specs]

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def has_conditionals(self) -> bool:
        return any(s.condition is not None for s in self.specs)

    def conditional_dims(self) -> List[int]:
        return [i for i, s in enumerate(self.specs) if s.condition is not None]

    def children(self, name: str) -> List[str]:
        return [s.name for s in self.specs if s.condition is not None and s.condition[0] == name]

    def is_active(self, name: str, config: Configuration) -> bool:
        spec = self[name]
        if spec.condition is None:
            return True
        parent, required = spec.condition
        return parent in config and config[parent] == required

    def domain(self) -> np.ndarray:
        """Per-dimension integration bounds of the encoded space, shape (d, 2)."""
        dom = np.zeros((len(self), 2))
        dom[:, 1] = 1.0
        for i in self.conditional_dims():
            dom[i, 0] = INACTIVE
        return dom

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "hyperparameters": [s.to_dict() for s in self.specs]}


def _spec_from_dict(raw: Dict[str, Any]) -> HyperparameterSpec:
    if not isinstance(raw, dict):
        raise SchemaError("each hyperparameter must be a JSON object")
    unknown = set(raw) - _HP_KEYS
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)} in hyperparameter {raw.get('name')!r}")
    for key in ("name", "type", "default"):
        if key not in raw:
            raise SchemaError(f"hyperparameter {raw.get('name')!r} is missing {key!r}")
    name, kind = raw["name"], raw["type"]
    if not isinstance(name, str) or not name:
        raise SchemaError("hyperparameter names must be non-empty strings")
    if kind not in KINDS:
        raise SchemaError(f"{name}: unknown type {kind!r}")

    condition = None
    if raw.get("condition") is not None:
        cond = raw["condition"]
        if not isinstance(cond, dict) or set(cond) != {"parent", "value"}:
            raise SchemaError(f"{name}: condition must be {{'parent': str, 'value': value}}")
        condition = (cond["parent"], cond["value"])

    if kind in ("float", "int"):
        for key in ("lower", "upper"):
            if key not in raw:
                raise SchemaError(f"{name}: missing {key!r}")
            if not _is_number(raw[key]):
                raise SchemaError(f"{name}: {key!r} must be a number")
        lower, upper = raw["lower"], raw["upper"]
        default = raw["default"]
        if kind == "int":
            if not (float(lower).is_integer() and float(upper).is_integer()):
                raise DomainError(f"{name}: int bounds must be integral")
            lower, upper = int(lower), int(upper)
            if _is_number(default) and float(default).is_integer():
                default = int(default)
        elif _is_number(default):
            default = float(default)
        return HyperparameterSpec(
            name, kind, lower=lower, upper=upper, log_scale=bool(raw.get("log", False)),
            default=default, condition=condition,
        )
    if kind == "categorical":
        cats = raw.get("categories")
        if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
            raise SchemaError(f"{name}: 'categories' must be a list of strings")
        return HyperparameterSpec(name, kind, categories=tuple(cats), default=raw["default"], condition=condition)
    return HyperparameterSpec(name, kind, default=raw["default"], condition=condition)


def space_from_dict(doc: Dict[str, Any]) -> ConfigSpace:
    if not isinstance(doc, dict):
        raise SchemaError("config space must be a JSON object")
    unknown = set(doc) - _SPACE_KEYS
    if unknown:
        raise SchemaError(f"unknown top-level keys {sorted(unknown)}")
    if "hyperparameters" not in doc or not isinstance(doc["hyperparameters"], list):
        raise SchemaError("missing 'hyperparameters' list")
    if not doc["hyperparameters"]:
        raise SchemaError("a space needs at least one hyperparameter")
    specs = [_spec_from_dict(raw) for raw in doc["hyperparameters"]]
    return ConfigSpace(tuple(specs), name=str(doc.get("name", "space")))


def parse_space(schema_text: str) -> ConfigSpace:
    """Parse a JSON config-space schema and validate all invariants."""
    try:
        doc = json.loads(schema_text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return space_from_dict(doc)


def load_space(path) -> ConfigSpace:
    """Load a schema from ``path``; bare names resolve to bundled spaces."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        bundled = resources.files("mohpi") / "data" / f"{p.name}.json"
        if bundled.is_file():
            return parse_space(bundled.read_text(encoding="utf-8"))
    return parse_space(p.read_text(encoding="utf-8"))


def default_config(space: ConfigSpace) -> Configuration:
    config: Configuration = {}
    for spec in space.specs:
        if space.is_active(spec.name, config):
            config[spec.name] = spec.default
    return config


def encode(space: ConfigSpace, config: Configuration, strict: bool = True) -> np.ndarray:
    vec = np.empty(len(space))
    for i, spec in enumerate(space.specs):
        present = spec.name in config and config[spec.name] is not None
        if space.is_active(spec.name, config):
            if not present:
                raise OutOfDomainError(f"{spec.name}: active hyperparameter has no value")
            vec[i] = spec.to_unit(config[spec.name])
        else:
            if present and strict:
                raise InactiveValueError(f"{spec.name}: value given but the hyperparameter is inactive")
            vec[i] = INACTIVE
    return vec


def decode(space: ConfigSpace, vector: Sequence[float]) -> Configuration:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (len(space),):
        raise OutOfRangeError(f"expected a vector of length {len(space)}, got shape {vector.shape}")
    config: Configuration = {}
    for spec, u in zip(space.specs, vector):
        if u == INACTIVE:
            if spec.condition is None:
                raise OutOfRangeError(f"{spec.name}: unconditional hyperparameter encoded as inactive")
            continue
        config[spec.name] = spec.from_unit(float(u))
    for spec in space.specs:
        if spec.name in config and not space.is_active(spec.name, config):
            raise OutOfRangeError(f"{spec.name}: coordinate set but condition is not satisfied")
        if spec.name not in config and space.is_active(spec.name, config):
            raise OutOfRangeError(f"{spec.name}: encoded inactive but condition is satisfied")
    return config


def encode_many(space: ConfigSpace, configs: Iterable[Configuration], strict: bool = True) -> np.ndarray:
    rows = [encode(space, c, strict=strict) for c in configs]
    return np.array(rows, dtype=float).reshape(len(rows), len(space))
