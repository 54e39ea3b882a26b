"""Performance meta-datasets: encoded configurations plus raw objective columns."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from mohpi.configspace import ConfigSpace, Configuration, encode
from mohpi.errors import (
    DegenerateObjectiveWarning,
    EmptyDatasetError,
    MissingColumnError,
    NonFiniteObjectiveError,
    ParseError,
    ShapeMismatchError,
    ValidationError,
)


@dataclass(frozen=True)
class MinMaxNormalizer:
    min: float
    max: float

    @classmethod
    def fit(cls, values: Sequence[float]) -> "MinMaxNormalizer":
        values = np.asarray(values, dtype=float)
        return cls(float(values.min()), float(values.max()))

    @property
    def degenerate(self) -> bool:
        return not self.max > self.min

    def apply(self, v):
        """Map ``v`` onto the fitted range. Not clamped: out-of-range inputs
        extrapolate below 0 or above 1."""
        if self.degenerate:
            return np.zeros_like(v, dtype=float) if isinstance(v, np.ndarray) else 0.0
        return (v - self.min) / (self.max - self.min)


def apply_normalizer(norm: MinMaxNormalizer, v):
    return norm.apply(v)


@dataclass(frozen=True)
class ObjectiveColumn:
    """One minimized objective. Maximized metrics must be negated (or
    complemented, e.g. 1 - accuracy) before ingestion."""

    name: str
    raw: np.ndarray
    normalizer: MinMaxNormalizer

    @classmethod
    def from_values(cls, name: str, values: Sequence[float]) -> "ObjectiveColumn":
        raw = np.asarray(values, dtype=float).copy()
        if raw.ndim != 1 or raw.size == 0:
            raise ShapeMismatchError(f"objective {name!r} must be a non-empty vector")
        if not np.all(np.isfinite(raw)):
            bad = int(np.flatnonzero(~np.isfinite(raw))[0])
            raise NonFiniteObjectiveError(f"objective {name!r} has a non-finite value at row {bad}")
        raw.setflags(write=False)
        return cls(name, raw, MinMaxNormalizer.fit(raw))

    @property
    def direction(self) -> str:
        return "minimize"


def normalize(col: ObjectiveColumn) -> np.ndarray:
    if col.normalizer.degenerate:
        warnings.warn(
            f"objective {col.name!r} is constant; normalized to all zeros",
            DegenerateObjectiveWarning,
            stacklevel=2,
        )
    return col.normalizer.apply(col.raw)


@dataclass(frozen=True)
class MetaDataset:
    space: ConfigSpace
    X: np.ndarray
    objectives: Tuple[ObjectiveColumn, ...]
    configs: Tuple[Configuration, ...] = field(default=(), repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.space):
            raise ShapeMismatchError(f"X must have shape (n, {len(self.space)}), got {X.shape}")
        n = X.shape[0]
        if n < 2:
            raise EmptyDatasetError(f"a meta-dataset needs at least 2 rows, got {n}")
        if not self.objectives:
            raise ValidationError("a meta-dataset needs at least one objective")
        for col in self.objectives:
            if col.raw.shape != (n,):
                raise ShapeMismatchError(f"objective {col.name!r} has {col.raw.size} values for {n} rows")
        X = X.copy()
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "configs", tuple(self.configs))

    @classmethod
    def from_configs(cls, space: ConfigSpace, configs: Sequence[Configuration], objectives: dict) -> "MetaDataset":
        X = np.array([encode(space, c) for c in configs], dtype=float).reshape(len(configs), len(space))
        cols = tuple(ObjectiveColumn.from_values(k, v) for k, v in objectives.items())
        return cls(space, X, cols, tuple(dict(c) for c in configs))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def objective_names(self) -> List[str]:
        return [c.name for c in self.objectives]

    def normalized(self) -> np.ndarray:
        """Normalized objectives as an (n, n_objectives) matrix."""
        return np.column_stack([normalize(c) for c in self.objectives])

    def raw(self) -> np.ndarray:
        return np.column_stack([c.raw for c in self.objectives])

    def require_bi_objective(self):
        if len(self.objectives) != 2:
            raise ValidationError(f"this analysis needs exactly 2 objectives, got {len(self.objectives)}")


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_cell(spec, cell: str):
    if spec.kind == "float":
        return float(cell)
    if spec.kind == "int":
        v = float(cell)
        if not v.is_integer():
            raise ValueError(f"{cell!r} is not an integer")
        return int(v)
    if spec.kind == "boolean":
        low = cell.strip().lower()
        if low in ("true", "1", "1.0"):
            return True
        if low in ("false", "0", "0.0"):
            return False
        raise ValueError(f"{cell!r} is not a boolean")
    return cell


def read_csv(text: str, space: ConfigSpace, objective_names: Sequence[str]) -> MetaDataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDatasetError("empty CSV file") from None
    header = [h.strip() for h in header]
    col_of = {h: i for i, h in enumerate(header)}
    missing = [name for name in list(space.names) + list(objective_names) if name not in col_of]
    if missing:
        raise MissingColumnError("missing column(s): " + ", ".join(missing))

    configs: List[Configuration] = []
    rows_X = []
    obj_values: List[List[float]] = [[] for _ in objective_names]
    for r, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", row=r)
        config: Configuration = {}
        for spec in space.specs:
            cell = row[col_of[spec.name]].strip()
            if cell == "":
                continue
            try:
                config[spec.name] = _parse_cell(spec, cell)
            except ValueError as exc:
                raise ParseError(str(exc), row=r, column=spec.name) from None
        try:
            rows_X.append(encode(space, config))
        except ValidationError as exc:
            raise ParseError(str(exc), row=r) from None
        configs.append(config)
        for k, name in enumerate(objective_names):
            cell = row[col_of[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{cell!r} is not a number", row=r, column=name) from None
            if not math.isfinite(v):
                raise NonFiniteObjectiveError(f"row {r}, column {name!r}: non-finite objective {cell!r}")
            obj_values[k].append(v)
    if len(configs) < 2:
        raise EmptyDatasetError(f"a meta-dataset needs at least 2 rows, got {len(configs)}")
    X = np.array(rows_X, dtype=float)
    cols = tuple(ObjectiveColumn.from_values(name, vals) for name, vals in zip(objective_names, obj_values))
    return MetaDataset(space, X, cols, tuple(configs))


def load_csv(path, space: ConfigSpace, objective_names: Sequence[str]) -> MetaDataset:
    """Load a meta-dataset CSV; header = hyperparameter names + objective names."""
    text = Path(path).read_text(encoding="utf-8")
    return read_csv(text, space, objective_names)


def to_csv_text(ds: MetaDataset) -> str:
    if not ds.configs:
        raise ValidationError("dataset has no stored configurations to serialize")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.space.names + ds.objective_names)
    for i, config in enumerate(ds.configs):
        cells = [_format_value(config.get(name)) for name in ds.space.names]
        cells += [_format_value(float(col.raw[i])) for col in ds.objectives]
        writer.writerow(cells)
    return buf.getvalue()


def save_csv(ds: MetaDataset, path) -> None:
    Path(path).write_text(to_csv_text(ds), encoding="utf-8")
