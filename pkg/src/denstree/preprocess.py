"""Preprocessing transforms: rescaling continuous columns to [0, 1] and
jitter injection to break deterministic relationships.

Order is fixed downstream as scale -> noise -> clamp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstantColumnError
from .schema import Continuous, Dataset, Variable, VariableSchema


@dataclass(frozen=True)
class ColumnAffine:
    name: str
    offset: float  # original data minimum
    scale: float   # original data max - min

    def forward(self, x):
        return (x - self.offset) / self.scale

    def inverse(self, u):
        return self.offset + u * self.scale


@dataclass(frozen=True)
class ScaleRecord:
    """Per-variable affine maps applied by scale_to_unit; invertible exactly."""

    columns: tuple

    def by_name(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_obj(self):
        return [{"name": c.name, "offset": c.offset, "scale": c.scale} for c in self.columns]

    @classmethod
    def from_json_obj(cls, obj):
        return cls(tuple(ColumnAffine(e["name"], float(e["offset"]), float(e["scale"])) for e in obj))


def scale_to_unit(dataset):
    """Affinely map each continuous column so its data min is 0 and max is 1.

    Returns the rescaled dataset (schema bounds become [0, 1]) and the
    affine record needed to invert the map.  Raises on constant columns.
    """
    schema = dataset.schema
    values = np.array(dataset.values)
    records = []
    new_vars = []
    for col, var in enumerate(schema.variables):
        if var.is_discrete:
            new_vars.append(var)
            continue
        column = values[:, col]
        lo, hi = float(column.min()), float(column.max())
        if not (hi > lo):
            raise ConstantColumnError(var.name)
        values[:, col] = (column - lo) / (hi - lo)
        records.append(ColumnAffine(var.name, lo, hi - lo))
        new_vars.append(Variable(var.name, Continuous(0.0, 1.0)))
    # Guard against round-off drifting past the declared bounds.
    new_schema = VariableSchema(new_vars, schema.labels)
    for col in new_schema.continuous_cols:
        np.clip(values[:, col], 0.0, 1.0, out=values[:, col])
    return Dataset(new_schema, values), ScaleRecord(tuple(records))


def add_noise(dataset, kind, magnitude, seed):
    """Perturb continuous columns with i.i.d. noise, clamped to schema bounds.

    kind 'uniform' draws from [-magnitude/2, +magnitude/2]; 'gaussian' draws
    from N(0, magnitude^2).  Deterministic given the seed.
    """
    if magnitude <= 0:
        raise ConfigError("noise magnitude must be positive")
    if kind not in ("uniform", "gaussian"):
        raise ConfigError(f"unknown noise kind {kind!r}")
    schema = dataset.schema
    values = np.array(dataset.values)
    for col in schema.continuous_cols:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 7, col]))
        n = values.shape[0]
        if kind == "uniform":
            noise = rng.uniform(-magnitude / 2.0, magnitude / 2.0, size=n)
        else:
            noise = rng.normal(0.0, magnitude, size=n)
        lo, hi = schema.bounds(col)
        values[:, col] = np.clip(values[:, col] + noise, lo, hi)
    return Dataset(schema, values)
