"""Variable schemas, datasets, and bounding boxes.

A schema declares an ordered list of variables, each either discrete (with a
fixed arity, values stored as integer indices) or continuous (with global
[lo, hi] bounds).  Datasets are dense float matrices interpreted through the
schema; discrete cells hold integral values.  A Box is a sub-region of the
schema's bounding hypercube: a subrange per continuous variable and an
admissible value set per discrete variable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Discrete:
    arity: int


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float


@dataclass(frozen=True)
class Variable:
    name: str
    kind: Discrete | Continuous

    @property
    def is_discrete(self):
        return isinstance(self.kind, Discrete)


class VariableSchema:
    """Ordered variable declarations with global bounds.

    Discrete variables may carry an optional list of string labels (one per
    index) used by the CSV codec; internally values are always indices.
    """

    def __init__(self, variables, labels=None):
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DataError("variable names must be unique")
        for v in variables:
            if v.is_discrete:
                if v.kind.arity < 2:
                    raise DataError(f"variable {v.name!r}: arity must be >= 2")
            else:
                if not (v.kind.lo < v.kind.hi):
                    raise DataError(f"variable {v.name!r}: requires lo < hi")
        self.variables = variables
        self.labels = dict(labels or {})
        self._index = {v.name: i for i, v in enumerate(variables)}

    @property
    def width(self):
        return len(self.variables)

    @property
    def names(self):
        return tuple(v.name for v in self.variables)

    def index_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown variable {name!r}") from None

    def is_discrete(self, col):
        return self.variables[col].is_discrete

    def arity(self, col):
        return self.variables[col].kind.arity

    def bounds(self, col):
        k = self.variables[col].kind
        return (k.lo, k.hi)

    @property
    def discrete_cols(self):
        return tuple(i for i, v in enumerate(self.variables) if v.is_discrete)

    @property
    def continuous_cols(self):
        return tuple(i for i, v in enumerate(self.variables) if not v.is_discrete)

    def project(self, cols):
        """Schema over a subset of columns, preserving the given order."""
        vars_ = [self.variables[c] for c in cols]
        labels = {v.name: self.labels[v.name] for v in vars_ if v.name in self.labels}
        return VariableSchema(vars_, labels)

    def root_box(self):
        return Box.full(self)

    def to_json_obj(self):
        out = []
        for v in self.variables:
            if v.is_discrete:
                entry = {"name": v.name, "kind": "discrete"}
                if v.name in self.labels:
                    entry["values"] = list(self.labels[v.name])
                else:
                    entry["arity"] = v.kind.arity
            else:
                entry = {"name": v.name, "kind": "continuous", "lo": v.kind.lo, "hi": v.kind.hi}
            out.append(entry)
        return {"variables": out}

    @classmethod
    def from_json_obj(cls, obj):
        try:
            raw = obj["variables"]
        except (KeyError, TypeError):
            raise DataError("schema JSON must contain a 'variables' list") from None
        variables, labels = [], {}
        for entry in raw:
            name = entry.get("name")
            kind = entry.get("kind")
            if not name or kind not in ("discrete", "continuous"):
                raise DataError(f"bad schema entry: {entry!r}")
            if kind == "discrete":
                if "values" in entry:
                    vals = [str(s) for s in entry["values"]]
                    labels[name] = vals
                    variables.append(Variable(name, Discrete(len(vals))))
                else:
                    variables.append(Variable(name, Discrete(int(entry["arity"]))))
            else:
                variables.append(Variable(name, Continuous(float(entry["lo"]), float(entry["hi"]))))
        return cls(variables, labels)

    def content_hash(self):
        blob = json.dumps(self.to_json_obj(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, VariableSchema) and self.variables == other.variables

    def __repr__(self):
        return f"VariableSchema({list(self.names)!r})"


class Dataset:
    """Immutable rows interpreted through a schema."""

    def __init__(self, schema, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("dataset values must be a 2-D array")
        if values.shape[1] != schema.width:
            raise DataError(
                f"row width {values.shape[1]} does not match schema width {schema.width}"
            )
        values.setflags(write=False)
        self.schema = schema
        self.values = values

    @property
    def n_rows(self):
        return self.values.shape[0]

    def subset(self, idx):
        return Dataset(self.schema, self.values[idx])

    def project(self, cols):
        return Dataset(self.schema.project(cols), self.values[:, list(cols)])

    def __len__(self):
        return self.n_rows


@dataclass(frozen=True)
class Violation:
    row: int
    col: int
    reason: str


def validate_dataset(schema, dataset_or_values):
    """Check every cell against the schema; returns a list of violations.

    Violations are data, not errors: callers decide whether to raise.
    """
    values = dataset_or_values.values if isinstance(dataset_or_values, Dataset) else np.asarray(dataset_or_values, dtype=np.float64)
    out = []
    if values.ndim != 2 or values.shape[1] != schema.width:
        out.append(Violation(-1, -1, f"shape {values.shape} does not match schema width {schema.width}"))
        return out
    for col in range(schema.width):
        column = values[:, col]
        if schema.is_discrete(col):
            arity = schema.arity(col)
            bad = np.nonzero((column != np.floor(column)) | (column < 0) | (column >= arity))[0]
            for r in bad:
                out.append(Violation(int(r), col, f"discrete index {column[r]!r} outside [0, {arity})"))
        else:
            lo, hi = schema.bounds(col)
            bad = np.nonzero(~((column >= lo) & (column <= hi)))[0]
            for r in bad:
                out.append(Violation(int(r), col, f"value {column[r]!r} outside [{lo}, {hi}]"))
    out.sort(key=lambda v: (v.row, v.col))
    return out


class Box:
    """A rectangular sub-region: per-continuous subrange, per-discrete value set.

    Immutable; continuous entries are (lo, hi) tuples, discrete entries are
    sorted tuples of admissible integer values.
    """

    __slots__ = ("schema", "entries", "_lo", "_hi")

    def __init__(self, schema, entries):
        entries = tuple(entries)
        if len(entries) != schema.width:
            raise DataError("box width does not match schema")
        for col, e in enumerate(entries):
            if schema.is_discrete(col):
                if len(e) == 0:
                    raise DataError(f"box column {col}: empty admissible set")
            else:
                a, b = e
                lo, hi = schema.bounds(col)
                if not (a < b) or a < lo - 1e-12 or b > hi + 1e-12:
                    raise DataError(f"box column {col}: bad subrange {e!r}")
        self.schema = schema
        self.entries = entries
        lo = np.full(schema.width, -np.inf)
        hi = np.full(schema.width, np.inf)
        for col, e in enumerate(entries):
            if not schema.is_discrete(col):
                lo[col], hi[col] = e
        lo.setflags(write=False)
        hi.setflags(write=False)
        self._lo = lo
        self._hi = hi

    @classmethod
    def full(cls, schema):
        entries = []
        for v in schema.variables:
            if v.is_discrete:
                entries.append(tuple(range(v.kind.arity)))
            else:
                entries.append((v.kind.lo, v.kind.hi))
        return cls(schema, entries)

    def subrange(self, col):
        return self.entries[col]

    def values(self, col):
        return self.entries[col]

    def width(self, col):
        a, b = self.entries[col]
        return b - a

    def volume(self, cols=None):
        if cols is None:
            cols = self.schema.continuous_cols
        vol = 1.0
        for c in cols:
            a, b = self.entries[c]
            vol *= b - a
        return vol

    def with_entry(self, col, entry):
        entries = list(self.entries)
        entries[col] = entry
        return Box(self.schema, entries)

    def split_continuous(self, col):
        """Split at the midpoint of the current subrange; returns (low, high, mid)."""
        a, b = self.entries[col]
        mid = 0.5 * (a + b)
        return self.with_entry(col, (a, mid)), self.with_entry(col, (mid, b)), mid

    def restrict_discrete(self, col, value):
        if value not in self.entries[col]:
            raise DataError(f"value {value} not admissible in box column {col}")
        return self.with_entry(col, (value,))

    def contains_mask(self, values):
        """Vectorized closed-interval membership over an (n, width) array."""
        values = np.asarray(values)
        mask = np.ones(values.shape[0], dtype=bool)
        for col in range(self.schema.width):
            column = values[:, col]
            if self.schema.is_discrete(col):
                mask &= np.isin(column, np.asarray(self.entries[col], dtype=np.float64))
            else:
                a, b = self.entries[col]
                mask &= (column >= a) & (column <= b)
        return mask

    def contains(self, row):
        return bool(self.contains_mask(np.asarray(row, dtype=np.float64)[None, :])[0])

    def is_inside(self, other):
        """True when self is nested inside `other` (closed containment)."""
        for col in range(self.schema.width):
            if self.schema.is_discrete(col):
                if not set(self.entries[col]) <= set(other.entries[col]):
                    return False
            else:
                a, b = self.entries[col]
                oa, ob = other.entries[col]
                if a < oa - 1e-12 or b > ob + 1e-12:
                    return False
        return True

    def center(self, col):
        a, b = self.entries[col]
        return 0.5 * (a + b)

    def __eq__(self, other):
        return isinstance(other, Box) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"Box({self.entries!r})"


def unit_square_schema(names=("x1", "x2")):
    """Convenience schema: continuous variables on [0, 1]."""
    return VariableSchema([Variable(n, Continuous(0.0, 1.0)) for n in names])


def overlap_fraction(a, b, col, schema):
    """Length of intersection of two boxes along one continuous column."""
    (a0, a1), (b0, b1) = a.entries[col], b.entries[col]
    return max(0.0, min(a1, b1) - max(a0, b0))


def round_half_up(x):
    return int(math.floor(x + 0.5))
