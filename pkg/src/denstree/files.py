"""File formats owned by the CLI: schema JSON, RFC-4180-subset CSV with a
required header, and model JSON files.

Discrete CSV cells hold the schema's declared string labels (or bare
integer indices when the schema declares only an arity); continuous cells
hold decimal numbers.  Columns are matched to the schema by header name,
in any order.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import DataError
from .schema import Dataset, VariableSchema, validate_dataset
from .serialize import decode_model, encode_model


def load_schema(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise DataError(f"cannot read schema file: {e}") from None
    except ValueError as e:
        raise DataError(f"schema file is not valid JSON: {e}") from None
    return VariableSchema.from_json_obj(obj)


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json_obj(), fh, indent=2)
        fh.write("\n")


def ingest_csv(path, schema):
    """Read a CSV into a Dataset, mapping labels and validating every cell."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError("CSV file is empty (header required)") from None
            rows = list(reader)
    except OSError as e:
        raise DataError(f"cannot read CSV file: {e}") from None

    header = [h.strip() for h in header]
    for name in header:
        if name not in schema.names:
            raise DataError(f"unknown column {name!r} in CSV header")
    for name in schema.names:
        if name not in header:
            raise DataError(f"schema variable {name!r} missing from CSV header")
    col_of = {name: header.index(name) for name in schema.names}

    label_maps = {}
    for col in schema.discrete_cols:
        name = schema.names[col]
        if name in schema.labels:
            label_maps[col] = {lab: i for i, lab in enumerate(schema.labels[name])}

    values = np.empty((len(rows), schema.width))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} cells, found {len(row)}")
        for col in range(schema.width):
            cell = row[col_of[schema.names[col]]].strip()
            if col in label_maps:
                if cell not in label_maps[col]:
                    raise DataError(
                        f"row {r}, column {schema.names[col]!r}: unknown label {cell!r}"
                    )
                values[r, col] = label_maps[col][cell]
            else:
                try:
                    values[r, col] = float(cell)
                except ValueError:
                    raise DataError(
                        f"row {r}, column {schema.names[col]!r}: non-numeric cell {cell!r}"
                    ) from None

    violations = validate_dataset(schema, values)
    if violations:
        v = violations[0]
        raise DataError(
            f"{len(violations)} validation violation(s); first: row {v.row}, "
            f"column {schema.names[v.col] if v.col >= 0 else '?'}: {v.reason}"
        )
    return Dataset(schema, values)


def write_csv(dataset, path):
    schema = dataset.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.names)
        for row in dataset.values:
            cells = []
            for col, x in enumerate(row):
                if schema.is_discrete(col):
                    idx = int(x)
                    name = schema.names[col]
                    cells.append(schema.labels[name][idx] if name in schema.labels else str(idx))
                else:
                    cells.append(repr(float(x)))
            writer.writerow(cells)


def load_model(path):
    try:
        with open(path, "rb") as fh:
            return decode_model(fh.read())
    except OSError as e:
        raise DataError(f"cannot read model file: {e}") from None


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(encode_model(model))
