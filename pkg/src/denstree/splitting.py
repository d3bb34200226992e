"""Deterministic dataset partitioning: holdout splits and k-fold assignment.

Row keys come from a counter-based mix of (seed, row index), so the
assignment of any row is independent of how or where the others are
processed; repeated calls are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateSplitError
from .schema import round_half_up


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    holdout_fraction: float = 0.3
    folds: int = 10

    def __post_init__(self):
        if not (0.0 < self.holdout_fraction < 1.0):
            raise DataError("holdout_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise DataError("folds must be >= 2")


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x):
    # splitmix64 finalizer; a stateless counter-based hash.
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


def row_keys(seed, n):
    """A pseudo-random key in [0, 1) per row index, keyed on (seed, index).

    The i-th key is the splitmix64 output at state seed + (i + 1) * gamma,
    so any single row's key depends only on (seed, i).
    """
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        mixed = _mix64(np.uint64(np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF)) + _GOLDEN * idx)
    return mixed.astype(np.float64) / 2.0**64


def holdout_indices(n, fraction, seed):
    """Deterministic (train_idx, holdout_idx) partition of range(n)."""
    if n == 0:
        raise DataError("cannot split an empty dataset")
    n_hold = round_half_up(fraction * n)
    if n_hold == 0 or n_hold == n:
        raise DegenerateSplitError(
            f"fraction {fraction} of {n} rows leaves an empty side ({n - n_hold} train, {n_hold} holdout)"
        )
    order = np.argsort(row_keys(seed, n), kind="stable")
    hold = np.sort(order[:n_hold])
    train = np.sort(order[n_hold:])
    return train, hold


def split_holdout(dataset, plan):
    """Split a dataset into (train, holdout) per the plan."""
    train, hold = holdout_indices(dataset.n_rows, plan.holdout_fraction, plan.seed)
    return dataset.subset(train), dataset.subset(hold)


def kfold_indices(n, folds, seed):
    """List of (train_idx, test_idx) pairs; test sets partition range(n)."""
    if folds > n:
        raise DataError(f"cannot make {folds} folds from {n} rows")
    order = np.argsort(row_keys(seed, n), kind="stable")
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % folds
    pairs = []
    for f in range(folds):
        test = np.nonzero(assignment == f)[0]
        train = np.nonzero(assignment != f)[0]
        pairs.append((train, test))
    return pairs


def kfold_partition(dataset, plan):
    """K-fold cross-validation pairs of (train, test) datasets."""
    pairs = kfold_indices(dataset.n_rows, plan.folds, plan.seed)
    return [(dataset.subset(tr), dataset.subset(te)) for tr, te in pairs]
