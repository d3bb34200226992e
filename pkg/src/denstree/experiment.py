"""Cross-validated benchmark harness: run a set of algorithms over shared
folds, report mean test log-likelihood with 95% confidence intervals,
wall-clock learn/eval times, visited-leaf counters, and best-row flags
from paired t-tests.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bayesnet import (
    SearchConfig,
    fit_gaussian_mixture_baseline,
    joint_log_likelihood,
    learn_structure,
    parameterize,
)
from .conditional import (
    CondLearnConfig,
    ConditionalSpec,
    EvalCounters,
    learn_conditional,
    smooth_conditional,
)
from .errors import ConfigError
from .preprocess import add_noise, scale_to_unit
from .splitting import SplitPlan, kfold_partition
from .tree import derive_seed

CONDITIONAL_MODES = ("cart", "stratified", "joint", "approx")
ALL_MODES = CONDITIONAL_MODES + ("bnet", "gmm-baseline")
_CART_FAMILIES = ("gauss", "linreg")
_DENSITY_FAMILIES = ("uniform", "gauss", "linear", "multilinear")


@dataclass(frozen=True)
class AlgorithmSpec:
    label: str
    mode: str
    leaf_family: str = "uniform"

    def __post_init__(self):
        if self.mode not in ALL_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "cart" and self.leaf_family not in _CART_FAMILIES:
            raise ConfigError("cart supports leaf families: " + ", ".join(_CART_FAMILIES))
        if self.mode in ("stratified", "joint", "approx") and self.leaf_family not in _DENSITY_FAMILIES:
            raise ConfigError(f"{self.mode} supports leaf families: " + ", ".join(_DENSITY_FAMILIES))


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple
    folds: int = 10
    seed: int = 0
    scale: bool = False
    noise: str | None = None
    noise_mag: float = 0.001
    epsilon: float = 1e-3
    child: int | None = None
    min_points: int = 10
    timing: bool = True
    counters: bool = True
    gmm_k_grid: tuple = tuple(range(1, 9))
    search: SearchConfig | None = None

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not self.algorithms:
            raise ConfigError("at least one algorithm required")


@dataclass
class ReportRow:
    label: str
    mean_ll: float
    ci95: float
    learn_s: float | None
    eval_s: float | None
    best: bool
    visited_leaves: float | None
    fold_lls: tuple = field(default_factory=tuple, repr=False)


def _conditional_spec(schema, config):
    child = config.child if config.child is not None else schema.width - 1
    parents = tuple(c for c in range(schema.width) if c != child)
    return ConditionalSpec(child, parents)


def _run_fold(algo, train, test, spec, config, seed):
    counters = EvalCounters() if config.counters else None
    t0 = time.perf_counter()
    if algo.mode in CONDITIONAL_MODES:
        cfg = CondLearnConfig(leaf_family=algo.leaf_family, min_points=config.min_points, seed=seed)
        model = smooth_conditional(learn_conditional(train, spec, algo.mode, cfg), config.epsilon)
        t1 = time.perf_counter()
        ll = float(np.sum(model.cond_log_density(test.values, counters)))
    elif algo.mode == "bnet":
        search = config.search if config.search is not None else SearchConfig(seed=seed, epsilon=config.epsilon)
        structure = learn_structure(train, search)
        model = parameterize(structure, train, search.final, config.epsilon, seed=derive_seed(seed, 7))
        t1 = time.perf_counter()
        ll = joint_log_likelihood(model, test)
    else:  # gmm-baseline
        model = fit_gaussian_mixture_baseline(train, config.gmm_k_grid, seed)
        t1 = time.perf_counter()
        ll = joint_log_likelihood(model, test)
    t2 = time.perf_counter()
    visited = counters.mean_visited() if counters is not None else None
    return ll, t1 - t0, t2 - t1, visited


def apply_preprocessing(dataset, config):
    if config.scale:
        dataset, _ = scale_to_unit(dataset)
    if config.noise is not None:
        dataset = add_noise(dataset, config.noise, config.noise_mag, derive_seed(config.seed, 11))
    return dataset


def run_experiment(dataset, config):
    """k-fold cross-validated comparison; every algorithm sees the same folds."""
    dataset = apply_preprocessing(dataset, config)
    plan = SplitPlan(seed=derive_seed(config.seed, 13), folds=config.folds)
    folds = kfold_partition(dataset, plan)
    spec = _conditional_spec(dataset.schema, config)

    rows = []
    for ai, algo in enumerate(config.algorithms):
        lls, learns, evals, visits = [], [], [], []
        for fi, (train, test) in enumerate(folds):
            ll, tl, te, visited = _run_fold(algo, train, test, spec, config, derive_seed(config.seed, 17, ai, fi))
            lls.append(ll)
            learns.append(tl)
            evals.append(te)
            if visited is not None:
                visits.append(visited)
        lls = np.asarray(lls)
        k = len(lls)
        ci = float(stats.t.ppf(0.975, k - 1) * lls.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        rows.append(
            ReportRow(
                label=algo.label,
                mean_ll=float(lls.mean()),
                ci95=ci,
                learn_s=float(np.mean(learns)) if config.timing else None,
                eval_s=float(np.mean(evals)) if config.timing else None,
                best=False,
                visited_leaves=float(np.mean(visits)) if visits else None,
                fold_lls=tuple(lls),
            )
        )
    _mark_best(rows)
    return rows


def _mark_best(rows):
    """Flag the best mean row, plus every row not significantly worse than it
    under a paired one-sided t-test at 95%."""
    if not rows:
        return
    best_i = max(range(len(rows)), key=lambda i: rows[i].mean_ll)
    best = np.asarray(rows[best_i].fold_lls)
    for i, row in enumerate(rows):
        if i == best_i:
            row.best = True
            continue
        diff = best - np.asarray(row.fold_lls)
        sd = diff.std(ddof=1) if len(diff) > 1 else 0.0
        if sd == 0.0:
            row.best = bool(diff.mean() <= 0.0)
            continue
        t = diff.mean() / (sd / math.sqrt(len(diff)))
        crit = stats.t.ppf(0.95, len(diff) - 1)
        row.best = bool(t <= crit)


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def format_report(rows, fmt="tsv"):
    """Render rows as TSV (fixed column order) or a JSON mirror; bytes out."""
    if fmt == "tsv":
        lines = ["label\tmean_ll\tci95\tlearn_s\teval_s\tbest_flag"]
        for r in rows:
            lines.append(
                "\t".join(
                    [r.label, _fmt(r.mean_ll), _fmt(r.ci95), _fmt(r.learn_s), _fmt(r.eval_s), "1" if r.best else "0"]
                )
            )
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "json":
        obj = [
            {
                "label": r.label,
                "mean_ll": r.mean_ll,
                "ci95": r.ci95,
                "learn_s": r.learn_s,
                "eval_s": r.eval_s,
                "best_flag": r.best,
                "visited_leaves": r.visited_leaves,
            }
            for r in rows
        ]
        return (json.dumps(obj, indent=2) + "\n").encode("utf-8")
    raise ConfigError(f"unknown report format {fmt!r}")
