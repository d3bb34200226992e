"""Factored joint models P(X) = prod_i P(X_i | parents_i) and the tiered
hill-climbing structure learner.

The search uses cheap trees to rank candidate arc changes, medium trees to
accept or reject the top-ranked move against a dedicated validation split,
and an expensive final tier to parameterize the chosen structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from graphlib import CycleError, TopologicalSorter

import numpy as np

from .conditional import (
    CondLearnConfig,
    ConditionalSpec,
    SmoothedConditional,
    learn_conditional,
    smooth_conditional,
)
from .errors import ConfigError, DataError
from .leaves import EmFitConfig
from .schema import Dataset
from .splitting import holdout_indices
from .tree import derive_seed

_TINY = 1e-300


class NetworkStructure:
    """Directed acyclic parent sets over the schema's variables."""

    def __init__(self, n_vars, parent_sets=None):
        self.n_vars = n_vars
        if parent_sets is None:
            parent_sets = [()] * n_vars
        self.parent_sets = tuple(tuple(sorted(p)) for p in parent_sets)
        if len(self.parent_sets) != n_vars:
            raise ConfigError("parent_sets length must match variable count")
        self.order = self._toposort()

    def _toposort(self):
        ts = TopologicalSorter({v: set(self.parent_sets[v]) for v in range(self.n_vars)})
        try:
            return tuple(ts.static_order())
        except CycleError:
            raise ConfigError("structure contains a cycle") from None

    def parents(self, v):
        return self.parent_sets[v]

    def arcs(self):
        return [(u, v) for v in range(self.n_vars) for u in self.parent_sets[v]]

    def with_arc(self, u, v):
        ps = list(self.parent_sets)
        ps[v] = tuple(sorted(set(ps[v]) | {u}))
        return NetworkStructure(self.n_vars, ps)

    def without_arc(self, u, v):
        ps = list(self.parent_sets)
        ps[v] = tuple(x for x in ps[v] if x != u)
        return NetworkStructure(self.n_vars, ps)

    def would_cycle(self, u, v):
        """True if adding u -> v creates a cycle (i.e. u is reachable from v)."""
        seen = {v}
        stack = [v]
        children = {w: [] for w in range(self.n_vars)}
        for (a, b) in self.arcs():
            children[a].append(b)
        while stack:
            w = stack.pop()
            if w == u:
                return True
            for nxt in children[w]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    def to_json_obj(self, schema):
        return {
            schema.names[v]: [schema.names[u] for u in self.parent_sets[v]]
            for v in range(self.n_vars)
        }

    @classmethod
    def from_json_obj(cls, obj, schema):
        ps = [()] * schema.width
        for name, parents in obj.items():
            v = schema.index_of(name)
            ps[v] = tuple(schema.index_of(p) for p in parents)
        return cls(schema.width, ps)

    def __eq__(self, other):
        return isinstance(other, NetworkStructure) and self.parent_sets == other.parent_sets

    def __repr__(self):
        return f"NetworkStructure({self.parent_sets!r})"


@dataclass(frozen=True)
class TierConfig:
    """One quality tier of the search: which estimator at what budget."""

    mode: str = "cart"
    leaf_family: str = "gauss"
    min_points: int = 10
    row_cap: int | None = None
    em: EmFitConfig = field(default_factory=EmFitConfig)

    def cond_config(self, seed):
        return CondLearnConfig(
            leaf_family=self.leaf_family,
            min_points=self.min_points,
            seed=seed,
            em=self.em,
            row_cap=self.row_cap,
        )


@dataclass(frozen=True)
class SearchConfig:
    cheap: TierConfig = field(default_factory=lambda: TierConfig("cart", "gauss", min_points=25, row_cap=1500))
    medium: TierConfig = field(default_factory=lambda: TierConfig("approx", "linear", row_cap=4000))
    final: TierConfig = field(default_factory=lambda: TierConfig("approx", "multilinear"))
    max_parents: int = 3
    moves_per_iteration: int = 1
    max_iterations: int = 50
    rescore_period: int = 5
    validation_fraction: float = 0.2
    epsilon: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_parents < 1 or self.max_iterations < 1 or self.rescore_period < 1:
            raise ConfigError("search budgets must be positive")
        if self.moves_per_iteration < 1:
            raise ConfigError("moves_per_iteration must be positive")


class FactoredModel:
    """Structure plus one conditional model per variable."""

    def __init__(self, schema, structure, conditionals, epsilon=0.0):
        if len(conditionals) != schema.width:
            raise ConfigError("need one conditional per variable")
        self.schema = schema
        self.structure = structure
        self.conditionals = tuple(conditionals)
        self.epsilon = epsilon

    def per_variable_log_likelihood(self, points):
        x = np.asarray(points, dtype=np.float64)
        return [np.asarray(self.conditionals[v].cond_log_density(x)) for v in range(self.schema.width)]

    def log_density(self, points):
        x = np.asarray(points, dtype=np.float64)
        out = np.zeros(x.shape[0])
        for v in range(self.schema.width):
            out += self.conditionals[v].cond_log_density(x)
        return out

    def sample(self, rng, n):
        out = np.zeros((n, self.schema.width))
        for i in range(n):
            for v in self.structure.order:
                out[i, v] = self.conditionals[v].cond_sample(out[i], rng)
        return out


def joint_log_likelihood(model, dataset):
    """Total log-likelihood of a dataset under a factored (or any
    log_density-bearing) model."""
    return float(np.sum(model.log_density(dataset.values)))


def _learn_node_conditional(dataset, child, parents, tier, seed, epsilon):
    spec = ConditionalSpec(child, tuple(parents))
    model = learn_conditional(dataset, spec, tier.mode, tier.cond_config(seed))
    return smooth_conditional(model, epsilon)


def _holdout_ll(train, holdout, child, parents, tier, seed, epsilon):
    cond = _learn_node_conditional(train, child, parents, tier, seed, epsilon)
    return float(np.sum(cond.cond_log_density(holdout.values)))


def legal_moves(structure, max_parents):
    """All acyclicity- and fan-in-respecting arc additions and removals."""
    moves = []
    n = structure.n_vars
    for v in range(n):
        ps = set(structure.parents(v))
        for u in range(n):
            if u == v:
                continue
            if u in ps:
                moves.append(("remove", u, v))
            elif len(ps) < max_parents and not structure.would_cycle(u, v):
                moves.append(("add", u, v))
    return moves


def score_arc_candidates(dataset, structure, cheap_tier, config):
    """Rank candidate moves by a cheap-tier holdout estimate of the change
    in the affected child's conditional log-likelihood."""
    seed = derive_seed(config.seed, 31)
    tr_idx, ho_idx = holdout_indices(dataset.n_rows, 0.25, seed)
    train, hold = dataset.subset(tr_idx), dataset.subset(ho_idx)
    baselines = {}

    def baseline(v):
        if v not in baselines:
            baselines[v] = _holdout_ll(
                train, hold, v, structure.parents(v), cheap_tier, derive_seed(seed, v), config.epsilon
            )
        return baselines[v]

    scored = []
    for move in legal_moves(structure, config.max_parents):
        op, u, v = move
        new_parents = (
            tuple(sorted(set(structure.parents(v)) | {u}))
            if op == "add"
            else tuple(x for x in structure.parents(v) if x != u)
        )
        # Same learner seed as the baseline, so a structurally inert change
        # produces an exactly-zero estimate (common random numbers).
        ll = _holdout_ll(train, hold, v, new_parents, cheap_tier, derive_seed(seed, v), config.epsilon)
        scored.append((move, ll - baseline(v)))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def learn_structure(dataset, config):
    """Heuristic steepest-ascent hill climbing with tiered scoring."""
    schema = dataset.schema
    if schema.width < 2:
        raise DataError("structure learning needs at least 2 variables")
    seed = config.seed
    tr_idx, va_idx = holdout_indices(dataset.n_rows, config.validation_fraction, derive_seed(seed, 41))
    train, valid = dataset.subset(tr_idx), dataset.subset(va_idx)

    contrib_cache = {}

    def contribution(child, parents):
        key = (child, tuple(parents))
        if key not in contrib_cache:
            contrib_cache[key] = _holdout_ll(
                train, valid, child, parents, config.medium, derive_seed(seed, 43, child), config.epsilon
            )
        return contrib_cache[key]

    structure = NetworkStructure(schema.width)
    contribs = {v: contribution(v, ()) for v in range(schema.width)}
    best_ll = sum(contribs.values())

    ranking = score_arc_candidates(train, structure, config.cheap, config)
    tried = set()
    accepted_since_rescore = 0

    def refresh():
        nonlocal ranking, tried, accepted_since_rescore
        ranking = score_arc_candidates(train, structure, config.cheap, config)
        tried = set()
        accepted_since_rescore = 0

    history = [best_ll]
    for _ in range(config.max_iterations):
        batch = []
        for move, est in ranking:
            if est <= 0.0 or move in tried:  # only promising moves get evaluated
                continue
            op, u, v = move
            if op == "add":
                if u in structure.parents(v) or len(structure.parents(v)) >= config.max_parents:
                    continue
                if structure.would_cycle(u, v):
                    continue
            else:
                if u not in structure.parents(v):
                    continue
            batch.append(move)
            if len(batch) >= config.moves_per_iteration:
                break
        if not batch:
            if accepted_since_rescore > 0:
                refresh()
                continue
            break
        best_move = None
        best_gain = 0.0
        for move in batch:
            tried.add(move)
            op, u, v = move
            new_parents = (
                tuple(sorted(set(structure.parents(v)) | {u}))
                if op == "add"
                else tuple(x for x in structure.parents(v) if x != u)
            )
            gain = contribution(v, new_parents) - contribs[v]
            if gain > best_gain:
                best_gain = gain
                best_move = (move, new_parents)
        if best_move is not None:
            (op, u, v), new_parents = best_move
            structure = structure.with_arc(u, v) if op == "add" else structure.without_arc(u, v)
            contribs[v] = contribution(v, new_parents)
            best_ll = sum(contribs.values())
            history.append(best_ll)
            accepted_since_rescore += 1
            if accepted_since_rescore >= config.rescore_period:
                refresh()
    structure.validation_history = history
    return structure


def parameterize(structure, dataset, tier, epsilon=1e-3, seed=0):
    """Fit every node's conditional with the final tier and smooth by eps."""
    schema = dataset.schema
    conditionals = []
    for v in range(schema.width):
        conditionals.append(
            _learn_node_conditional(dataset, v, structure.parents(v), tier, derive_seed(seed, 47, v), epsilon)
        )
    return FactoredModel(schema, structure, conditionals, epsilon)


def sample_network(model, n, rng):
    """Ancestral sampling in topological order."""
    return Dataset(model.schema, model.sample(rng, n))


# ---------------------------------------------------------------------------
# global mixture baseline (diagonal Gaussians x per-component multinomials)


class GaussianMixtureModel:
    """Diagonal-covariance Gaussian mixture over continuous columns with
    per-component multinomials over discrete columns."""

    def __init__(self, schema, weights, means, stds, disc_probs, ll_trace=None):
        self.schema = schema
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        self.disc_probs = {c: np.asarray(p, dtype=np.float64) for c, p in disc_probs.items()}
        self.ll_trace = ll_trace

    @property
    def k(self):
        return len(self.weights)

    def _component_logpdf(self, x):
        cont = self.schema.continuous_cols
        n = x.shape[0]
        out = np.tile(np.log(np.maximum(self.weights, _TINY)), (n, 1))
        for p, c in enumerate(cont):
            t = (x[:, c, None] - self.means[None, :, p]) / self.stds[None, :, p]
            out += -0.5 * t * t - np.log(self.stds[None, :, p]) - 0.5 * math.log(2 * math.pi)
        for c, probs in self.disc_probs.items():
            vals = x[:, c].astype(np.int64)
            out += np.log(np.maximum(probs[:, vals].T, _TINY))
        return out

    def log_density(self, points):
        x = np.asarray(points, dtype=np.float64)
        comp = self._component_logpdf(x)
        m = comp.max(axis=1)
        return m + np.log(np.exp(comp - m[:, None]).sum(axis=1))


def fit_gmm(dataset, k, seed, max_iters=200, rel_tol=1e-7, floor_scale=1e-3):
    """EM for a fixed component count; deterministic given the seed."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    schema = dataset.schema
    x = dataset.values
    n = x.shape[0]
    cont = schema.continuous_cols
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 53, k]))
    floors = np.array([(floor_scale * (schema.bounds(c)[1] - schema.bounds(c)[0])) ** 2 for c in cont])

    picks = rng.choice(n, size=k, replace=n < k)
    means = x[np.sort(picks)][:, list(cont)].astype(np.float64)
    base_std = np.maximum(x[:, list(cont)].std(axis=0), np.sqrt(floors))
    stds = np.tile(base_std, (k, 1))
    weights = np.full(k, 1.0 / k)
    disc_probs = {}
    for c in schema.discrete_cols:
        arity = schema.arity(c)
        counts = np.bincount(x[:, c].astype(np.int64), minlength=arity) + 1.0
        base = counts / counts.sum()
        jitter = rng.uniform(0.9, 1.1, size=(k, arity))
        p = base[None, :] * jitter
        disc_probs[c] = p / p.sum(axis=1, keepdims=True)

    model = GaussianMixtureModel(schema, weights, means, stds, disc_probs)
    trace = []
    prev = -np.inf
    for _ in range(max_iters):
        comp = model._component_logpdf(x)
        m = comp.max(axis=1)
        lse = m + np.log(np.exp(comp - m[:, None]).sum(axis=1))
        ll = float(lse.sum())
        trace.append(ll)
        resp = np.exp(comp - lse[:, None])
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / nk.sum()
        xc = x[:, list(cont)]
        means = (resp.T @ xc) / nk[:, None]
        var = (resp.T @ (xc**2)) / nk[:, None] - means**2
        stds = np.sqrt(np.maximum(var, floors[None, :]))
        disc_probs = {}
        for c in schema.discrete_cols:
            arity = schema.arity(c)
            onehot = np.eye(arity)[x[:, c].astype(np.int64)]
            p = resp.T @ onehot + 0.5
            disc_probs[c] = p / p.sum(axis=1, keepdims=True)
        model = GaussianMixtureModel(schema, weights, means, stds, disc_probs)
        if ll - prev < rel_tol * max(1.0, abs(ll)) and len(trace) > 1:
            break
        prev = ll
    model.ll_trace = np.asarray(trace)
    return model


def fit_gaussian_mixture_baseline(dataset, k_grid, seed):
    """Pick the component count by validation log-likelihood, then refit on
    all rows.  A stand-in for a full Bayesian mixture-selection system."""
    if isinstance(k_grid, int):
        k_grid = (k_grid,)
    k_grid = tuple(k_grid)
    tr_idx, va_idx = holdout_indices(dataset.n_rows, 0.2, derive_seed(seed, 59))
    train, valid = dataset.subset(tr_idx), dataset.subset(va_idx)
    best_k, best_ll = None, -np.inf
    for k in k_grid:
        m = fit_gmm(train, k, derive_seed(seed, 61, k))
        ll = float(np.sum(m.log_density(valid.values)))
        if ll > best_ll:
            best_k, best_ll = k, ll
    model = fit_gmm(dataset, best_k, derive_seed(seed, 61, best_k))
    model.selected_k = best_k
    return model
