"""Density-tree structure and the generic greedy grower / pruner.

One grower serves all tree families.  At each node it builds a depth-1
stump per allowed branch variable, scores each stump by the log-likelihood
of a per-node holdout subset, and branches on the best stump only if it
beats a single refitted leaf.  Continuous branches always split at the
midpoint of the node's current subrange; discrete branches get one child
per admissible value.  Growth stops below min_points.

Probability-mass bookkeeping: a branch carries per-child mass shares when
the branch variable is one the tree assigns mass over (all variables for
joint trees, only the child variable for conditional trees).  A leaf's mass
is the product of shares along its path, so conditional trees end up with
conditional masses that sum to 1 within each child-only subtree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, InternalError
from .leaves import (
    DiagGaussianPart,
    EmFitConfig,
    LeafDistribution,
    LinRegGaussianPart,
    fit_diag_gaussian,
    fit_linear_interp_em,
    fit_linreg_gaussian,
    fit_multilinear_em,
    fit_multinomial,
)
from .schema import round_half_up
from .splitting import holdout_indices, row_keys

LEAF_FAMILIES = ("uniform", "gauss", "linreg", "linear", "multilinear")


class Leaf:
    __slots__ = ("leaf_id", "box", "mass", "count", "dist")

    def __init__(self, box, dist, count, mass=1.0, leaf_id=-1):
        self.leaf_id = leaf_id
        self.box = box
        self.mass = mass
        self.count = count
        self.dist = dist


class ContinuousBranch:
    __slots__ = ("var", "split", "low", "high", "shares")

    def __init__(self, var, split, low, high, shares=None):
        self.var = var
        self.split = split
        self.low = low
        self.high = high
        self.shares = shares

    @property
    def children(self):
        return (self.low, self.high)


class DiscreteBranch:
    __slots__ = ("var", "values", "children", "shares")

    def __init__(self, var, values, children, shares=None):
        self.var = var
        self.values = tuple(values)
        self.children = tuple(children)
        self.shares = shares


def is_leaf(node):
    return isinstance(node, Leaf)


def iter_leaves(node):
    stack = [node]
    while stack:
        n = stack.pop()
        if is_leaf(n):
            yield n
        elif isinstance(n, ContinuousBranch):
            stack.append(n.high)
            stack.append(n.low)
        else:
            stack.extend(reversed(n.children))


class DensityTree:
    """A grown tree: root node, root box, and an indexed leaf list."""

    def __init__(self, root, root_box):
        self.root = root
        self.root_box = root_box
        self.leaves = []
        self._finalize()

    def _finalize(self):
        self.leaves = []

        def visit(node, log_mass):
            if is_leaf(node):
                node.leaf_id = len(self.leaves)
                node.mass = math.exp(log_mass)
                self.leaves.append(node)
                return
            shares = node.shares
            for k, child in enumerate(node.children):
                step = math.log(shares[k]) if shares is not None and shares[k] > 0.0 else (-math.inf if shares is not None else 0.0)
                visit(child, log_mass + step)

        visit(self.root, 0.0)

    @property
    def n_leaves(self):
        return len(self.leaves)

    def descend(self, row):
        node = self.root
        while not is_leaf(node):
            node = node.children[_route_one(node, row)]
        return node

    def log_density(self, points):
        """log(mass * box-normalized leaf density) at each point; -inf outside."""
        x, single = _as_rows(points)
        out = np.full(x.shape[0], -np.inf)
        inside = self.root_box.contains_mask(x)
        idx = np.nonzero(inside)[0]
        _walk_logdens(self.root, x, idx, 0.0, out)
        return float(out[0]) if single else out

    def sample(self, rng, n=1):
        masses = np.array([l.mass for l in self.leaves])
        picks = rng.choice(len(self.leaves), size=n, p=masses / masses.sum())
        out = np.full((n, self.root_box.schema.width), np.nan)
        for leaf_id in np.unique(picks):
            rows = np.nonzero(picks == leaf_id)[0]
            leaf = self.leaves[leaf_id]
            out[rows] = leaf.dist.sample(rng, leaf.box, len(rows))
        return out


def _as_rows(points):
    x = np.asarray(points, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _route_one(branch, row):
    if isinstance(branch, ContinuousBranch):
        return 0 if row[branch.var] <= branch.split else 1
    v = row[branch.var]
    for k, val in enumerate(branch.values):
        if val == v:
            return k
    raise DataError(f"value {v!r} not admissible at branch on var {branch.var}")


def _route_masks(branch, x, idx):
    """Partition row indices idx among the branch's children."""
    col = x[idx, branch.var]
    if isinstance(branch, ContinuousBranch):
        low = col <= branch.split
        return [idx[low], idx[~low]]
    return [idx[col == v] for v in branch.values]


def _walk_logdens(node, x, idx, acc, out):
    if len(idx) == 0:
        return
    if is_leaf(node):
        out[idx] = acc + node.dist.log_density(x[idx], node.box)
        return
    parts = _route_masks(node, x, idx)
    for k, child in enumerate(node.children):
        step = math.log(max(node.shares[k], 1e-300)) if node.shares is not None else 0.0
        _walk_logdens(child, x, parts[k], acc + step, out)


def subtree_log_density(node, x, idx=None):
    """Walker with mass relative to `node` (used by pruning and builders)."""
    x = np.asarray(x, dtype=np.float64)
    if idx is None:
        idx = np.arange(x.shape[0])
    out = np.full(x.shape[0], -np.inf)
    _walk_logdens(node, x, idx, 0.0, out)
    return out[idx]


# ---------------------------------------------------------------------------
# configuration and leaf builders


@dataclass(frozen=True)
class GrowConfig:
    """Policy for one grower invocation (frame-local column indices).

    Growth branches on the stump-holdout argmax variable at every node until
    min_points; the separate pruning pass is what shrinks the tree.  Setting
    stop_on_no_gain additionally stops early when no stump beats a single
    refitted leaf (cheaper, but blind to structure that only pays off two
    levels down).
    """

    branch_vars: tuple
    score_target: str = "joint"  # 'joint' or 'conditional'
    child: int | None = None
    leaf_family: str = "uniform"
    min_points: int = 10
    stump_fraction: float = 0.3
    prune_fraction: float = 0.3
    pseudo_count: float = 1.0
    floor_scale: float = 1e-3
    max_depth: int = 50
    stop_on_no_gain: bool = False
    seed: int = 0
    em: EmFitConfig = field(default_factory=EmFitConfig)

    def __post_init__(self):
        if self.min_points < 2:
            raise DataError("min_points must be >= 2")
        if self.score_target not in ("joint", "conditional"):
            raise DataError(f"unknown score target {self.score_target!r}")
        if self.score_target == "conditional" and self.child is None:
            raise DataError("conditional target requires a child column")

    def mass_applies(self, var):
        return self.score_target == "joint" or var == self.child


def derive_seed(base, *parts):
    """Stable child seed from a base seed and a path of small integers."""
    mask = (1 << 63) - 1
    entropy = [int(base) & mask] + [int(p) & mask for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


class DistLeafBuilder:
    """Fits a LeafDistribution over a fixed set of modeled columns.

    model_cols limits what the leaf covers: all frame columns for joint
    trees, only the child for conditional leaves.  linreg_parents names the
    continuous columns a regression mean may use.
    """

    def __init__(self, schema, family, model_cols, config, linreg_parents=()):
        if family not in LEAF_FAMILIES:
            raise DataError(f"unknown leaf family {family!r}")
        self.schema = schema
        self.family = family
        self.model_cols = tuple(model_cols)
        self.config = config
        self.linreg_parents = tuple(linreg_parents)
        self.disc_cols = tuple(c for c in self.model_cols if schema.is_discrete(c))
        self.cont_cols = tuple(c for c in self.model_cols if not schema.is_discrete(c))

    @property
    def prune_vars(self):
        return None  # pruning may replace any internal node

    def fit(self, rows, box, seed):
        cfg = self.config
        disc_values = {}
        disc_probs = {}
        for c in self.disc_cols:
            admissible = box.values(c)
            disc_values[c] = admissible
            disc_probs[c] = fit_multinomial(rows[:, c] if len(rows) else [], admissible, cfg.pseudo_count)
        cont = None
        trace = None
        if self.cont_cols:
            cont, trace = self._fit_cont(rows, box, seed)
        return LeafDistribution(disc_values, disc_probs, cont, em_trace=trace)

    def _fit_cont(self, rows, box, seed):
        cfg = self.config
        dims = self.cont_cols
        if self.family == "uniform":
            from .leaves import UniformPart

            return UniformPart(dims), None
        if self.family == "linear":
            return fit_linear_interp_em(rows, box, cfg.em.with_seed(seed), dims)
        if self.family == "multilinear":
            return fit_multilinear_em(rows, box, cfg.em.with_seed(seed), dims)
        if self.family == "linreg":
            if len(dims) != 1:
                raise DataError("regression leaves model a single child column")
            child = dims[0]
            if len(self.linreg_parents) and len(rows) >= len(self.linreg_parents) + 2:
                return fit_linreg_gaussian(rows, child, self.linreg_parents, box, cfg.floor_scale), None
            return self._gaussian(rows, box, dims), None
        if self.family == "gauss":
            return self._gaussian(rows, box, dims), None
        raise InternalError(f"unhandled family {self.family}")

    def _gaussian(self, rows, box, dims):
        if len(rows) >= 2:
            return fit_diag_gaussian(rows, box, dims, self.config.floor_scale)
        # Too few points for moments: box-center mean with floored spread.
        mean = np.array([rows[0, c] if len(rows) else box.center(c) for c in dims])
        std = np.array(
            [max(math.sqrt((self.config.floor_scale * (box.schema.bounds(c)[1] - box.schema.bounds(c)[0])) ** 2), 1e-12) for c in dims]
        )
        return DiagGaussianPart(dims, mean, std)

    def as_node(self, unit, box, count):
        return Leaf(box, unit, count)

    def log_density(self, unit, rows, box):
        return unit.log_density(rows, box)


class SubtreeBuilder:
    """Outer-grower builder whose 'leaf' is a learned child-only subtree.

    Realizes stratified learning: where a simpler grower would fit a single
    leaf distribution, this learns (and internally prunes) a density tree
    over the child variable within the region.
    """

    def __init__(self, schema, child, leaf_family, config):
        self.schema = schema
        self.child = child
        self.inner_config = replace(
            config,
            branch_vars=(child,),
            score_target="joint",
            child=None,
            leaf_family=leaf_family,
        )
        self.inner_builder = DistLeafBuilder(schema, leaf_family, (child,), self.inner_config)
        self._prune_vars = tuple(v for v in config.branch_vars)

    @property
    def prune_vars(self):
        return self._prune_vars

    def fit(self, rows, box, seed):
        cfg = replace(self.inner_config, seed=seed)
        return learn_tree_node(rows, box, cfg, self.inner_builder)

    def as_node(self, unit, box, count):
        return unit  # already a node

    def log_density(self, unit, rows, box):
        return subtree_log_density(unit, rows)


def _unit_score(builder, unit, rows, box):
    if isinstance(unit, LeafDistribution):
        return builder.log_density(unit, rows, box) if len(rows) else np.zeros(0)
    return subtree_log_density(unit, rows)


# ---------------------------------------------------------------------------
# growing


def _splittable(box, var, schema):
    if schema.is_discrete(var):
        return len(box.values(var)) >= 2
    a, b = box.subrange(var)
    lo, hi = schema.bounds(var)
    return (b - a) > 1e-9 * (hi - lo)


def _branch_partition(box, var, schema):
    """Child boxes plus a routing function for the candidate branch."""
    if schema.is_discrete(var):
        values = box.values(var)
        boxes = [box.restrict_discrete(var, v) for v in values]

        def route(x, idx):
            col = x[idx, var]
            return [idx[col == v] for v in values]

        return boxes, route, {"kind": "d", "values": values}
    low, high, mid = box.split_continuous(var)

    def route(x, idx):
        mask = x[idx, var] <= mid
        return [idx[mask], idx[~mask]]

    return [low, high], route, {"kind": "c", "split": mid}


def _shares(counts, pseudo):
    """Mass fractions from child point counts.

    Continuous branches use raw proportions; discrete branches add a
    pseudo-count per child so empty values keep nonzero mass.
    """
    counts = np.asarray(counts, dtype=np.float64) + pseudo
    return tuple(counts / counts.sum())


def grow_tree(dataset, box, config, builder):
    """Greedy top-down growth; returns a DensityTree over the dataset's frame."""
    if dataset.n_rows == 0:
        raise DataError("cannot grow a tree on an empty dataset")
    x = dataset.values
    root = _grow_node(x, np.arange(x.shape[0]), box, (), 0, config, builder)
    return DensityTree(root, box)


def _grow_node(x, idx, box, path, depth, config, builder):
    schema = box.schema
    n = len(idx)
    candidates = [v for v in config.branch_vars if _splittable(box, v, schema)]
    if n < config.min_points or depth >= config.max_depth or not candidates:
        unit = builder.fit(x[idx], box, derive_seed(config.seed, *path, 3))
        return builder.as_node(unit, box, n)

    # Per-node stump holdout split, keyed on the node path.
    keys = row_keys(derive_seed(config.seed, *path, 1), n)
    order = np.argsort(keys, kind="stable")
    n_hold = min(max(round_half_up(config.stump_fraction * n), 1), n - 1)
    hold = idx[order[:n_hold]]
    tr = idx[order[n_hold:]]

    best = None
    best_score = -math.inf
    for v in candidates:
        boxes, route, _ = _branch_partition(box, v, schema)
        tr_parts = route(x, tr)
        hold_parts = route(x, hold)
        pseudo = config.pseudo_count if schema.is_discrete(v) else 0.0
        shares = _shares([len(p) for p in tr_parts], pseudo) if config.mass_applies(v) else None
        score = 0.0
        for k, cbox in enumerate(boxes):
            unit = builder.fit(x[tr_parts[k]], cbox, derive_seed(config.seed, *path, 5, v, k))
            s = _unit_score(builder, unit, x[hold_parts[k]], cbox).sum()
            if shares is not None:
                s += len(hold_parts[k]) * math.log(max(shares[k], 1e-300))
            score += s
        if score > best_score:
            best_score = score
            best = v

    if best is not None and config.stop_on_no_gain:
        base_unit = builder.fit(x[tr], box, derive_seed(config.seed, *path, 4))
        if best_score <= _unit_score(builder, base_unit, x[hold], box).sum():
            best = None

    if best is None:
        unit = builder.fit(x[idx], box, derive_seed(config.seed, *path, 3))
        return builder.as_node(unit, box, n)

    boxes, route, info = _branch_partition(box, best, schema)
    parts = route(x, idx)
    pseudo = config.pseudo_count if schema.is_discrete(best) else 0.0
    shares = _shares([len(p) for p in parts], pseudo) if config.mass_applies(best) else None
    children = [
        _grow_node(x, parts[k], boxes[k], path + (best, k), depth + 1, config, builder)
        for k in range(len(boxes))
    ]
    if info["kind"] == "c":
        return ContinuousBranch(best, info["split"], children[0], children[1], shares)
    return DiscreteBranch(best, info["values"], children, shares)


# ---------------------------------------------------------------------------
# pruning


class PruneWarning(UserWarning):
    pass


def prune_tree(tree, train_dataset, holdout_dataset, config, builder):
    """Bottom-up pruning against a holdout set.

    Each internal node (restricted to the builder's prune_vars, so child-only
    subtrees inside stratified trees are left to their own inner pruning) is
    replaced by a refitted leaf unit when that does not lower the holdout
    log-likelihood.
    """
    if holdout_dataset.n_rows == 0:
        warnings.warn("empty prune holdout; tree returned unchanged", PruneWarning)
        return tree
    xt = train_dataset.values
    xh = holdout_dataset.values
    prune_vars = builder.prune_vars

    def visit(node, t_idx, h_idx, box, path):
        if is_leaf(node):
            return node
        if prune_vars is not None and node.var not in prune_vars:
            return node
        t_parts = _route_masks(node, xt, t_idx)
        h_parts = _route_masks(node, xh, h_idx)
        if isinstance(node, ContinuousBranch):
            boxes = [box.with_entry(node.var, (box.subrange(node.var)[0], node.split)),
                     box.with_entry(node.var, (node.split, box.subrange(node.var)[1]))]
        else:
            boxes = [box.restrict_discrete(node.var, v) for v in node.values]
        children = [
            visit(c, t_parts[k], h_parts[k], boxes[k], path + (node.var, k))
            for k, c in enumerate(node.children)
        ]
        if isinstance(node, ContinuousBranch):
            rebuilt = ContinuousBranch(node.var, node.split, children[0], children[1], node.shares)
        else:
            rebuilt = DiscreteBranch(node.var, node.values, children, node.shares)
        unit = builder.fit(xt[t_idx], box, derive_seed(config.seed, *path, 6))
        cand_node = builder.as_node(unit, box, len(t_idx))
        sub_score = subtree_log_density(rebuilt, xh, h_idx).sum()
        cand_score = _unit_score(builder, unit, xh[h_idx], box).sum()
        if cand_score >= sub_score:
            return cand_node
        return rebuilt

    root = visit(tree.root, np.arange(xt.shape[0]), np.arange(xh.shape[0]), tree.root_box, ())
    return DensityTree(root, tree.root_box)


def refit_leaf_dist(dist, rows, box, config, seed):
    """Fit the same leaf family (and modeled columns) on new rows."""
    disc_values, disc_probs = {}, {}
    for c in dist.disc_probs:
        admissible = box.values(c)
        disc_values[c] = admissible
        disc_probs[c] = fit_multinomial(rows[:, c] if len(rows) else [], admissible, config.pseudo_count)
    part = dist.cont
    trace = None
    if part is None:
        cont = None
    else:
        from .leaves import UniformPart

        dims = part.dims
        if isinstance(part, UniformPart):
            cont = part
        elif isinstance(part, LinRegGaussianPart):
            if len(rows) >= len(part.parent_dims) + 2:
                cont = fit_linreg_gaussian(rows, part.child, part.parent_dims, box, config.floor_scale)
            else:
                cont = part
        elif isinstance(part, DiagGaussianPart):
            cont = fit_diag_gaussian(rows, box, dims, config.floor_scale) if len(rows) >= 2 else part
        elif part.name == "linear":
            cont, trace = fit_linear_interp_em(rows, box, config.em.with_seed(seed), dims)
        elif part.name == "multilinear":
            cont, trace = fit_multilinear_em(rows, box, config.em.with_seed(seed), dims)
        else:
            cont = part
    return LeafDistribution(disc_values, disc_probs, cont, em_trace=trace)


def refit_tree(tree, dataset, config):
    """Re-estimate leaf distributions and mass shares on the full dataset,
    keeping the selected structure fixed."""
    x = dataset.values

    def visit(node, idx, box, path):
        if is_leaf(node):
            dist = refit_leaf_dist(node.dist, x[idx], box, config, derive_seed(config.seed, *path, 7))
            return Leaf(box, dist, len(idx))
        parts = _route_masks(node, x, idx)
        if isinstance(node, ContinuousBranch):
            a, b = box.subrange(node.var)
            boxes = [box.with_entry(node.var, (a, node.split)), box.with_entry(node.var, (node.split, b))]
        else:
            boxes = [box.restrict_discrete(node.var, v) for v in node.values]
        children = [
            visit(c, parts[k], boxes[k], path + (node.var, k)) for k, c in enumerate(node.children)
        ]
        if node.shares is not None:
            pseudo = config.pseudo_count if box.schema.is_discrete(node.var) else 0.0
            shares = _shares([len(p) for p in parts], pseudo)
        else:
            shares = None
        if isinstance(node, ContinuousBranch):
            return ContinuousBranch(node.var, node.split, children[0], children[1], shares)
        return DiscreteBranch(node.var, node.values, tuple(children), shares)

    root = visit(tree.root, np.arange(x.shape[0]), tree.root_box, ())
    return DensityTree(root, tree.root_box)


def learn_tree(dataset, box, config, builder):
    """Grow on a train split, prune with the held-out remainder, then refit
    leaf parameters and shares on all rows (structure stays fixed)."""
    n = dataset.n_rows
    try:
        tr_idx, pr_idx = holdout_indices(n, config.prune_fraction, derive_seed(config.seed, 2))
    except DataError:
        tr_idx, pr_idx = np.arange(n), np.arange(0)
    train = dataset.subset(tr_idx)
    tree = grow_tree(train, box, config, builder)
    if len(pr_idx):
        tree = prune_tree(tree, train, dataset.subset(pr_idx), config, builder)
        tree = refit_tree(tree, dataset, config)
    return tree


def learn_tree_node(rows, box, config, builder):
    """learn_tree over a raw row array; returns the root node (for nesting)."""
    from .schema import Dataset

    if rows.shape[0] == 0:
        unit = builder.fit(rows, box, derive_seed(config.seed, 3))
        return builder.as_node(unit, box, 0)
    ds = Dataset(box.schema, rows)
    return learn_tree(ds, box, config, builder).root


# ---------------------------------------------------------------------------
# whole-tree operations


def tree_log_density(tree, points):
    return tree.log_density(points)


def sample_tree(tree, rng, n=1):
    return tree.sample(rng, n)


def uniform_log_density(box):
    """Log density of the uniform distribution over a box (mixed variables)."""
    out = 0.0
    for c in box.schema.continuous_cols:
        out -= math.log(box.width(c))
    for c in box.schema.discrete_cols:
        out -= math.log(len(box.values(c)))
    return out


class SmoothedTree:
    """Mixture (1 - eps) * tree + eps * uniform over the root box."""

    def __init__(self, tree, epsilon):
        if not (0.0 <= epsilon <= 1.0):
            raise DataError("epsilon must lie in [0, 1]")
        self.tree = tree
        self.epsilon = float(epsilon)
        self._log_uniform = uniform_log_density(tree.root_box)

    @property
    def root_box(self):
        return self.tree.root_box

    def log_density(self, points):
        raw = self.tree.log_density(points)
        if self.epsilon == 0.0:
            return raw
        arr = np.asarray(raw, dtype=np.float64)
        if self.epsilon == 1.0:
            mixed = np.full_like(arr, self._log_uniform)
        else:
            mixed = np.logaddexp(
                math.log1p(-self.epsilon) + arr,
                math.log(self.epsilon) + self._log_uniform,
            )
        mixed = np.where(np.isneginf(arr), -np.inf, mixed)
        return float(mixed) if np.isscalar(raw) else mixed

    def sample(self, rng, n=1):
        out = self.tree.sample(rng, n)
        if self.epsilon > 0.0:
            take = rng.random(n) < self.epsilon
            box = self.tree.root_box
            for i in np.nonzero(take)[0]:
                for c in box.schema.continuous_cols:
                    a, b = box.subrange(c)
                    out[i, c] = rng.uniform(a, b)
                for c in box.schema.discrete_cols:
                    vals = box.values(c)
                    out[i, c] = vals[rng.integers(len(vals))]
        return out


def smooth_tree(tree, epsilon):
    return SmoothedTree(tree, epsilon)
