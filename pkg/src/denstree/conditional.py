"""The four conditional-density estimators over a (child, parents) frame.

* CART-like trees branch on parents only and keep a simple child
  distribution (Gaussian, regression Gaussian, or multinomial) per leaf.
* Stratified trees branch on parents above child-only subtrees whose leaf
  masses are conditional masses (they sum to 1 per subtree).
* Joint trees model child and parents on an equal footing and are
  conditionalized exactly by a leaf sweep: the conditional at (x, pi) is
  P(l_c) P(pi|l_c) P(x|pi,l_c) / sum_l' P(l') P(pi|l').
* Approximately conditionalized joint trees precompute an auxiliary
  stratified-shaped tree whose leaves each point at one joint-tree leaf and
  carry a soft-branch coefficient, so evaluation touches exactly one leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, InternalError
from .leaves import EmFitConfig
from .schema import Dataset
from .splitting import row_keys
from .tree import (
    ContinuousBranch,
    DensityTree,
    DiscreteBranch,
    DistLeafBuilder,
    GrowConfig,
    Leaf,
    SubtreeBuilder,
    derive_seed,
    is_leaf,
    learn_tree,
)

_TINY = 1e-300


@dataclass(frozen=True)
class ConditionalSpec:
    """Child variable and parent set, as global schema column indices."""

    child: int
    parents: tuple

    def __post_init__(self):
        if self.child in self.parents:
            raise ConfigError("child cannot be its own parent")

    def frame(self):
        return (self.child,) + tuple(sorted(self.parents))


@dataclass(frozen=True)
class CondLearnConfig:
    """Settings shared by the four conditional learners."""

    leaf_family: str = "multilinear"
    min_points: int = 10
    seed: int = 0
    pseudo_count: float = 1.0
    max_depth: int = 50
    em: EmFitConfig = field(default_factory=EmFitConfig)
    use_posterior_mean_coefs: bool = False
    row_cap: int | None = None


@dataclass
class EvalCounters:
    """Structural work counters for conditional evaluation."""

    queries: int = 0
    leaves_visited: int = 0
    fallbacks: int = 0

    def mean_visited(self):
        return self.leaves_visited / max(self.queries, 1)


def _cap_rows(dataset, cap, seed):
    if cap is None or dataset.n_rows <= cap:
        return dataset
    order = np.argsort(row_keys(seed, dataset.n_rows), kind="stable")
    return dataset.subset(np.sort(order[:cap]))


def _project(dataset, spec):
    frame = spec.frame()
    return dataset.project(frame), frame


def _as_rows(points):
    x = np.asarray(points, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


class _ConditionalBase:
    """Shared plumbing: frame projection and uniform-child constants."""

    def __init__(self, spec, frame, frame_schema, tree, full_schema=None):
        self.spec = spec
        self.frame = tuple(frame)
        self.frame_schema = frame_schema
        self.full_schema = full_schema if full_schema is not None else frame_schema
        self.tree = tree
        self.child_local = 0
        self.parent_locals = tuple(range(1, len(self.frame)))

    @property
    def root_box(self):
        return self.tree.root_box

    def project(self, x):
        return x[:, list(self.frame)]

    def child_uniform_log_density(self):
        box = self.tree.root_box
        if self.frame_schema.is_discrete(0):
            return -math.log(len(box.values(0)))
        return -math.log(box.width(0))


class CartModel(_ConditionalBase):
    """Parent-branching tree with a single child distribution per leaf."""

    kind = "cart"

    def cond_log_density(self, points, counters=None):
        x, single = _as_rows(points)
        xf = self.project(x)
        out = self.tree.log_density(xf)
        if counters is not None:
            counters.queries += x.shape[0]
            counters.leaves_visited += x.shape[0]
        return float(out[0]) if single else out

    def integrate_conditional(self, points):
        x, single = _as_rows(points)
        out = _cond_integral_tree(self.tree, self.project(x))
        return float(out[0]) if single else out

    def cond_sample(self, row, rng):
        return _cond_sample_tree(self.tree, np.asarray(row, dtype=np.float64)[list(self.frame)], rng)


class StratifiedModel(_ConditionalBase):
    """Parents-above-child tree; leaf masses are conditional masses."""

    kind = "stratified"

    cond_log_density = CartModel.cond_log_density
    integrate_conditional = CartModel.integrate_conditional
    cond_sample = CartModel.cond_sample


def _cond_integral_tree(tree, xf):
    """Analytic integral of the conditional over the child, per parent row."""
    out = np.zeros(xf.shape[0])

    def visit(node, idx, acc):
        if len(idx) == 0:
            return
        if is_leaf(node):
            out[idx] += acc * node.dist.mass_in_subbox(node.box, node.box)
            return
        child_branch = node.shares is not None
        if child_branch:
            for k, c in enumerate(node.children):
                visit(c, idx, acc * node.shares[k])
        else:
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask], acc)
                visit(node.high, idx[~mask], acc)
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v], acc)

    visit(tree.root, np.arange(xf.shape[0]), 1.0)
    return out


def _cond_sample_tree(tree, frow, rng):
    """Descend by parents; pick child branches by conditional mass shares."""
    node = tree.root
    while not is_leaf(node):
        if node.shares is not None:
            k = rng.choice(len(node.children), p=np.asarray(node.shares))
        elif isinstance(node, ContinuousBranch):
            k = 0 if frow[node.var] <= node.split else 1
        else:
            k = node.values.index(frow[node.var])
        node = node.children[k]
    return float(node.dist.cond_slice(frow, 0, node.box).sample(rng, 1)[0])


class JointModel(_ConditionalBase):
    """Joint density tree evaluated conditionally by an exact leaf sweep."""

    kind = "joint"

    def joint_log_density(self, points):
        x, single = _as_rows(points)
        out = self.tree.log_density(self.project(x))
        return float(out[0]) if single else out

    def _denominator(self, xf, counters=None):
        """sum over pi-consistent leaves of P(l) * P(pi|l), vectorized."""
        den = np.zeros(xf.shape[0])
        visits = np.zeros(xf.shape[0], dtype=np.int64)

        def visit(node, idx):
            if len(idx) == 0:
                return
            if is_leaf(node):
                if self.parent_locals:
                    m = node.dist.marginal_density(xf[idx], self.parent_locals, node.box)
                else:
                    m = np.ones(len(idx))
                den[idx] += node.mass * m
                visits[idx] += 1
                return
            if node.var == self.child_local:
                for c in node.children:
                    visit(c, idx)
                return
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask])
                visit(node.high, idx[~mask])
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v])

        visit(self.tree.root, np.arange(xf.shape[0]))
        if counters is not None:
            counters.leaves_visited += int(visits.sum())
        return den, visits

    def _numerator_log(self, xf):
        """log of P(l_c) * P(pi|l_c) * P(x|pi,l_c) at the containing leaf."""
        out = np.full(xf.shape[0], -np.inf)

        def visit(node, idx):
            if len(idx) == 0:
                return
            if is_leaf(node):
                v = math.log(max(node.mass, _TINY)) + node.dist.cond_log_density(
                    xf[idx], self.child_local, node.box
                )
                if self.parent_locals:
                    m = node.dist.marginal_density(xf[idx], self.parent_locals, node.box)
                    v = v + np.log(np.maximum(m, _TINY))
                out[idx] = v
                return
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask])
                visit(node.high, idx[~mask])
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v])

        visit(self.tree.root, np.arange(xf.shape[0]))
        return out

    def cond_log_density(self, points, counters=None):
        x, single = _as_rows(points)
        xf = self.project(x)
        inside = self.tree.root_box.contains_mask(xf)
        num = self._numerator_log(xf)
        den, _ = self._denominator(xf, counters)
        out = np.where(
            inside & (den > 0.0),
            num - np.log(np.maximum(den, _TINY)),
            np.where(inside, self.child_uniform_log_density(), -np.inf),
        )
        if counters is not None:
            counters.queries += x.shape[0]
            counters.fallbacks += int((inside & (den <= 0.0)).sum())
        return float(out[0]) if single else out

    def integrate_conditional(self, points):
        """Per parent row: sum_l P(l) P(pi|l) * 1 over the numerator leaves,
        divided by the denominator sweep (analytic; equals 1 up to round-off)."""
        x, single = _as_rows(points)
        xf = self.project(x)
        den, _ = self._denominator(xf)
        num = np.zeros(xf.shape[0])

        def visit(node, idx):
            if len(idx) == 0:
                return
            if is_leaf(node):
                if self.parent_locals:
                    m = node.dist.marginal_density(xf[idx], self.parent_locals, node.box)
                else:
                    m = np.ones(len(idx))
                num[idx] += node.mass * m * node.dist.mass_in_subbox(node.box, node.box)
                return
            if node.var == self.child_local:
                for c in node.children:
                    visit(c, idx)
                return
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask])
                visit(node.high, idx[~mask])
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v])

        visit(self.tree.root, np.arange(xf.shape[0]))
        out = num / np.maximum(den, _TINY)
        return float(out[0]) if single else out

    def _consistent_leaves(self, frow):
        """Leaves consistent with the parent values of one frame row."""
        found = []

        def visit(node):
            if is_leaf(node):
                found.append(node)
                return
            if node.var == self.child_local:
                for c in node.children:
                    visit(c)
                return
            if isinstance(node, ContinuousBranch):
                visit(node.low if frow[node.var] <= node.split else node.high)
            else:
                visit(node.children[node.values.index(frow[node.var])])

        visit(self.tree.root)
        return found

    def cond_sample(self, row, rng):
        frow = np.asarray(row, dtype=np.float64)[list(self.frame)]
        leaves = self._consistent_leaves(frow)
        weights = np.empty(len(leaves))
        for i, leaf in enumerate(leaves):
            m = 1.0
            if self.parent_locals:
                m = float(leaf.dist.marginal_density(frow[None, :], self.parent_locals, leaf.box)[0])
            weights[i] = leaf.mass * m
        tot = weights.sum()
        if tot <= 0.0:
            weights = np.ones(len(leaves)) / len(leaves)
        else:
            weights = weights / tot
        leaf = leaves[rng.choice(len(leaves), p=weights)]
        return float(leaf.dist.cond_slice(frow, self.child_local, leaf.box).sample(rng, 1)[0])


# ---------------------------------------------------------------------------
# structural marginalization and the auxiliary tree


class MargLeaf:
    """A parent-space region together with the ids of every joint-tree leaf
    whose box meets it with nonzero parent-volume."""

    __slots__ = ("ids",)

    def __init__(self, ids):
        self.ids = frozenset(ids)


def _add_ids(node, ids):
    if isinstance(node, MargLeaf):
        return MargLeaf(node.ids | ids)
    if isinstance(node, ContinuousBranch):
        return ContinuousBranch(node.var, node.split, _add_ids(node.low, ids), _add_ids(node.high, ids))
    return DiscreteBranch(node.var, node.values, tuple(_add_ids(c, ids) for c in node.children))


def _restrict(node, var, k, ref):
    """Restrict a marginal tree to side k of a branch on `var`.

    Relies on the midpoint discipline: any two branches on the same
    continuous variable within the same region share the same split value.
    """
    if isinstance(node, MargLeaf):
        return node
    if node.var == var:
        if isinstance(node, ContinuousBranch):
            if node.split != ref["split"]:
                raise InternalError("misaligned continuous splits during marginalization")
            return node.low if k == 0 else node.high
        if node.values != ref["values"]:
            raise InternalError("misaligned discrete branches during marginalization")
        return node.children[k]
    if isinstance(node, ContinuousBranch):
        return ContinuousBranch(node.var, node.split, _restrict(node.low, var, k, ref), _restrict(node.high, var, k, ref))
    return DiscreteBranch(node.var, node.values, tuple(_restrict(c, var, k, ref) for c in node.children))


def _merge(a, b):
    if isinstance(a, MargLeaf):
        return _add_ids(b, a.ids)
    if isinstance(b, MargLeaf):
        return _add_ids(a, b.ids)
    if isinstance(a, ContinuousBranch):
        ref = {"split": a.split}
        return ContinuousBranch(
            a.var,
            a.split,
            _merge(a.low, _restrict(b, a.var, 0, ref)),
            _merge(a.high, _restrict(b, a.var, 1, ref)),
        )
    ref = {"values": a.values}
    return DiscreteBranch(
        a.var,
        a.values,
        tuple(_merge(c, _restrict(b, a.var, k, ref)) for k, c in enumerate(a.children)),
    )


def _coalesce(node):
    if isinstance(node, MargLeaf):
        return node
    if isinstance(node, ContinuousBranch):
        lo, hi = _coalesce(node.low), _coalesce(node.high)
        if isinstance(lo, MargLeaf) and isinstance(hi, MargLeaf) and lo.ids == hi.ids:
            return MargLeaf(lo.ids)
        return ContinuousBranch(node.var, node.split, lo, hi)
    children = [_coalesce(c) for c in node.children]
    if all(isinstance(c, MargLeaf) for c in children):
        ids0 = children[0].ids
        if all(c.ids == ids0 for c in children):
            return MargLeaf(ids0)
    return DiscreteBranch(node.var, node.values, tuple(children))


def marginalize_structure(model):
    """Parent-space tree removing all child branches; each leaf lists the
    joint-tree leaves meeting its region."""
    child = model.child_local

    def visit(node):
        if is_leaf(node):
            return MargLeaf({node.leaf_id})
        if node.var == child:
            merged = visit(node.children[0])
            for c in node.children[1:]:
                merged = _merge(merged, visit(c))
            return merged
        if isinstance(node, ContinuousBranch):
            return ContinuousBranch(node.var, node.split, visit(node.low), visit(node.high))
        return DiscreteBranch(node.var, node.values, tuple(visit(c) for c in node.children))

    return _coalesce(visit(model.tree.root))


class AuxLeaf:
    """Terminal region of the auxiliary tree: points at exactly one joint
    leaf and carries the soft-branch coefficient."""

    __slots__ = ("box", "target", "coef", "subtree_id")

    def __init__(self, box, target, coef=1.0, subtree_id=-1):
        self.box = box
        self.target = target
        self.coef = coef
        self.subtree_id = subtree_id


class AuxTree:
    """Stratified-shaped index over a joint tree: parent branches above,
    child-only refinement below; one joint leaf per terminal region."""

    def __init__(self, root, root_box, subtree_count, fallback_subtrees=()):
        self.root = root
        self.root_box = root_box
        self.subtree_count = subtree_count
        self.fallback_subtrees = tuple(fallback_subtrees)

    def aux_leaves(self):
        out = []

        def visit(node):
            if isinstance(node, AuxLeaf):
                out.append(node)
            else:
                for c in node.children:
                    visit(c)

        visit(self.root)
        return out


def _child_overlap(leaf_box, box, child, schema):
    if schema.is_discrete(child):
        return len(set(leaf_box.values(child)) & set(box.values(child))) > 0
    (a1, b1), (a2, b2) = leaf_box.subrange(child), box.subrange(child)
    return min(b1, b2) - max(a1, a2) > 0.0


def refine_to_aux(marg_root, model):
    """Branch each marginal leaf on the child until every terminal region
    meets exactly one joint-tree leaf."""
    schema = model.frame_schema
    child = model.child_local
    leaves = model.tree.leaves
    subtrees = []

    def refine(box, ids, depth):
        cands = [i for i in sorted(ids) if _child_overlap(leaves[i].box, box, child, schema)]
        if not cands:
            raise InternalError("marginal region meets no joint leaf")
        if len(cands) == 1:
            return AuxLeaf(box, cands[0], subtree_id=len(subtrees))
        if depth > 64:
            raise InternalError("child refinement exceeded the joint tree's resolution")
        if schema.is_discrete(child):
            values = box.values(child)
            kids = tuple(refine(box.restrict_discrete(child, v), cands, depth + 1) for v in values)
            return DiscreteBranch(child, values, kids)
        low, high, mid = box.split_continuous(child)
        return ContinuousBranch(child, mid, refine(low, cands, depth + 1), refine(high, cands, depth + 1))

    def visit(node, box):
        if isinstance(node, MargLeaf):
            subtree_root = refine(box, node.ids, 0)
            subtrees.append((subtree_root, box, frozenset(node.ids)))
            return subtree_root
        if isinstance(node, ContinuousBranch):
            a, b = box.subrange(node.var)
            lo = visit(node.low, box.with_entry(node.var, (a, node.split)))
            hi = visit(node.high, box.with_entry(node.var, (node.split, b)))
            return ContinuousBranch(node.var, node.split, lo, hi)
        kids = tuple(
            visit(c, box.restrict_discrete(node.var, v)) for v, c in zip(node.values, node.children)
        )
        return DiscreteBranch(node.var, node.values, kids)

    root = visit(marg_root, model.tree.root_box)
    aux = AuxTree(root, model.tree.root_box, len(subtrees))
    aux._subtree_info = subtrees
    return aux


def _region_marginal_mean(model, leaf, pts_frame):
    if model.parent_locals:
        return float(leaf.dist.marginal_density(pts_frame, model.parent_locals, leaf.box).mean())
    return 1.0


def _region_marginal_center(model, leaf, region_box):
    """P(pi|l) proxy when a subtree region holds no training points: evaluate
    at the region center (continuous) and average over admissible values
    (discrete)."""
    schema = model.frame_schema
    out = 1.0
    cont = [c for c in model.parent_locals if not schema.is_discrete(c)]
    if cont and leaf.dist.cont is not None:
        row = np.zeros((1, schema.width))
        for c in cont:
            row[0, c] = region_box.center(c)
        keep = tuple(c for c in cont if c in leaf.dist.cont.dims)
        if keep:
            out *= float(leaf.dist.cont.marginal_density(row, keep, leaf.box)[0])
    for c in model.parent_locals:
        if schema.is_discrete(c) and c in leaf.dist.disc_probs:
            vals = leaf.dist.disc_values[c]
            adm = set(region_box.values(c))
            probs = leaf.dist.disc_probs[c]
            mass = sum(p for v, p in zip(vals, probs) if v in adm)
            out *= mass / len(adm)
    return out


class ApproxCondModel(_ConditionalBase):
    """Joint tree plus auxiliary tree with precomputed soft-branch
    coefficients; conditional evaluation touches exactly one joint leaf."""

    kind = "approx"

    def __init__(self, joint, aux):
        super().__init__(joint.spec, joint.frame, joint.frame_schema, joint.tree, joint.full_schema)
        self.joint = joint
        self.aux = aux

    def cond_log_density(self, points, counters=None):
        x, single = _as_rows(points)
        xf = self.project(x)
        out = np.full(xf.shape[0], -np.inf)
        inside = self.tree.root_box.contains_mask(xf)
        idx0 = np.nonzero(inside)[0]
        leaves = self.tree.leaves
        child = self.child_local

        def visit(node, idx):
            if len(idx) == 0:
                return
            if isinstance(node, AuxLeaf):
                target = leaves[node.target]
                out[idx] = math.log(max(node.coef, _TINY)) + target.dist.cond_log_density(
                    xf[idx], child, target.box
                )
                return
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask])
                visit(node.high, idx[~mask])
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v])

        visit(self.aux.root, idx0)
        if counters is not None:
            counters.queries += x.shape[0]
            counters.leaves_visited += len(idx0)
        return float(out[0]) if single else out

    def integrate_conditional(self, points):
        """Approximate conditional mass: sum over consistent aux leaves of
        coef * conditional slice mass.  Not renormalized by design."""
        x, single = _as_rows(points)
        xf = self.project(x)
        out = np.zeros(xf.shape[0])
        leaves = self.tree.leaves
        child = self.child_local
        schema = self.frame_schema

        def visit(node, idx):
            if len(idx) == 0:
                return
            if isinstance(node, AuxLeaf):
                target = leaves[node.target]
                for i in idx:
                    sl = target.dist.cond_slice(xf[i], child, target.box)
                    if schema.is_discrete(child):
                        vals = set(node.box.values(child))
                        m = sum(p for v, p in zip(sl.values, sl.probs) if v in vals)
                    else:
                        a, b = node.box.subrange(child)
                        m = sl.mass(a, b)
                    out[i] += node.coef * m
                return
            if node.var == child:
                for c in node.children:
                    visit(c, idx)
                return
            col = xf[idx, node.var]
            if isinstance(node, ContinuousBranch):
                mask = col <= node.split
                visit(node.low, idx[mask])
                visit(node.high, idx[~mask])
            else:
                for k, v in enumerate(node.values):
                    visit(node.children[k], idx[col == v])

        visit(self.aux.root, np.arange(xf.shape[0]))
        return float(out[0]) if single else out

    def cond_sample(self, row, rng):
        frow = np.asarray(row, dtype=np.float64)[list(self.frame)]
        leaves = self.tree.leaves
        child = self.child_local
        schema = self.frame_schema
        consistent = []

        def visit(node):
            if isinstance(node, AuxLeaf):
                consistent.append(node)
                return
            if node.var == child:
                for c in node.children:
                    visit(c)
                return
            if isinstance(node, ContinuousBranch):
                visit(node.low if frow[node.var] <= node.split else node.high)
            else:
                visit(node.children[node.values.index(frow[node.var])])

        visit(self.aux.root)
        weights = np.empty(len(consistent))
        slices = []
        for i, al in enumerate(consistent):
            target = leaves[al.target]
            sl = target.dist.cond_slice(frow, child, target.box)
            slices.append(sl)
            if schema.is_discrete(child):
                vals = set(al.box.values(child))
                m = sum(p for v, p in zip(sl.values, sl.probs) if v in vals)
            else:
                a, b = al.box.subrange(child)
                m = sl.mass(a, b)
            weights[i] = al.coef * m
        tot = weights.sum()
        weights = weights / tot if tot > 0 else np.full(len(consistent), 1.0 / len(consistent))
        pick = rng.choice(len(consistent), p=weights)
        al, sl = consistent[pick], slices[pick]
        if schema.is_discrete(child):
            vals = set(al.box.values(child))
            probs = np.array([p if v in vals else 0.0 for v, p in zip(sl.values, sl.probs)])
            probs = probs / probs.sum()
            return float(np.asarray(sl.values)[rng.choice(len(probs), p=probs)])
        a, b = al.box.subrange(child)
        return float(sl.sample(rng, 1, a, b)[0])


def estimate_soft_branch_coefs(aux, model, dataset, use_posterior_mean=False):
    """Fill in the per-aux-leaf coefficients from training data.

    For each maximal child-only subtree: average P(pi|l') over the training
    points consistent with the subtree's parent constraints, then set each
    leaf's coefficient to P(l_c) avg(P(pi|l_c)) / sum_l' P(l') avg(P(pi|l')).
    Regions with no consistent points are evaluated at the region center and
    flagged.
    """
    xf = model.project(dataset.values)
    leaves = model.tree.leaves
    fallback = []
    for sid, (subtree_root, box, ids) in enumerate(aux._subtree_info):
        mask = np.ones(xf.shape[0], dtype=bool)
        for c in model.parent_locals:
            if model.frame_schema.is_discrete(c):
                mask &= np.isin(xf[:, c], np.asarray(box.values(c), dtype=np.float64))
            else:
                a, b = box.subrange(c)
                mask &= (xf[:, c] >= a) & (xf[:, c] <= b)
        pts = xf[mask]
        ids_sorted = sorted(ids)
        if use_posterior_mean and len(pts):
            m = np.column_stack(
                [
                    leaves[i].mass
                    * (
                        leaves[i].dist.marginal_density(pts, model.parent_locals, leaves[i].box)
                        if model.parent_locals
                        else np.ones(len(pts))
                    )
                    for i in ids_sorted
                ]
            )
            den_rows = np.maximum(m.sum(axis=1), _TINY)
            post = (m / den_rows[:, None]).mean(axis=0)
            coef_by_id = dict(zip(ids_sorted, post))
        else:
            if len(pts):
                phat = {i: _region_marginal_mean(model, leaves[i], pts) for i in ids_sorted}
            else:
                phat = {i: _region_marginal_center(model, leaves[i], box) for i in ids_sorted}
                fallback.append(sid)
            den = sum(leaves[i].mass * phat[i] for i in ids_sorted)
            den = max(den, _TINY)
            coef_by_id = {i: leaves[i].mass * phat[i] / den for i in ids_sorted}

        def assign(node):
            if isinstance(node, AuxLeaf):
                node.coef = float(coef_by_id[node.target])
                node.subtree_id = sid
                return
            for c in node.children:
                assign(c)

        assign(subtree_root)
    aux.fallback_subtrees = tuple(fallback)
    return ApproxCondModel(model, aux)


# ---------------------------------------------------------------------------
# learners


def _grow_config(spec, frame_schema, cfg, branch_vars, target, family):
    child = 0 if target == "conditional" else None
    return GrowConfig(
        branch_vars=branch_vars,
        score_target=target,
        child=child,
        leaf_family=family,
        min_points=cfg.min_points,
        pseudo_count=cfg.pseudo_count,
        max_depth=cfg.max_depth,
        seed=cfg.seed,
        em=cfg.em,
    )


def learn_cart(dataset, spec, cfg):
    """Regression/classification tree: parents in branches, a Gaussian
    (optionally regression-mean) or multinomial child per leaf."""
    data = _cap_rows(dataset, cfg.row_cap, derive_seed(cfg.seed, 17))
    proj, frame = _project(data, spec)
    schema = proj.schema
    box = schema.root_box()
    family = cfg.leaf_family if cfg.leaf_family in ("gauss", "linreg") else "gauss"
    gc = _grow_config(spec, schema, cfg, tuple(range(1, len(frame))), "conditional", family)
    cont_parents = tuple(c for c in range(1, len(frame)) if not schema.is_discrete(c))
    builder = DistLeafBuilder(schema, family, (0,), gc, linreg_parents=cont_parents)
    tree = learn_tree(proj, box, gc, builder)
    return CartModel(spec, frame, schema, tree, dataset.schema)


def learn_stratified(dataset, spec, cfg):
    """Parent branches above learned child-only subtrees (conditional masses)."""
    data = _cap_rows(dataset, cfg.row_cap, derive_seed(cfg.seed, 17))
    proj, frame = _project(data, spec)
    schema = proj.schema
    box = schema.root_box()
    gc = _grow_config(spec, schema, cfg, tuple(range(1, len(frame))), "conditional", "uniform")
    builder = SubtreeBuilder(schema, 0, cfg.leaf_family, gc)
    tree = learn_tree(proj, box, gc, builder)
    return StratifiedModel(spec, frame, schema, tree, dataset.schema)


def learn_joint(dataset, spec, cfg):
    """Density tree over child and parents jointly, scored on joint density."""
    data = _cap_rows(dataset, cfg.row_cap, derive_seed(cfg.seed, 17))
    proj, frame = _project(data, spec)
    schema = proj.schema
    box = schema.root_box()
    gc = _grow_config(spec, schema, cfg, tuple(range(len(frame))), "joint", cfg.leaf_family)
    builder = DistLeafBuilder(schema, cfg.leaf_family, tuple(range(len(frame))), gc)
    tree = learn_tree(proj, box, gc, builder)
    return JointModel(spec, frame, schema, tree, dataset.schema)


def learn_approx(dataset, spec, cfg):
    """Joint tree plus auxiliary tree with estimated soft-branch coefficients."""
    joint = learn_joint(dataset, spec, cfg)
    marg = marginalize_structure(joint)
    aux = refine_to_aux(marg, joint)
    data = _cap_rows(dataset, cfg.row_cap, derive_seed(cfg.seed, 17))
    return estimate_soft_branch_coefs(aux, joint, data, cfg.use_posterior_mean_coefs)


LEARNERS = {
    "cart": learn_cart,
    "stratified": learn_stratified,
    "joint": learn_joint,
    "approx": learn_approx,
}


def learn_conditional(dataset, spec, mode, cfg):
    try:
        learner = LEARNERS[mode]
    except KeyError:
        raise ConfigError(f"unknown conditional mode {mode!r}") from None
    return learner(dataset, spec, cfg)


class SmoothedConditional:
    """(1 - eps) * model + eps * uniform over the child range, per slice."""

    kind = "smoothed"

    def __init__(self, model, epsilon):
        if not (0.0 <= epsilon < 1.0):
            raise ConfigError("conditional smoothing needs epsilon in [0, 1)")
        self.model = model
        self.epsilon = float(epsilon)

    @property
    def spec(self):
        return self.model.spec

    @property
    def frame(self):
        return self.model.frame

    @property
    def full_schema(self):
        return self.model.full_schema

    def cond_log_density(self, points, counters=None):
        raw = self.model.cond_log_density(points, counters)
        if self.epsilon == 0.0:
            return raw
        arr = np.asarray(raw, dtype=np.float64)
        log_u = self.model.child_uniform_log_density()
        mixed = np.logaddexp(math.log1p(-self.epsilon) + arr, math.log(self.epsilon) + log_u)
        mixed = np.where(np.isneginf(arr) & ~self._inside(points), -np.inf, mixed)
        return float(mixed) if np.isscalar(raw) else mixed

    def _inside(self, points):
        x, _ = _as_rows(points)
        return self.model.tree.root_box.contains_mask(self.model.project(x))

    def integrate_conditional(self, points):
        inner = self.model.integrate_conditional(points)
        return (1.0 - self.epsilon) * np.asarray(inner) + self.epsilon

    def cond_sample(self, row, rng):
        if rng.random() < self.epsilon:
            schema = self.model.frame_schema
            box = self.model.tree.root_box
            if schema.is_discrete(0):
                vals = box.values(0)
                return float(vals[rng.integers(len(vals))])
            a, b = box.subrange(0)
            return float(rng.uniform(a, b))
        return self.model.cond_sample(row, rng)


def smooth_conditional(model, epsilon):
    if epsilon == 0.0:
        return model
    return SmoothedConditional(model, epsilon)
