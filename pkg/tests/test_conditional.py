import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.special import ndtr

from denstree.conditional import (
    ApproxCondModel,
    CartModel,
    CondLearnConfig,
    ConditionalSpec,
    EvalCounters,
    JointModel,
    MargLeaf,
    StratifiedModel,
    estimate_soft_branch_coefs,
    learn_approx,
    learn_cart,
    learn_joint,
    learn_stratified,
    marginalize_structure,
    refine_to_aux,
    smooth_conditional,
)
from denstree.datagen import generate_mixture2d
from denstree.errors import ConfigError
from denstree.leaves import DiagGaussianPart, LeafDistribution, UniformPart
from denstree.schema import Box, Continuous, Dataset, Discrete, Variable, VariableSchema
from denstree.splitting import SplitPlan, split_holdout
from denstree.tree import ContinuousBranch, DensityTree, DiscreteBranch, DistLeafBuilder, GrowConfig, Leaf, grow_tree, is_leaf


@pytest.fixture(scope="module")
def mix_data():
    return generate_mixture2d(2500, 11)


@pytest.fixture(scope="module")
def mix_split(mix_data):
    return split_holdout(mix_data, SplitPlan(seed=2, holdout_fraction=0.25))


SPEC2D = ConditionalSpec(1, (0,))


def test_spec_rejects_child_in_parents():
    with pytest.raises(ConfigError):
        ConditionalSpec(0, (0, 1))


# ---------------------------------------------------------------------------
# hand-built fixtures


def _cart_classifier():
    """Decision tree: continuous parent <= .5, then 3-way discrete parent,
    with a (0.3, 0.7) multinomial child at the (low, value 1) leaf."""
    schema = VariableSchema(
        [Variable("x", Discrete(2)), Variable("c4", Continuous(0, 1)), Variable("q1", Discrete(3))]
    )
    spec = ConditionalSpec(0, (1, 2))
    frame_schema = schema  # frame is the identity here
    box = frame_schema.root_box()

    def leaf(b, p0):
        dist = LeafDistribution(disc_values={0: (0, 1)}, disc_probs={0: np.array([p0, 1 - p0])})
        return Leaf(b, dist, count=10)

    low_box, high_box, mid = box.split_continuous(1)
    q_children = []
    for v in (0, 1, 2):
        b = low_box.restrict_discrete(2, v)
        q_children.append(leaf(b, 0.3 if v == 1 else 0.5))
    low = DiscreteBranch(2, (0, 1, 2), tuple(q_children))
    root = ContinuousBranch(1, mid, low, leaf(high_box, 0.9))
    tree = DensityTree(root, box)
    return CartModel(spec, (0, 1, 2), frame_schema, tree, schema)


def _stratified_joint_pair():
    """The same parents-above-child structure expressed both as a joint tree
    (full masses, joint uniform leaves) and a stratified tree (conditional
    masses, child-only uniform leaves)."""
    schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
    spec = ConditionalSpec(0, (1,))
    box = schema.root_box()
    plo, phi, pmid = box.split_continuous(1)
    plo_clo, plo_chi, cmid = plo.split_continuous(0)

    def jleaf(b, count):
        return Leaf(b, LeafDistribution(cont=UniformPart((0, 1))), count=count)

    jroot = ContinuousBranch(
        1,
        pmid,
        ContinuousBranch(0, cmid, jleaf(plo_clo, 18), jleaf(plo_chi, 42), shares=(0.3, 0.7)),
        jleaf(phi, 40),
        shares=(0.6, 0.4),
    )
    joint = JointModel(spec, (0, 1), schema, DensityTree(jroot, box), schema)

    def sleaf(b, count):
        return Leaf(b, LeafDistribution(cont=UniformPart((0,))), count=count)

    sroot = ContinuousBranch(
        1,
        pmid,
        ContinuousBranch(0, cmid, sleaf(plo_clo, 18), sleaf(plo_chi, 42), shares=(0.3, 0.7)),
        sleaf(phi, 40),
        shares=None,
    )
    strat = StratifiedModel(spec, (0, 1), schema, DensityTree(sroot, box), schema)
    return joint, strat


def _naive_bayes_tree():
    """Depth-1 joint tree branching on a discrete child, multinomial leaves."""
    schema = VariableSchema([Variable("y", Discrete(2)), Variable("q", Discrete(3))])
    spec = ConditionalSpec(0, (1,))
    box = schema.root_box()
    priors = (0.4, 0.6)
    cpts = (np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.2, 0.2]))
    leaves = []
    for v in (0, 1):
        b = box.restrict_discrete(0, v)
        dist = LeafDistribution(disc_values={0: (v,), 1: (0, 1, 2)}, disc_probs={0: np.array([1.0]), 1: cpts[v]})
        leaves.append(Leaf(b, dist, count=10))
    root = DiscreteBranch(0, (0, 1), tuple(leaves), shares=priors)
    return JointModel(spec, (0, 1), schema, DensityTree(root, box), schema), priors, cpts


class TestCartModel:
    def test_classifier_path_probability(self):
        model = _cart_classifier()
        row = np.array([0.0, 0.3, 1.0])  # x = first value, c4 <= .5, q1 = 1
        assert model.cond_log_density(row) == pytest.approx(math.log(0.3))
        row2 = np.array([1.0, 0.3, 1.0])
        assert model.cond_log_density(row2) == pytest.approx(math.log(0.7))

    def test_independent_child_prunes_to_depth_zero(self):
        schema = VariableSchema([Variable("p", Continuous(0, 1)), Variable("y", Continuous(0, 1))])
        spec = ConditionalSpec(1, (0,))
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(500 + seed)
            vals = np.column_stack([rng.uniform(0, 1, 300), np.clip(rng.normal(0.5, 0.08, 300), 0, 1)])
            model = learn_cart(Dataset(schema, vals), spec, CondLearnConfig(leaf_family="gauss", seed=seed))
            wins += model.tree.n_leaves == 1
        assert wins >= 18

    def test_bimodal_conditional_beats_cart(self, mix_split):
        train, test = mix_split
        cart = learn_cart(train, SPEC2D, CondLearnConfig(leaf_family="gauss", seed=3))
        strat = learn_stratified(train, SPEC2D, CondLearnConfig(leaf_family="uniform", seed=3))
        ll_cart = cart.cond_log_density(test.values).sum()
        ll_strat = strat.cond_log_density(test.values).sum()
        assert ll_strat > ll_cart


class TestStratifiedModel:
    def test_proportion_rule_masses(self, rng):
        # 32 vs 8 points under the root child-branch: conditional masses .8/.2
        schema = VariableSchema([Variable("x", Continuous(0, 1))])
        pts = np.concatenate([rng.uniform(0.05, 0.15, 32), rng.uniform(0.85, 0.95, 8)])[:, None]
        cfg = GrowConfig(branch_vars=(0,), score_target="joint", leaf_family="uniform", seed=1, min_points=33)
        builder = DistLeafBuilder(schema, "uniform", (0,), cfg)
        tree = grow_tree(Dataset(schema, pts), schema.root_box(), cfg, builder)
        assert tree.n_leaves == 2
        assert [l.mass for l in tree.leaves] == [pytest.approx(0.8), pytest.approx(0.2)]

    def test_conditional_integrates_to_one(self, mix_split):
        train, _ = mix_split
        model = learn_stratified(train, SPEC2D, CondLearnConfig(leaf_family="linear", seed=5))
        probes = np.column_stack([np.zeros(200), np.linspace(0.001, 0.999, 200)])[:, ::-1]
        probes = np.column_stack([np.linspace(0.001, 0.999, 200), np.zeros(200)])
        vals = model.integrate_conditional(probes)
        assert np.all(np.abs(vals - 1.0) <= 1e-10)

    def test_mass_sums_per_child_subtree(self, mix_split):
        train, _ = mix_split
        model = learn_stratified(train, SPEC2D, CondLearnConfig(leaf_family="uniform", seed=5))

        def check(node):
            if is_leaf(node):
                return
            if node.shares is not None:  # child-only subtree root or below
                total = sum(l.mass for l in _leaves_under(node))
                assert total == pytest.approx(1.0, abs=1e-12)
                return
            for c in node.children:
                check(c)

        def _leaves_under(node):
            if is_leaf(node):
                return [node]
            out = []
            for c in node.children:
                out.extend(_leaves_under(c))
            return out

        check(model.tree.root)


class TestJointModelSpecialCases:
    def test_naive_bayes_posterior(self):
        model, priors, cpts = _naive_bayes_tree()
        for v in (0, 1, 2):
            den = priors[0] * cpts[0][v] + priors[1] * cpts[1][v]
            for y in (0, 1):
                row = np.array([float(y), float(v)])
                expected = math.log(priors[y] * cpts[y][v] / den)
                assert model.cond_log_density(row) == pytest.approx(expected, rel=1e-12)

    def test_gaussian_bayes_classifier(self):
        schema = VariableSchema([Variable("y", Discrete(2)), Variable("c", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        priors = (0.3, 0.7)
        params = ((0.3, 0.1), (0.7, 0.15))
        leaves = []
        for v in (0, 1):
            b = box.restrict_discrete(0, v)
            mu, sd = params[v]
            dist = LeafDistribution(
                disc_values={0: (v,)},
                disc_probs={0: np.array([1.0])},
                cont=DiagGaussianPart((1,), [mu], [sd]),
            )
            leaves.append(Leaf(b, dist, count=10))
        model = JointModel(
            spec, (0, 1), schema, DensityTree(DiscreteBranch(0, (0, 1), tuple(leaves), priors), box), schema
        )

        def trunc_pdf(x, mu, sd):
            z = ndtr((1 - mu) / sd) - ndtr((0 - mu) / sd)
            return math.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi) * z)

        for x in (0.2, 0.5, 0.8):
            lik = [priors[v] * trunc_pdf(x, *params[v]) for v in (0, 1)]
            for y in (0, 1):
                row = np.array([float(y), x])
                expected = math.log(lik[y] / sum(lik))
                assert model.cond_log_density(row) == pytest.approx(expected, rel=1e-10)


class TestExactConditional:
    def test_single_leaf_collapse(self):
        schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        leaf = Leaf(box, LeafDistribution(cont=UniformPart((0, 1))), count=5)
        model = JointModel(spec, (0, 1), schema, DensityTree(leaf, box), schema)
        counters = EvalCounters()
        got = model.cond_log_density(np.array([0.4, 0.6]), counters)
        assert got == pytest.approx(0.0)  # uniform conditional on [0,1]
        assert counters.leaves_visited == 1

    def test_stratified_structure_equivalence(self, rng):
        joint, strat = _stratified_joint_pair()
        pts = rng.random((100, 2))
        lj = joint.cond_log_density(pts)
        ls = strat.cond_log_density(pts)
        assert np.allclose(lj, ls, rtol=1e-12, atol=1e-12)

    def test_matches_grid_integration_oracle(self, mix_data, rng):
        train = Dataset(mix_data.schema, mix_data.values[:600])
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="linear", min_points=60, seed=7))
        assert model.tree.n_leaves <= 20
        queries = rng.uniform(0.01, 0.99, size=(200, 2))
        exact = model.cond_log_density(queries)
        # Oracle: numeric integral of the joint over the child, segmented at
        # leaf edges so the grid never straddles a density jump.
        edges = sorted({e for l in model.tree.leaves for e in l.box.subrange(1)})
        for i in range(0, 200, 10):
            x1 = queries[i, 0]
            marg = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                grid = np.linspace(lo + 1e-12, hi - 1e-12, 129)
                rows = np.column_stack([np.full_like(grid, x1), grid])
                marg += np.trapezoid(np.exp(model.joint_log_density(rows)), grid)
            point = np.exp(model.joint_log_density(queries[i]))
            assert np.exp(exact[i]) == pytest.approx(point / marg, rel=1e-4)

    def test_normalization_analytic(self, mix_split):
        train, _ = mix_split
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="multilinear", seed=9))
        probes = np.column_stack([np.linspace(0.001, 0.999, 300), np.zeros(300)])
        vals = model.integrate_conditional(probes)
        assert np.all(np.abs(vals - 1.0) <= 1e-8)


class TestMarginalization:
    def test_no_child_branch_isomorphic(self):
        schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        lo, hi, mid = box.split_continuous(1)
        tree = DensityTree(
            ContinuousBranch(
                1,
                mid,
                Leaf(lo, LeafDistribution(cont=UniformPart((0, 1))), 10),
                Leaf(hi, LeafDistribution(cont=UniformPart((0, 1))), 10),
                shares=(0.5, 0.5),
            ),
            box,
        )
        model = JointModel(spec, (0, 1), schema, tree, schema)
        marg = marginalize_structure(model)
        assert isinstance(marg, ContinuousBranch) and marg.var == 1
        assert isinstance(marg.low, MargLeaf) and marg.low.ids == frozenset({0})
        assert isinstance(marg.high, MargLeaf) and marg.high.ids == frozenset({1})

    def test_parent_split_above_child_splits(self):
        joint, _ = _stratified_joint_pair()
        marg = marginalize_structure(joint)
        assert isinstance(marg, ContinuousBranch) and marg.var == 1
        assert marg.low.ids == frozenset({0, 1})
        assert marg.high.ids == frozenset({2})

    def _marg_regions(self, marg, box):
        out = []

        def visit(node, b):
            if isinstance(node, MargLeaf):
                out.append((b, node.ids))
                return
            if isinstance(node, ContinuousBranch):
                a, c = b.subrange(node.var)
                visit(node.low, b.with_entry(node.var, (a, node.split)))
                visit(node.high, b.with_entry(node.var, (node.split, c)))
            else:
                for v, ch in zip(node.values, node.children):
                    visit(ch, b.restrict_discrete(node.var, v))

        visit(marg, box)
        return out

    def test_random_tree_ids_match_box_intersection_oracle(self, mix_data):
        train = Dataset(mix_data.schema, mix_data.values[:1500])
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="uniform", min_points=25, seed=13))
        marg = marginalize_structure(model)
        regions = self._marg_regions(marg, model.tree.root_box)
        seen = set()
        for region_box, ids in regions:
            expected = set()
            for leaf in model.tree.leaves:
                (a1, b1) = leaf.box.subrange(1)
                (a2, b2) = region_box.subrange(1)
                if min(b1, b2) - max(a1, a2) > 0:
                    expected.add(leaf.leaf_id)
            assert ids == frozenset(expected)
            seen |= expected
        assert seen == {l.leaf_id for l in model.tree.leaves}
        # regions partition parent space
        total = sum(b.width(1) for b, _ in regions)
        assert total == pytest.approx(1.0, abs=1e-12)


class TestRefineToAux:
    def test_singleton_needs_no_refinement(self):
        schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        leaf = Leaf(box, LeafDistribution(cont=UniformPart((0, 1))), 5)
        model = JointModel(spec, (0, 1), schema, DensityTree(leaf, box), schema)
        aux = refine_to_aux(marginalize_structure(model), model)
        assert len(aux.aux_leaves()) == 1
        assert aux.aux_leaves()[0].target == 0

    def test_k_contiguous_leaves_give_k_aux_leaves(self, mix_data):
        train = Dataset(mix_data.schema, mix_data.values[:1500])
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="linear", min_points=25, seed=17))
        marg = marginalize_structure(model)
        aux = refine_to_aux(marg, model)
        by_subtree = {}
        for al in aux.aux_leaves():
            by_subtree.setdefault(al.subtree_id, []).append(al)
        for sid, (root, box, ids) in enumerate(aux._subtree_info):
            assert len(by_subtree[sid]) == len(ids)

    def test_aux_leaf_boxes_partition_space(self, mix_data, rng):
        train = Dataset(mix_data.schema, mix_data.values[:1500])
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="linear", min_points=25, seed=17))
        aux = refine_to_aux(marginalize_structure(model), model)
        pts = rng.random((5000, 2))
        count = np.zeros(len(pts), dtype=int)
        boundary = np.zeros(len(pts), dtype=bool)
        for al in aux.aux_leaves():
            count += al.box.contains_mask(pts).astype(int)
            for c in (0, 1):
                a, b = al.box.subrange(c)
                boundary |= np.isclose(pts[:, c], a) | np.isclose(pts[:, c], b)
        assert np.all(count[~boundary] == 1)
        # every aux leaf's box meets exactly one joint leaf (positive measure)
        for al in aux.aux_leaves():
            hits = 0
            for leaf in model.tree.leaves:
                o0 = min(al.box.subrange(0)[1], leaf.box.subrange(0)[1]) - max(al.box.subrange(0)[0], leaf.box.subrange(0)[0])
                o1 = min(al.box.subrange(1)[1], leaf.box.subrange(1)[1]) - max(al.box.subrange(1)[0], leaf.box.subrange(1)[0])
                if o0 > 0 and o1 > 0:
                    hits += 1
            assert hits == 1


class TestSoftBranchCoefficients:
    def test_uniform_stratified_structure_is_exact(self, rng):
        joint, _ = _stratified_joint_pair()
        aux = refine_to_aux(marginalize_structure(joint), joint)
        data = Dataset(joint.frame_schema, rng.random((200, 2)))
        approx = estimate_soft_branch_coefs(aux, joint, data)
        pts = rng.random((100, 2))
        assert np.allclose(approx.cond_log_density(pts), joint.cond_log_density(pts), atol=1e-12)

    def test_single_leaf_coef_is_one(self):
        schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        leaf = Leaf(box, LeafDistribution(cont=UniformPart((0, 1))), 5)
        model = JointModel(spec, (0, 1), schema, DensityTree(leaf, box), schema)
        aux = refine_to_aux(marginalize_structure(model), model)
        approx = estimate_soft_branch_coefs(aux, model, Dataset(schema, np.zeros((0, 2))))
        assert approx.aux.aux_leaves()[0].coef == pytest.approx(1.0)
        assert approx.aux.fallback_subtrees == (0,)

    def test_center_fallback_flagged_and_exact_for_uniform(self, rng):
        joint, _ = _stratified_joint_pair()
        aux = refine_to_aux(marginalize_structure(joint), joint)
        empty = Dataset(joint.frame_schema, np.zeros((0, 2)))
        approx = estimate_soft_branch_coefs(aux, joint, empty)
        assert len(approx.aux.fallback_subtrees) == approx.aux.subtree_count
        pts = rng.random((50, 2))
        assert np.allclose(approx.cond_log_density(pts), joint.cond_log_density(pts), atol=1e-12)

    def test_close_to_exact_on_mixture(self, mix_split):
        train, test = mix_split
        cfg = CondLearnConfig(leaf_family="linear", seed=19)
        joint = learn_joint(train, SPEC2D, cfg)
        approx = learn_approx(train, SPEC2D, cfg)
        pts = test.values[:1000]
        diff = np.abs(approx.cond_log_density(pts) - joint.cond_log_density(pts))
        assert diff.mean() < 0.1

    def test_posterior_mean_variant_also_close(self, mix_split):
        train, test = mix_split
        cfg = CondLearnConfig(leaf_family="linear", seed=19, use_posterior_mean_coefs=True)
        joint = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="linear", seed=19))
        approx = learn_approx(train, SPEC2D, cfg)
        diff = np.abs(approx.cond_log_density(test.values[:500]) - joint.cond_log_density(test.values[:500]))
        assert diff.mean() < 0.2


class TestApproxEvaluation:
    def test_visits_exactly_one_leaf(self, mix_split):
        train, test = mix_split
        cfg = CondLearnConfig(leaf_family="linear", seed=23)
        approx = learn_approx(train, SPEC2D, cfg)
        joint = approx.joint
        ca, cj = EvalCounters(), EvalCounters()
        approx.cond_log_density(test.values, ca)
        joint.cond_log_density(test.values, cj)
        assert ca.mean_visited() == 1.0
        assert cj.mean_visited() > 1.0

    def test_normalization_defect_bounded(self, mix_split):
        train, _ = mix_split
        approx = learn_approx(train, SPEC2D, CondLearnConfig(leaf_family="linear", seed=23))
        probes = np.column_stack([np.linspace(0.01, 0.99, 200), np.zeros(200)])
        defect = np.abs(approx.integrate_conditional(probes) - 1.0)
        assert defect.max() <= 0.2

    def test_smoothed_never_minus_inf(self, mix_split):
        train, test = mix_split
        model = smooth_conditional(
            learn_approx(train, SPEC2D, CondLearnConfig(leaf_family="uniform", seed=3)), 1e-3
        )
        vals = model.cond_log_density(test.values)
        assert np.all(np.isfinite(vals))


class TestConditionalSampling:
    def test_single_leaf_matches_slice_distribution(self):
        schema = VariableSchema([Variable("x", Continuous(0, 1)), Variable("z", Continuous(0, 1))])
        spec = ConditionalSpec(0, (1,))
        box = schema.root_box()
        from denstree.leaves import MultilinearInterpPart

        dist = LeafDistribution(cont=MultilinearInterpPart((0, 1), [0.1, 0.2, 0.3, 0.4]))
        model = JointModel(spec, (0, 1), schema, DensityTree(Leaf(box, dist, 5), box), schema)
        rng = np.random.default_rng(4)
        row = np.array([0.0, 0.3])
        draws = np.array([model.cond_sample(row, rng) for _ in range(4000)])
        sl = dist.cond_slice(np.array([0.0, 0.3]), 0, box)
        cdf = lambda u: np.asarray([sl.mass(0.0, float(t)) for t in np.atleast_1d(u)])
        assert stats.kstest(draws, cdf).pvalue > 0.01

    def test_stratified_child_mass_frequencies(self):
        _, strat = _stratified_joint_pair()
        rng = np.random.default_rng(5)
        row = np.array([0.0, 0.25])  # parent in the low region
        draws = np.array([strat.cond_sample(row, rng) for _ in range(10_000)])
        f_low = (draws <= 0.5).mean()
        half = 2.576 * math.sqrt(0.3 * 0.7 / 10_000)
        assert abs(f_low - 0.3) < half

    def test_joint_exact_sampling_chi_square(self, mix_split):
        train, _ = mix_split
        model = learn_joint(train, SPEC2D, CondLearnConfig(leaf_family="linear", min_points=60, seed=29))
        rng = np.random.default_rng(6)
        row = np.zeros(2)
        row[0] = 0.3
        n = 8000
        draws = np.array([model.cond_sample(row, rng) for _ in range(n)])
        edges = np.linspace(0, 1, 13)
        observed, _ = np.histogram(draws, edges)
        expected = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, _ = quad(lambda c: math.exp(model.cond_log_density(np.array([0.3, c]))), lo, hi, limit=200)
            expected.append(val * n)
        expected = np.asarray(expected)
        expected *= observed.sum() / expected.sum()
        p = stats.chisquare(observed, expected).pvalue
        assert p > 0.01

    def test_approx_sampling_tracks_coefficients(self, mix_split):
        train, _ = mix_split
        approx = learn_approx(train, SPEC2D, CondLearnConfig(leaf_family="linear", seed=23))
        rng = np.random.default_rng(7)
        row = np.array([0.42, 0.0])
        draws = np.array([approx.cond_sample(row, rng) for _ in range(3000)])
        assert np.all((draws >= 0) & (draws <= 1))


class TestRowCap:
    def test_row_cap_subsamples_deterministically(self, mix_data):
        cfg = CondLearnConfig(leaf_family="uniform", seed=3, row_cap=400)
        m1 = learn_joint(mix_data, SPEC2D, cfg)
        m2 = learn_joint(mix_data, SPEC2D, cfg)
        pts = mix_data.values[:50]
        assert np.array_equal(m1.cond_log_density(pts), m2.cond_log_density(pts))
