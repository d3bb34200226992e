import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import nquad, quad

from denstree import _kernels
from denstree.errors import DataError
from denstree.leaves import (
    DiagGaussianPart,
    EmFitConfig,
    LeafDistribution,
    LinearInterpPart,
    MultilinearInterpPart,
    UniformPart,
    fit_diag_gaussian,
    fit_linear_interp_em,
    fit_linreg_gaussian,
    fit_multilinear_em,
    fit_multinomial,
    leaf_conditional_log_density,
    leaf_log_density,
    leaf_marginal_density,
    leaf_mass_in_subbox,
    sample_leaf,
)
from denstree.schema import Box, Continuous, Discrete, Variable, VariableSchema

CFG = EmFitConfig(seed=99)


def _box2d(x0=(0.0, 1.0), x1=(0.0, 1.0)):
    schema = VariableSchema([Variable("a", Continuous(0, 1)), Variable("b", Continuous(0, 1))])
    return Box(schema, [x0, x1])


def _rows(*cols):
    return np.column_stack([np.asarray(c, dtype=np.float64) for c in cols])


class TestFitMultinomial:
    def test_formula_by_hand(self):
        probs = fit_multinomial([0, 0, 0, 1], (0, 1), pseudo_count=1.0)
        assert np.allclose(probs, [4 / 6, 2 / 6])

    def test_uniform_limit_with_no_data(self):
        assert np.allclose(fit_multinomial([], (0, 1), 1.0), [0.5, 0.5])

    def test_half_pseudo(self):
        probs = fit_multinomial([0] * 10, (0, 1, 2), pseudo_count=0.5)
        assert np.allclose(probs, [10.5 / 11.5, 0.5 / 11.5, 0.5 / 11.5])

    def test_empty_admissible_set_rejected(self):
        with pytest.raises(DataError):
            fit_multinomial([0], (), 1.0)


class TestDiagGaussian:
    def test_symmetric_points_centered_and_normalized(self):
        box = _box2d()
        pts = _rows([0.4, 0.6, 0.45, 0.55], [0.3, 0.7, 0.2, 0.8])
        part = fit_diag_gaussian(pts, box)
        assert np.allclose(part.mean, [0.5, 0.5])
        dist = LeafDistribution(cont=part)
        val, _ = nquad(lambda a, b: math.exp(leaf_log_density(dist, np.array([a, b]), box)), [(0, 1), (0, 1)])
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_variance_floor_engaged(self):
        box = _box2d()
        pts = _rows([0.5, 0.5 + 1e-12, 0.5], [0.5, 0.5, 0.5 - 1e-12])
        part = fit_diag_gaussian(pts, box)
        assert np.all(part.std >= 1e-3 - 1e-12)
        dist = LeafDistribution(cont=part)
        assert np.isfinite(leaf_log_density(dist, np.array([0.5, 0.5]), box))

    def test_monte_carlo_recovery(self):
        # Oracle: draw from a known truncated Gaussian whose truncation is
        # negligible inside the box, so sample moments estimate mu/sigma.
        mu, sd, n = 0.5, 0.08, 10_000
        rng = np.random.default_rng(77)
        a, b = (0.0 - mu) / sd, (1.0 - mu) / sd
        draws = stats.truncnorm.rvs(a, b, loc=mu, scale=sd, size=(n, 2), random_state=rng)
        part = fit_diag_gaussian(draws, _box2d())
        se_mean = sd / math.sqrt(n)
        se_sd = sd / math.sqrt(2 * n)
        assert np.all(np.abs(part.mean - mu) < 3 * se_mean)
        assert np.all(np.abs(part.std - sd) < 3 * se_sd)

    def test_needs_two_points(self):
        with pytest.raises(DataError):
            fit_diag_gaussian(_rows([0.5], [0.5]), _box2d())


class TestLinRegGaussian:
    def test_exact_linear_fit(self):
        box = _box2d()
        x = np.linspace(0.1, 0.9, 30)
        pts = _rows(2 * x - 0.5, x)  # child col 0 = 2 * parent - 0.5
        part = fit_linreg_gaussian(pts, child=0, parent_dims=(1,), box=box)
        assert part.coefs[0] == pytest.approx(2.0, abs=1e-9)
        assert part.intercept == pytest.approx(-0.5, abs=1e-9)
        assert part.std == pytest.approx(1e-3)  # floored

    def test_constant_parent_falls_back(self):
        box = _box2d()
        pts = _rows([0.2, 0.4, 0.6, 0.8], [0.5, 0.5, 0.5, 0.5])
        part = fit_linreg_gaussian(pts, 0, (1,), box)
        assert part.constant_fallback
        assert part.coefs[0] == 0.0
        assert part.intercept == pytest.approx(0.5)

    def test_noisy_regression_within_3se(self):
        rng = np.random.default_rng(5)
        n, slope, intercept, noise = 4000, 0.6, 0.2, 0.05
        x = rng.uniform(0, 1, n)
        y = intercept + slope * x + rng.normal(0, noise, n)
        part = fit_linreg_gaussian(_rows(y, x), 0, (1,), _box2d())
        # Closed-form OLS standard error oracle.
        design = np.column_stack([np.ones(n), x])
        cov = noise**2 * np.linalg.inv(design.T @ design)
        assert abs(part.intercept - intercept) < 3 * math.sqrt(cov[0, 0])
        assert abs(part.coefs[0] - slope) < 3 * math.sqrt(cov[1, 1])

    def test_conditional_normalized_per_parent_value(self):
        box = _box2d()
        rng = np.random.default_rng(8)
        pts = _rows(rng.uniform(0, 1, 50), rng.uniform(0, 1, 50))
        part = fit_linreg_gaussian(pts, 0, (1,), box)
        dist = LeafDistribution(cont=part)
        for parent in [0.1, 0.5, 0.9]:
            val, _ = quad(
                lambda c: math.exp(leaf_conditional_log_density(dist, np.array([c, parent]), 0, box)), 0, 1
            )
            assert val == pytest.approx(1.0, abs=1e-9)


class TestEmFits:
    def test_all_points_at_corner_concentrates(self):
        box = _box2d()
        pts = np.full((40, 2), 1.0)
        part, trace = fit_multilinear_em(pts, box, CFG)
        assert part.weights[3] > 0.99

    def test_fit_matches_brute_force_oracle(self):
        # n below the cap, so the fit and the oracle see identical points.
        rng = np.random.default_rng(31)
        pts = rng.random((80, 2))
        part, _ = fit_multilinear_em(pts, _box2d(), CFG)
        w = np.full(4, 0.25)
        basis = _kernels.corner_basis(pts)
        ll = np.log(basis @ w).sum()
        for _ in range(CFG.max_iters):
            r = basis * w
            r /= r.sum(axis=1, keepdims=True)
            w = r.mean(axis=0)
            new_ll = np.log(basis @ w).sum()
            gain, ll = new_ll - ll, new_ll
            if gain < CFG.rel_tol * max(1.0, abs(new_ll)):
                break
        w = np.maximum(w, 1e-9)
        w /= w.sum()
        assert np.allclose(part.weights, w, atol=1e-12)

    def test_uniform_points_stay_near_uniform(self):
        # Fluctuation scales with the subsample cap, so use enough dims for
        # the cap to cover the draw; expected weights are the EM fixed point.
        d = 6
        schema = VariableSchema([Variable(f"v{i}", Continuous(0, 1)) for i in range(d)])
        box = Box.full(schema)
        pts = np.random.default_rng(7).random((1000, d))
        part, _ = fit_multilinear_em(pts, box, CFG)
        assert np.all(np.abs(part.weights - 1.0 / 2**d) < 0.05)

    def test_em_trace_monotone(self, rng):
        for _ in range(5):
            pts = rng.random((int(rng.integers(1, 200)), 2))
            _, trace = fit_multilinear_em(pts, _box2d(), CFG)
            assert np.all(np.diff(trace) >= -1e-9)

    def test_linear_interp_left_endpoint(self):
        box = _box2d()
        pts = _rows(np.zeros(30), np.linspace(0, 1, 30))
        part, _ = fit_linear_interp_em(pts, box, CFG)
        assert part.weights[0, 0] > 0.99  # dim 0 concentrated on the low end

    def test_linear_interp_uniform(self):
        d = 20  # per-dim point budget is 25 * 2 * d, shared across dims
        schema = VariableSchema([Variable(f"v{i}", Continuous(0, 1)) for i in range(d)])
        box = Box.full(schema)
        pts = np.random.default_rng(32).random((1000, d))
        part, _ = fit_linear_interp_em(pts, box, CFG)
        assert np.all(np.abs(part.weights - 0.5) < 0.05)

    def test_linear_density_nonnegative_and_normalized(self):
        rng = np.random.default_rng(14)
        part, _ = fit_linear_interp_em(rng.random((100, 2)), _box2d(), CFG)
        dist = LeafDistribution(cont=part)
        box = _box2d()
        val, _ = nquad(lambda a, b: math.exp(leaf_log_density(dist, np.array([a, b]), box)), [(0, 1), (0, 1)])
        assert val == pytest.approx(1.0, abs=1e-6)
        assert math.exp(leaf_log_density(dist, np.array([0.0, 1.0]), box)) >= 0.0

    def test_subsample_caps_enforced(self, monkeypatch):
        seen = []
        orig = _kernels.em_corner_weights

        def spy(u, max_iters, rel_tol):
            seen.append(u.shape[0])
            return orig(u, max_iters, rel_tol)

        rng = np.random.default_rng(15)
        pts = rng.random((5000, 2))
        import denstree.leaves as leaves_mod

        monkeypatch.setattr(leaves_mod._kernels, "em_corner_weights", spy)
        fit_multilinear_em(pts, _box2d(), CFG)
        assert seen[-1] == 25 * 2**2
        seen.clear()
        fit_linear_interp_em(pts, _box2d(), CFG)
        assert seen == [25 * 2 * 2, 25 * 2 * 2]

    def test_subsample_deterministic(self):
        rng = np.random.default_rng(16)
        pts = rng.random((5000, 2))
        p1, t1 = fit_multilinear_em(pts, _box2d(), CFG)
        p2, t2 = fit_multilinear_em(pts, _box2d(), CFG)
        assert np.array_equal(p1.weights, p2.weights)
        assert np.array_equal(t1, t2)


def _mixed_box():
    schema = VariableSchema(
        [Variable("a", Continuous(0, 1)), Variable("b", Continuous(0, 1)), Variable("q", Discrete(3))]
    )
    return Box(schema, [(0.0, 1.0), (0.25, 0.75), (0, 1, 2)])


class TestLeafLogDensity:
    def test_uniform_unit_box(self):
        box = _box2d()
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        assert leaf_log_density(dist, np.array([0.3, 0.9]), box) == pytest.approx(0.0)

    def test_multilinear_endpoint_value(self):
        schema = VariableSchema([Variable("a", Continuous(0, 1))])
        box = Box(schema, [(0.0, 1.0)])
        dist = LeafDistribution(cont=MultilinearInterpPart((0,), [0.0, 1.0]))
        assert leaf_log_density(dist, np.array([1.0]), box) == pytest.approx(math.log(2.0))

    def test_outside_box_is_minus_inf(self):
        box = _box2d((0.0, 0.5))
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        assert leaf_log_density(dist, np.array([0.75, 0.5]), box) == -np.inf

    def test_mixed_discrete_factor(self):
        box = _mixed_box()
        dist = LeafDistribution(
            disc_values={2: (0, 1, 2)},
            disc_probs={2: np.array([0.2, 0.3, 0.5])},
            cont=UniformPart((0, 1)),
        )
        got = leaf_log_density(dist, np.array([0.5, 0.5, 2.0]), box)
        assert got == pytest.approx(math.log(0.5) + math.log(1.0 / 0.5))


class TestMarginalAndConditional:
    def test_uniform_marginal(self):
        box = _box2d((0.0, 0.5), (0.0, 1.0))
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        assert leaf_marginal_density(dist, np.array([0.25, 0.0]), (0,), box) == pytest.approx(2.0)

    def test_symmetric_multilinear_marginal_uniform(self):
        box = _box2d()
        dist = LeafDistribution(cont=MultilinearInterpPart((0, 1), [0.25, 0.25, 0.25, 0.25]))
        for x in [0.1, 0.5, 0.9]:
            assert leaf_marginal_density(dist, np.array([x, 0.0]), (0,), box) == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "part",
        [
            UniformPart((0, 1)),
            MultilinearInterpPart((0, 1), [0.1, 0.4, 0.2, 0.3]),
            LinearInterpPart((0, 1), [[0.7, 0.3], [0.2, 0.8]]),
            DiagGaussianPart((0, 1), [0.4, 0.6], [0.2, 0.3]),
        ],
    )
    def test_marginal_matches_quadrature(self, part):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        dist = LeafDistribution(cont=part)
        for a in [0.25, 0.5, 0.75]:
            oracle, _ = quad(lambda b: math.exp(leaf_log_density(dist, np.array([a, b]), box)), 0.4, 1.0)
            got = leaf_marginal_density(dist, np.array([a, 0.0]), (0,), box)
            assert got == pytest.approx(oracle, abs=1e-6)

    def test_uniform_conditional_independent_of_parent(self):
        box = _box2d((0.0, 1.0), (0.25, 0.75))
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        for a in [0.1, 0.9]:
            got = leaf_conditional_log_density(dist, np.array([a, 0.5]), 1, box)
            assert got == pytest.approx(math.log(2.0))

    @pytest.mark.parametrize(
        "part",
        [
            MultilinearInterpPart((0, 1), [0.1, 0.4, 0.2, 0.3]),
            LinearInterpPart((0, 1), [[0.7, 0.3], [0.2, 0.8]]),
            DiagGaussianPart((0, 1), [0.4, 0.6], [0.2, 0.3]),
        ],
    )
    def test_conditional_times_marginal_is_joint(self, part, rng):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        dist = LeafDistribution(cont=part)
        pts = np.column_stack([rng.uniform(0.2, 0.8, 50), rng.uniform(0.4, 1.0, 50)])
        joint = np.exp(dist.log_density(pts, box))
        marg = dist.marginal_density(pts, (0,), box)
        cond = np.exp(dist.cond_log_density(pts, 1, box))
        assert np.allclose(cond * marg, joint, rtol=1e-12)

    @pytest.mark.parametrize(
        "part",
        [
            MultilinearInterpPart((0, 1), [0.1, 0.4, 0.2, 0.3]),
            DiagGaussianPart((0, 1), [0.4, 0.6], [0.2, 0.3]),
        ],
    )
    def test_conditional_integrates_to_one(self, part):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        dist = LeafDistribution(cont=part)
        for a in [0.3, 0.55, 0.79]:
            val, _ = quad(
                lambda b: math.exp(leaf_conditional_log_density(dist, np.array([a, b]), 1, box)), 0.4, 1.0
            )
            assert val == pytest.approx(1.0, abs=1e-9)


class TestMassInSubbox:
    def test_uniform_half_volume(self):
        box = _box2d()
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        sub = box.with_entry(0, (0.0, 0.5))
        assert leaf_mass_in_subbox(dist, sub, box) == pytest.approx(0.5)

    def test_full_box_is_one(self):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        for part in [
            UniformPart((0, 1)),
            MultilinearInterpPart((0, 1), [0.1, 0.4, 0.2, 0.3]),
            DiagGaussianPart((0, 1), [0.4, 0.6], [0.2, 0.3]),
        ]:
            assert leaf_mass_in_subbox(LeafDistribution(cont=part), box, box) == pytest.approx(1.0, abs=1e-12)

    def test_multilinear_random_subbox_matches_quadrature(self, rng):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        w = rng.dirichlet(np.ones(4))
        dist = LeafDistribution(cont=MultilinearInterpPart((0, 1), w))
        sub = box.with_entry(0, (0.3, 0.6)).with_entry(1, (0.5, 0.9))
        oracle, _ = nquad(lambda a, b: math.exp(leaf_log_density(dist, np.array([a, b]), box)), [(0.3, 0.6), (0.5, 0.9)])
        assert leaf_mass_in_subbox(dist, sub, box) == pytest.approx(oracle, abs=1e-8)

    @given(seed=st.integers(0, 500))
    def test_additive_over_partition(self, seed):
        rng = np.random.default_rng(seed)
        box = _box2d()
        w = rng.dirichlet(np.ones(4))
        dist = LeafDistribution(cont=MultilinearInterpPart((0, 1), w))
        cut0, cut1 = rng.uniform(0.2, 0.8, 2)
        total = 0.0
        for e0 in [(0.0, cut0), (cut0, 1.0)]:
            for e1 in [(0.0, cut1), (cut1, 1.0)]:
                total += leaf_mass_in_subbox(dist, box.with_entry(0, e0).with_entry(1, e1), box)
        assert total == pytest.approx(1.0, abs=1e-10)


class TestSampling:
    def test_uniform_ks(self):
        box = _box2d()
        dist = LeafDistribution(cont=UniformPart((0, 1)))
        rng = np.random.default_rng(20)
        draws = sample_leaf(dist, box, rng, 10_000)
        for dim in range(2):
            assert stats.kstest(draws[:, dim], "uniform").pvalue > 0.01

    def test_multilinear_corner_concentration_direction(self):
        box = _box2d()
        dist = LeafDistribution(cont=MultilinearInterpPart((0, 1), [0.0, 0.0, 0.0, 1.0]))
        rng = np.random.default_rng(21)
        draws = sample_leaf(dist, box, rng, 2000)
        assert draws[:, 0].mean() > 0.5 and draws[:, 1].mean() > 0.5

    def test_all_samples_inside_box(self):
        box = _box2d((0.2, 0.8), (0.4, 1.0))
        rng = np.random.default_rng(22)
        for part in [
            UniformPart((0, 1)),
            MultilinearInterpPart((0, 1), [0.1, 0.4, 0.2, 0.3]),
            LinearInterpPart((0, 1), [[0.7, 0.3], [0.2, 0.8]]),
            DiagGaussianPart((0, 1), [0.4, 0.6], [0.2, 0.3]),
        ]:
            draws = sample_leaf(LeafDistribution(cont=part), box, rng, 500)
            assert box.contains_mask(np.column_stack([draws[:, 0], draws[:, 1]])).all()

    def test_multilinear_ks_against_inverse_cdf(self):
        # 1-D linear density with known CDF as the distribution oracle.
        schema = VariableSchema([Variable("a", Continuous(0, 1))])
        box = Box(schema, [(0.0, 1.0)])
        w0, w1 = 0.3, 0.7
        dist = LeafDistribution(cont=MultilinearInterpPart((0,), [w0, w1]))
        rng = np.random.default_rng(23)
        draws = sample_leaf(dist, box, rng, 10_000)[:, 0]
        cdf = lambda u: w0 * (2 * u - u**2) + w1 * u**2
        assert stats.kstest(draws, cdf).pvalue > 0.01

    def test_discrete_sampling(self):
        box = _mixed_box()
        dist = LeafDistribution(
            disc_values={2: (0, 1, 2)}, disc_probs={2: np.array([0.2, 0.3, 0.5])}, cont=UniformPart((0, 1))
        )
        rng = np.random.default_rng(24)
        draws = sample_leaf(dist, box, rng, 5000)
        freq = np.array([(draws[:, 2] == v).mean() for v in (0, 1, 2)])
        assert np.all(np.abs(freq - [0.2, 0.3, 0.5]) < 0.03)
