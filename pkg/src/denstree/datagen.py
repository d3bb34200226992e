"""Synthetic dataset generators.

mixture2d: a fixed, documented 3-component Gaussian mixture on [0, 1]^2
whose conditional P(x2 | x1) is bimodal for low-to-mid x1 (two components
share x1 mass at different x2 levels).  Sampled by rejection into the box.

Profile stand-ins (bio / astro): randomly parameterized ground-truth
factored models matching the shape of two proprietary scientific datasets
(31 variables, 26 continuous / 68 variables, 65 continuous, discrete
arities 3..81).  The ground truth is returned alongside the sample so
learned models can be scored against an oracle.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError
from .schema import Continuous, Dataset, Discrete, Variable, VariableSchema

# Each component: (weight, m1, s1, intercept, slope, s_perp) with
# x1 ~ N(m1, s1) and x2 = intercept + slope * x1 + N(0, s_perp), i.e. a
# full-covariance Gaussian shaped as a slanted ridge.  Two crossing ridges
# plus a broad background: the conditional of x2 given x1 is sharply
# bimodal away from the crossing, with peak locations moving in x1.
MIX2D_COMPONENTS = (
    (0.40, 0.40, 0.22, 0.10, 0.80, 0.035),
    (0.40, 0.60, 0.22, 0.90, -0.80, 0.035),
    (0.20, 0.50, 0.40, 0.55, 0.00, 0.280),
)


def mixture2d_schema():
    return VariableSchema([Variable("x1", Continuous(0.0, 1.0)), Variable("x2", Continuous(0.0, 1.0))])


def mixture2d_density(points):
    """Unnormalized (pre-truncation) mixture density; the analytic oracle."""
    x = np.asarray(points, dtype=np.float64)
    dens = np.zeros(x.shape[0])
    for w, m1, s1, a, b, sp in MIX2D_COMPONENTS:
        t1 = (x[:, 0] - m1) / s1
        t2 = (x[:, 1] - (a + b * x[:, 0])) / sp
        dens += w * np.exp(-0.5 * (t1 * t1 + t2 * t2)) / (2 * math.pi * s1 * sp)
    return dens


def generate_mixture2d(n, seed):
    """Sample n points from the fixed mixture, rejected into [0, 1]^2."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 101]))
    weights = np.asarray([c[0] for c in MIX2D_COMPONENTS])
    out = np.empty((0, 2))
    while out.shape[0] < n:
        m = max(n - out.shape[0], 1024)
        comp = rng.choice(len(MIX2D_COMPONENTS), size=m, p=weights)
        pts = np.empty((m, 2))
        for k, (w, m1, s1, a, b, sp) in enumerate(MIX2D_COMPONENTS):
            rows = comp == k
            x1 = rng.normal(m1, s1, size=rows.sum())
            x2 = a + b * x1 + rng.normal(0.0, sp, size=rows.sum())
            pts[rows, 0] = x1
            pts[rows, 1] = x2
        keep = (pts >= 0.0).all(axis=1) & (pts <= 1.0).all(axis=1)
        out = np.vstack([out, pts[keep]])
    return Dataset(mixture2d_schema(), out[:n])


# ---------------------------------------------------------------------------
# profile stand-ins


PROFILES = {
    "bio": {"continuous": 26, "arities": (2, 3, 2, 3, 2), "default_n": 12671},
    "astro": {"continuous": 65, "arities": (3, 12, 81), "default_n": 10000},
}


class _ContNode:
    """Two-component truncated-Gaussian mixture whose mixing weight and
    means shift with the (rescaled) parent values."""

    def __init__(self, parents, rng):
        self.parents = tuple(parents)
        self.mu = np.sort(rng.uniform([0.12, 0.55], [0.45, 0.88]))
        self.sd = rng.uniform(0.04, 0.09, size=2)
        self.w_bias = rng.uniform(-0.5, 0.5)
        self.w_coef = rng.choice([-3.0, 3.0], size=len(self.parents))
        self.shift_coef = rng.uniform(-0.15, 0.15, size=len(self.parents))

    def _params(self, t):
        w = 1.0 / (1.0 + np.exp(-(self.w_bias + t @ self.w_coef)))
        shift = t @ self.shift_coef
        mu1 = np.clip(self.mu[0] + shift, 0.05, 0.95)
        mu2 = np.clip(self.mu[1] + shift, 0.05, 0.95)
        return w, mu1, mu2

    def log_density(self, xcol, t):
        w, mu1, mu2 = self._params(t)
        p = w * _trunc_norm_pdf(xcol, mu1, self.sd[0]) + (1 - w) * _trunc_norm_pdf(xcol, mu2, self.sd[1])
        return np.log(np.maximum(p, 1e-300))

    def sample(self, rng, t):
        w, mu1, mu2 = self._params(t)
        pick = rng.random(len(t)) < w
        mu = np.where(pick, mu1, mu2)
        sd = np.where(pick, self.sd[0], self.sd[1])
        lo, hi = ndtr((0.0 - mu) / sd), ndtr((1.0 - mu) / sd)
        r = lo + rng.random(len(t)) * (hi - lo)
        return np.clip(mu + sd * ndtri(np.clip(r, 1e-16, 1 - 1e-16)), 0.0, 1.0)


def _trunc_norm_pdf(x, mu, sd):
    z = ndtr((1.0 - mu) / sd) - ndtr((0.0 - mu) / sd)
    t = (x - mu) / sd
    return np.exp(-0.5 * t * t) / (sd * math.sqrt(2 * math.pi) * np.maximum(z, 1e-12))


class _DiscNode:
    """Multinomial whose logits shift linearly with rescaled parent values."""

    def __init__(self, arity, parents, rng):
        self.arity = arity
        self.parents = tuple(parents)
        self.base = rng.normal(0.0, 1.0, size=arity)
        self.coefs = rng.normal(0.0, 2.0, size=(len(self.parents), arity))

    def _probs(self, t):
        logits = self.base[None, :] + t @ self.coefs
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)

    def log_density(self, xcol, t):
        p = self._probs(t)
        return np.log(np.maximum(p[np.arange(len(xcol)), xcol.astype(np.int64)], 1e-300))

    def sample(self, rng, t):
        p = self._probs(t)
        r = rng.random((len(t), 1))
        return (p.cumsum(axis=1) < r).sum(axis=1).astype(np.float64)


class GroundTruthModel:
    """A random factored generator with exact log-density for oracle scoring."""

    def __init__(self, schema, nodes, parent_sets):
        self.schema = schema
        self.nodes = nodes
        self.parent_sets = parent_sets

    def _rescaled_parents(self, x, v):
        parents = self.parent_sets[v]
        if not parents:
            return np.zeros((x.shape[0], 0))
        cols = []
        for p in parents:
            col = x[:, p]
            if self.schema.is_discrete(p):
                col = col / max(self.schema.arity(p) - 1, 1)
            cols.append(col)
        return np.column_stack(cols)

    def log_density(self, points):
        x = np.asarray(points, dtype=np.float64)
        out = np.zeros(x.shape[0])
        for v, node in enumerate(self.nodes):
            out += node.log_density(x[:, v], self._rescaled_parents(x, v))
        return out

    def sample(self, rng, n):
        x = np.zeros((n, self.schema.width))
        for v, node in enumerate(self.nodes):
            x[:, v] = node.sample(rng, self._rescaled_parents(x, v))
        return x


def standin_schema(profile):
    try:
        spec = PROFILES[profile]
    except KeyError:
        raise ConfigError(f"unknown profile {profile!r}") from None
    variables = [Variable(f"c{i:02d}", Continuous(0.0, 1.0)) for i in range(spec["continuous"])]
    variables += [Variable(f"d{i}", Discrete(a)) for i, a in enumerate(spec["arities"])]
    return VariableSchema(variables)


def make_ground_truth(profile, seed):
    schema = standin_schema(profile)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 103]))
    nodes = []
    parent_sets = []
    for v, var in enumerate(schema.variables):
        k = int(rng.integers(0, min(2, v) + 1)) if v else 0
        parents = tuple(int(p) for p in sorted(rng.choice(v, size=k, replace=False))) if k else ()
        parent_sets.append(parents)
        if var.is_discrete:
            nodes.append(_DiscNode(var.kind.arity, parents, rng))
        else:
            nodes.append(_ContNode(parents, rng))
    return GroundTruthModel(schema, nodes, parent_sets)


def generate_standin(profile, n, seed):
    """Sample a profile-shaped dataset; returns (dataset, ground_truth)."""
    if n is None:
        n = PROFILES[profile]["default_n"]
    truth = make_ground_truth(profile, seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 104]))
    return Dataset(truth.schema, truth.sample(rng, n)), truth
