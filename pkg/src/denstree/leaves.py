"""Leaf distributions: representation, maximum-likelihood fitting, and
analytic queries (density, marginals, conditionals, masses, sampling).

Every leaf models its discrete variables as independent multinomials over
the leaf's admissible sets.  The continuous part is one of: uniform over
the leaf box, truncated diagonal Gaussian, Gaussian whose mean is a linear
function of continuous parents (conditional-only), per-dimension linear
interpolation, or multilinear interpolation between the 2^d corners of the
box.  Interpolating parts are fixed-component mixtures fitted by EM; the
log-likelihood is convex in the weights, so the uniform start is only a
matter of iteration count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .errors import DataError, InternalError

_LOG_2PI = math.log(2.0 * math.pi)
_WEIGHT_FLOOR = 1e-9
_TINY = 1e-300


@dataclass(frozen=True)
class EmFitConfig:
    """Knobs for fixed-component EM fits.

    Subsampling caps keep leaf fitting cheap near the root: at most
    25 * 2^d points for a d-dimensional multilinear fit and 25 * 2 * d for
    the per-dimension linear fit.
    """

    max_iters: int = 10
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise DataError("max_iters must be >= 1")

    @staticmethod
    def cap_multilinear(d):
        return 25 * (1 << d)

    @staticmethod
    def cap_linear(d):
        return 25 * 2 * d

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def _unit_coords(x, box, dims):
    u = np.empty((x.shape[0], len(dims)))
    for p, c in enumerate(dims):
        a, b = box.subrange(c)
        u[:, p] = (x[:, c] - a) / (b - a)
    return u


def _hat_cdf(u, bit):
    # Integral of the normalized 1-D hat basis from the left edge.
    return u * u if bit else u * (2.0 - u)


class UniformPart:
    """Constant density over the box's continuous dims."""

    name = "uniform"

    def __init__(self, dims):
        self.dims = tuple(dims)

    def log_density(self, x, box):
        return np.full(x.shape[0], -math.log(box.volume(self.dims)))

    def marginal_density(self, x, keep, box):
        return np.full(x.shape[0], 1.0 / box.volume(keep))

    def cond_log_density(self, x, child, box):
        return np.full(x.shape[0], -math.log(box.width(child)))

    def mass(self, box, sub):
        return sub.volume(self.dims) / box.volume(self.dims)

    def cond_slice(self, row, child, box):
        a, b = box.subrange(child)
        return LinearSlice(a, b, 0.5, 0.5)

    def sample(self, rng, box, n):
        out = np.empty((n, len(self.dims)))
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            out[:, p] = rng.uniform(a, b, size=n)
        return out


class DiagGaussianPart:
    """Independent per-dim Gaussians renormalized over the box."""

    name = "gauss"

    def __init__(self, dims, mean, std):
        self.dims = tuple(dims)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    def _dim_logdens(self, xcol, p, c, box):
        a, b = box.subrange(c)
        mu, sd = self.mean[p], self.std[p]
        z = ndtr((b - mu) / sd) - ndtr((a - mu) / sd)
        t = (xcol - mu) / sd
        return -0.5 * t * t - math.log(sd) - 0.5 * _LOG_2PI - math.log(max(z, _TINY))

    def log_density(self, x, box):
        out = np.zeros(x.shape[0])
        for p, c in enumerate(self.dims):
            out += self._dim_logdens(x[:, c], p, c, box)
        return out

    def marginal_density(self, x, keep, box):
        out = np.zeros(x.shape[0])
        for c in keep:
            p = self.dims.index(c)
            out += self._dim_logdens(x[:, c], p, c, box)
        return np.exp(out)

    def cond_log_density(self, x, child, box):
        p = self.dims.index(child)
        return self._dim_logdens(x[:, child], p, child, box)

    def mass(self, box, sub):
        m = 1.0
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            s, t = sub.subrange(c)
            mu, sd = self.mean[p], self.std[p]
            z = ndtr((b - mu) / sd) - ndtr((a - mu) / sd)
            m *= (ndtr((t - mu) / sd) - ndtr((s - mu) / sd)) / max(z, _TINY)
        return m

    def cond_slice(self, row, child, box):
        p = self.dims.index(child)
        a, b = box.subrange(child)
        return TruncNormSlice(a, b, self.mean[p], self.std[p])

    def sample(self, rng, box, n):
        out = np.empty((n, len(self.dims)))
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            mu, sd = self.mean[p], self.std[p]
            lo, hi = ndtr((a - mu) / sd), ndtr((b - mu) / sd)
            r = rng.uniform(lo, hi, size=n)
            out[:, p] = np.clip(mu + sd * ndtri(r), a, b)
        return out


class LinRegGaussianPart:
    """Gaussian over the child whose mean is linear in continuous parents.

    A conditional-only density: it integrates to 1 over the child subrange
    at every parent value (the truncation normalizer is computed per
    evaluation point).  Joint queries (marginals, box masses) are undefined.
    """

    name = "linreg"

    def __init__(self, child, parent_dims, coefs, intercept, std, constant_fallback=False):
        self.dims = (child,)
        self.child = child
        self.parent_dims = tuple(parent_dims)
        self.coefs = np.asarray(coefs, dtype=np.float64)
        self.intercept = float(intercept)
        self.std = float(std)
        self.constant_fallback = bool(constant_fallback)

    def _mean(self, x):
        m = np.full(x.shape[0], self.intercept)
        for p, c in enumerate(self.parent_dims):
            m += self.coefs[p] * x[:, c]
        return m

    def log_density(self, x, box):
        a, b = box.subrange(self.child)
        mu = self._mean(x)
        sd = self.std
        z = ndtr((b - mu) / sd) - ndtr((a - mu) / sd)
        t = (x[:, self.child] - mu) / sd
        return -0.5 * t * t - math.log(sd) - 0.5 * _LOG_2PI - np.log(np.maximum(z, _TINY))

    def cond_log_density(self, x, child, box):
        if child != self.child:
            raise InternalError("regression leaf conditions only on its child dim")
        return self.log_density(x, box)

    def marginal_density(self, x, keep, box):
        raise InternalError("regression leaves define no joint density")

    def mass(self, box, sub):
        raise InternalError("regression leaves define no joint density")

    def cond_slice(self, row, child, box):
        a, b = box.subrange(self.child)
        mu = float(self._mean(np.asarray(row, dtype=np.float64)[None, :])[0])
        return TruncNormSlice(a, b, mu, self.std)

    def sample(self, rng, box, n):
        raise InternalError("regression leaves are sampled via cond_slice")


class LinearInterpPart:
    """Independent per-dimension linear densities (2-component hat mixtures)."""

    name = "linear"

    def __init__(self, dims, weights):
        self.dims = tuple(dims)
        self.weights = np.asarray(weights, dtype=np.float64).reshape(len(self.dims), 2)

    def _dim_density(self, xcol, p, c, box):
        a, b = box.subrange(c)
        u = (xcol - a) / (b - a)
        w0, w1 = self.weights[p]
        return (w0 * 2.0 * (1.0 - u) + w1 * 2.0 * u) / (b - a)

    def log_density(self, x, box):
        out = np.zeros(x.shape[0])
        for p, c in enumerate(self.dims):
            out += np.log(np.maximum(self._dim_density(x[:, c], p, c, box), _TINY))
        return out

    def marginal_density(self, x, keep, box):
        out = np.ones(x.shape[0])
        for c in keep:
            p = self.dims.index(c)
            out *= self._dim_density(x[:, c], p, c, box)
        return out

    def cond_log_density(self, x, child, box):
        p = self.dims.index(child)
        return np.log(np.maximum(self._dim_density(x[:, child], p, child, box), _TINY))

    def mass(self, box, sub):
        m = 1.0
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            s, t = sub.subrange(c)
            us, ut = (s - a) / (b - a), (t - a) / (b - a)
            w0, w1 = self.weights[p]
            m *= w0 * (_hat_cdf(ut, 0) - _hat_cdf(us, 0)) + w1 * (_hat_cdf(ut, 1) - _hat_cdf(us, 1))
        return m

    def cond_slice(self, row, child, box):
        p = self.dims.index(child)
        a, b = box.subrange(child)
        w0, w1 = self.weights[p]
        return LinearSlice(a, b, w0, w1)

    def sample(self, rng, box, n):
        out = np.empty((n, len(self.dims)))
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            w0, w1 = self.weights[p]
            comp = rng.random(n) < w1
            r = rng.random(n)
            u = np.where(comp, np.sqrt(r), 1.0 - np.sqrt(1.0 - r))
            out[:, p] = a + u * (b - a)
        return out


class MultilinearInterpPart:
    """Interpolation between the 2^d corner densities of the box.

    Corner c has basis g_c(x) = (2^d / Vol) * prod_j h_{c_j}(u_j) with bit j
    of c selecting the rising or falling hat along dim j; each basis
    integrates to 1 over the box, so any simplex weight vector is a density.
    """

    name = "multilinear"

    def __init__(self, dims, weights):
        self.dims = tuple(dims)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (1 << len(self.dims),):
            raise InternalError("corner weight vector has wrong length")

    def log_density(self, x, box):
        u = _unit_coords(x, box, self.dims)
        dens = _kernels.multilinear_density(u, self.weights) / box.volume(self.dims)
        return np.log(np.maximum(dens, _TINY))

    def _collapsed_weights(self, keep):
        """Sum weights over the bits of dropped dims; keeps dim order."""
        w = self.weights
        positions = [self.dims.index(c) for c in keep]
        d = len(self.dims)
        k = 1 << d
        kk = 1 << len(positions)
        out = np.zeros(kk)
        for c in range(k):
            cc = 0
            for i, p in enumerate(positions):
                if (c >> p) & 1:
                    cc |= 1 << i
            out[cc] += w[c]
        return out

    def marginal_density(self, x, keep, box):
        keep = tuple(keep)
        if not keep:
            return np.ones(x.shape[0])
        w = self._collapsed_weights(keep)
        u = _unit_coords(x, box, keep)
        return _kernels.multilinear_density(u, w) / box.volume(keep)

    def _cond_pair(self, x, child, box):
        """Per-row (q0, q1) simplex weights of the 1-D conditional slice."""
        parents = tuple(c for c in self.dims if c != child)
        p_child = self.dims.index(child)
        if parents:
            upar = _unit_coords(x, box, parents)
            basis = _kernels.corner_basis(upar)  # (n, 2^(d-1)), scaled by 2^(d-1)
        else:
            basis = np.ones((x.shape[0], 1))
        d = len(self.dims)
        idx0, idx1 = [], []
        for cc in range(1 << (d - 1)):
            c = 0
            for i, pd in enumerate(parents):
                if (cc >> i) & 1:
                    c |= 1 << self.dims.index(pd)
            idx0.append(c)
            idx1.append(c | (1 << p_child))
        v0 = basis @ self.weights[idx0]
        v1 = basis @ self.weights[idx1]
        tot = v0 + v1
        tot = np.maximum(tot, _TINY)
        return v0 / tot, v1 / tot

    def cond_log_density(self, x, child, box):
        q0, q1 = self._cond_pair(x, child, box)
        a, b = box.subrange(child)
        u = (x[:, child] - a) / (b - a)
        dens = (q0 * 2.0 * (1.0 - u) + q1 * 2.0 * u) / (b - a)
        return np.log(np.maximum(dens, _TINY))

    def mass(self, box, sub):
        d = len(self.dims)
        factors = np.ones(1 << d)
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            s, t = sub.subrange(c)
            us, ut = (s - a) / (b - a), (t - a) / (b - a)
            bit = (np.arange(1 << d) >> p) & 1
            seg = np.where(
                bit == 1,
                _hat_cdf(ut, 1) - _hat_cdf(us, 1),
                _hat_cdf(ut, 0) - _hat_cdf(us, 0),
            )
            factors *= seg
        return float(self.weights @ factors)

    def cond_slice(self, row, child, box):
        q0, q1 = self._cond_pair(np.asarray(row, dtype=np.float64)[None, :], child, box)
        a, b = box.subrange(child)
        return LinearSlice(a, b, float(q0[0]), float(q1[0]))

    def sample(self, rng, box, n):
        d = len(self.dims)
        corners = rng.choice(1 << d, size=n, p=self.weights / self.weights.sum())
        out = np.empty((n, d))
        r = rng.random((n, d))
        for p, c in enumerate(self.dims):
            a, b = box.subrange(c)
            bit = (corners >> p) & 1
            u = np.where(bit == 1, np.sqrt(r[:, p]), 1.0 - np.sqrt(1.0 - r[:, p]))
            out[:, p] = a + u * (b - a)
        return out


class LinearSlice:
    """1-D density q0*phi0 + q1*phi1 over [a, b]; closed-form CDF (quadratic)."""

    def __init__(self, a, b, q0, q1):
        self.a, self.b = float(a), float(b)
        self.q0, self.q1 = float(q0), float(q1)

    def logpdf(self, x):
        u = (np.asarray(x, dtype=np.float64) - self.a) / (self.b - self.a)
        dens = (self.q0 * 2.0 * (1.0 - u) + self.q1 * 2.0 * u) / (self.b - self.a)
        return np.log(np.maximum(dens, _TINY))

    def _cdf(self, x):
        u = (x - self.a) / (self.b - self.a)
        return self.q0 * _hat_cdf(u, 0) + self.q1 * _hat_cdf(u, 1)

    def mass(self, s, t):
        return self._cdf(t) - self._cdf(s)

    def sample(self, rng, n, s=None, t=None):
        s = self.a if s is None else s
        t = self.b if t is None else t
        lo, hi = self._cdf(s), self._cdf(t)
        rp = lo + rng.random(n) * (hi - lo)
        dq = self.q1 - self.q0
        if abs(dq) < 1e-12:
            u = rp / max(2.0 * self.q0, _TINY)
        else:
            u = (-self.q0 + np.sqrt(self.q0 * self.q0 + dq * rp)) / dq
        return self.a + np.clip(u, 0.0, 1.0) * (self.b - self.a)


class TruncNormSlice:
    """1-D Gaussian renormalized over [a, b]."""

    def __init__(self, a, b, mu, sd):
        self.a, self.b = float(a), float(b)
        self.mu, self.sd = float(mu), float(sd)
        self.z = max(ndtr((self.b - self.mu) / self.sd) - ndtr((self.a - self.mu) / self.sd), _TINY)

    def logpdf(self, x):
        t = (np.asarray(x, dtype=np.float64) - self.mu) / self.sd
        return -0.5 * t * t - math.log(self.sd) - 0.5 * _LOG_2PI - math.log(self.z)

    def mass(self, s, t):
        return (ndtr((t - self.mu) / self.sd) - ndtr((s - self.mu) / self.sd)) / self.z

    def sample(self, rng, n, s=None, t=None):
        s = self.a if s is None else s
        t = self.b if t is None else t
        lo, hi = ndtr((s - self.mu) / self.sd), ndtr((t - self.mu) / self.sd)
        r = lo + rng.random(n) * (hi - lo)
        return np.clip(self.mu + self.sd * ndtri(np.clip(r, 1e-16, 1.0 - 1e-16)), s, t)


class DiscreteSlice:
    """Multinomial over an admissible value list; the discrete analogue of a slice."""

    def __init__(self, values, probs):
        self.values = tuple(values)
        self.probs = np.asarray(probs, dtype=np.float64)

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        idx = np.searchsorted(vals, x)
        idx = np.clip(idx, 0, len(vals) - 1)
        p = np.where(vals[idx] == x, self.probs[idx], 0.0)
        return np.log(np.maximum(p, _TINY))

    def sample(self, rng, n):
        tot = self.probs.sum()
        picks = rng.choice(len(self.values), size=n, p=self.probs / tot)
        return np.asarray(self.values, dtype=np.float64)[picks]


class LeafDistribution:
    """Composite leaf model: independent multinomials plus a continuous part.

    disc_values/disc_probs map a frame column to its sorted admissible
    values and fitted probabilities.  cont may be None for discrete-only
    leaves.  em_trace, when present, records the fit's log-likelihood per
    EM iteration.
    """

    __slots__ = ("disc_values", "disc_probs", "cont", "em_trace", "fit_notes")

    def __init__(self, disc_values=None, disc_probs=None, cont=None, em_trace=None, fit_notes=None):
        self.disc_values = dict(disc_values or {})
        self.disc_probs = {c: np.asarray(p, dtype=np.float64) for c, p in (disc_probs or {}).items()}
        self.cont = cont
        self.em_trace = em_trace
        self.fit_notes = fit_notes or {}

    @property
    def family(self):
        return self.cont.name if self.cont is not None else "discrete"

    def modeled_cols(self):
        cols = set(self.disc_probs)
        if self.cont is not None:
            cols.update(self.cont.dims)
        return cols

    def _disc_logprob(self, x, cols):
        out = np.zeros(x.shape[0])
        for c in cols:
            vals = np.asarray(self.disc_values[c], dtype=np.float64)
            idx = np.clip(np.searchsorted(vals, x[:, c]), 0, len(vals) - 1)
            p = np.where(vals[idx] == x[:, c], self.disc_probs[c][idx], 0.0)
            out += np.log(np.maximum(p, _TINY))
        return out

    def log_density(self, x, box):
        out = self._disc_logprob(x, self.disc_probs.keys())
        if self.cont is not None:
            out += self.cont.log_density(x, box)
        return out

    def marginal_density(self, x, keep, box):
        disc_keep = [c for c in keep if c in self.disc_probs]
        cont_keep = [c for c in keep if self.cont is not None and c in self.cont.dims]
        out = np.exp(self._disc_logprob(x, disc_keep))
        if cont_keep:
            out = out * self.cont.marginal_density(x, tuple(cont_keep), box)
        return out

    def cond_log_density(self, x, child, box):
        if child in self.disc_probs:
            return self._disc_logprob(x, [child])
        if self.cont is None or child not in self.cont.dims:
            raise InternalError(f"leaf does not model column {child}")
        return self.cont.cond_log_density(x, child, box)

    def mass_in_subbox(self, box, sub):
        m = 1.0
        for c, probs in self.disc_probs.items():
            vals = self.disc_values[c]
            keep = set(sub.values(c))
            m *= sum(p for v, p in zip(vals, probs) if v in keep)
        if self.cont is not None:
            m *= self.cont.mass(box, sub)
        return m

    def cond_slice(self, row, child, box):
        if child in self.disc_probs:
            return DiscreteSlice(self.disc_values[child], self.disc_probs[child])
        return self.cont.cond_slice(row, child, box)

    def sample(self, rng, box, n):
        width = box.schema.width
        out = np.full((n, width), np.nan)
        for c, probs in self.disc_probs.items():
            vals = np.asarray(self.disc_values[c], dtype=np.float64)
            out[:, c] = vals[rng.choice(len(vals), size=n, p=probs / probs.sum())]
        if self.cont is not None:
            cont = self.cont.sample(rng, box, n)
            for p, c in enumerate(self.cont.dims):
                out[:, c] = cont[:, p]
        return out


# ---------------------------------------------------------------------------
# fitting


def fit_multinomial(values, admissible, pseudo_count=1.0):
    """Smoothed multinomial: p_v = (count_v + pseudo) / (n + pseudo * k)."""
    admissible = tuple(sorted(admissible))
    if not admissible:
        raise DataError("empty admissible set")
    values = np.asarray(values, dtype=np.float64)
    vals = np.asarray(admissible, dtype=np.float64)
    counts = (values[:, None] == vals[None, :]).sum(axis=0) if len(values) else np.zeros(len(vals))
    n = len(values)
    k = len(admissible)
    return (counts + pseudo_count) / (n + pseudo_count * k)


def _variance_floor(box, col, floor_scale):
    lo, hi = box.schema.bounds(col)
    return (floor_scale * (hi - lo)) ** 2


def fit_diag_gaussian(points, box, dims=None, floor_scale=1e-3):
    """Per-dim sample mean/variance, variance floored, truncated over the box."""
    dims = tuple(dims) if dims is not None else box.schema.continuous_cols
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] < 2:
        raise DataError("diagonal Gaussian fit requires at least 2 points")
    mean = np.empty(len(dims))
    std = np.empty(len(dims))
    for p, c in enumerate(dims):
        col = points[:, c]
        mean[p] = col.mean()
        var = max(col.var(), _variance_floor(box, c, floor_scale))
        std[p] = math.sqrt(var)
    return DiagGaussianPart(dims, mean, std)


def fit_linreg_gaussian(points, child, parent_dims, box, floor_scale=1e-3):
    """Least-squares child mean over continuous parents; falls back to a
    constant mean when the design is rank-deficient."""
    parent_dims = tuple(parent_dims)
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < len(parent_dims) + 2:
        raise DataError("regression fit requires at least n_parents + 2 points")
    y = points[:, child]
    design = np.column_stack([np.ones(n)] + [points[:, c] for c in parent_dims])
    sol, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    fallback = rank < design.shape[1]
    if fallback:
        sol = np.zeros(design.shape[1])
        sol[0] = y.mean()
    resid = y - design @ sol
    var = max(float((resid**2).mean()), _variance_floor(box, child, floor_scale))
    return LinRegGaussianPart(child, parent_dims, sol[1:], sol[0], math.sqrt(var), fallback)


def _subsample(points, cap, seed):
    n = points.shape[0]
    if n <= cap:
        return points
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 11, n]))
    idx = rng.choice(n, size=cap, replace=False)
    idx.sort()
    return points[idx]


def _floor_simplex(w):
    w = np.maximum(w, _WEIGHT_FLOOR)
    return w / w.sum()


def fit_multilinear_em(points, box, config, dims=None):
    """Corner-weight fit by EM; subsampled to 25 * 2^d points when larger."""
    dims = tuple(dims) if dims is not None else box.schema.continuous_cols
    d = len(dims)
    if d < 1:
        raise DataError("multilinear fit needs at least one continuous dim")
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return MultilinearInterpPart(dims, np.full(1 << d, 1.0 / (1 << d))), np.zeros(1)
    sub = _subsample(points, EmFitConfig.cap_multilinear(d), config.seed)
    u = _unit_coords(sub, box, dims)
    w, trace = _kernels.em_corner_weights(u, config.max_iters, config.rel_tol)
    return MultilinearInterpPart(dims, _floor_simplex(w)), trace


def fit_linear_interp_em(points, box, config, dims=None):
    """Per-dimension 2-component hat fit; shares one subsample across dims."""
    dims = tuple(dims) if dims is not None else box.schema.continuous_cols
    d = len(dims)
    if d < 1:
        raise DataError("linear-interpolation fit needs at least one continuous dim")
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return LinearInterpPart(dims, np.full((d, 2), 0.5)), np.zeros(1)
    sub = _subsample(points, EmFitConfig.cap_linear(d), config.seed)
    weights = np.empty((d, 2))
    traces = []
    for p, c in enumerate(dims):
        u = _unit_coords(sub, box, (c,))
        w, tr = _kernels.em_corner_weights(u, config.max_iters, config.rel_tol)
        weights[p] = _floor_simplex(w)
        traces.append(tr)
    # Align traces on the longest and sum; each is monotone, so the sum is.
    m = max(len(t) for t in traces)
    total = np.zeros(m)
    for t in traces:
        padded = np.concatenate([t, np.full(m - len(t), t[-1])])
        total += padded
    return LinearInterpPart(dims, weights), total


# ---------------------------------------------------------------------------
# public query operations


def _as_rows(point):
    x = np.asarray(point, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def leaf_log_density(dist, point, box):
    """Log density given the leaf; -inf for points outside the box."""
    x, single = _as_rows(point)
    out = np.where(box.contains_mask(x), dist.log_density(x, box), -np.inf)
    return float(out[0]) if single else out


def leaf_marginal_density(dist, point, keep_cols, box):
    """Exact analytic marginal onto keep_cols (mixed discrete/continuous)."""
    x, single = _as_rows(point)
    out = dist.marginal_density(x, tuple(keep_cols), box)
    return float(out[0]) if single else out


def leaf_conditional_log_density(dist, point, child, box):
    """Log of joint / marginal for one child column; closed form per variant."""
    x, single = _as_rows(point)
    out = dist.cond_log_density(x, child, box)
    return float(out[0]) if single else out


def leaf_mass_in_subbox(dist, subbox, box):
    """Exact integral of the leaf density over a nested sub-box."""
    if not subbox.is_inside(box):
        raise DataError("subbox must be nested inside the leaf box")
    return dist.mass_in_subbox(box, subbox)


def sample_leaf(dist, box, rng, n=1):
    """Rows sampled from the leaf; unmodeled columns are NaN."""
    return dist.sample(rng, box, n)
