"""Pure-numpy kernels for corner-weight interpolation leaves.

Same contract as the compiled extension in _core.pyx; used when the
extension is unavailable or disabled via DENSTREE_NO_EXT.
"""

import numpy as np

BACKEND = "python"


def corner_basis(u):
    """Basis values of the 2^d corner densities at unit-box points.

    u is (n, d) with entries in [0, 1].  Column c holds
    2^d * prod_j h_{c_j}(u_j) where h_1(t) = t, h_0(t) = 1 - t and c_j is
    bit j of c; each column integrates to 1 over the unit box.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    n, d = u.shape
    k = 1 << d
    out = np.full((n, k), float(k))
    for j in range(d):
        bit = (np.arange(k) >> j) & 1
        hj = np.where(bit[None, :] == 1, u[:, j : j + 1], 1.0 - u[:, j : j + 1])
        out *= hj
    return out


def multilinear_density(u, weights):
    """Unit-box density sum_c w_c g_c(u) at each point."""
    basis = corner_basis(u)
    return basis @ np.asarray(weights, dtype=np.float64)


def em_corner_weights(u, max_iters, rel_tol):
    """Fit corner weights by EM with the component densities held fixed.

    Starts from uniform weights; each step replaces the weights by the mean
    responsibilities.  Returns (weights, trace) where trace[t] is the data
    log-likelihood after t reweighting steps (trace[0] is the uniform
    starting point).  The trace is non-decreasing.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    n, d = u.shape
    k = 1 << d
    if n == 0:
        return np.full(k, 1.0 / k), np.zeros(1)
    basis = corner_basis(u)
    w = np.full(k, 1.0 / k)
    dens = basis @ w
    ll = float(np.log(dens).sum())
    trace = [ll]
    for _ in range(int(max_iters)):
        resp = basis * w
        resp /= dens[:, None]
        w = resp.mean(axis=0)
        dens = basis @ w
        new_ll = float(np.log(dens).sum())
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < rel_tol * max(1.0, abs(new_ll)):
            break
    return w, np.asarray(trace)
