"""Benchmark the compiled kernel extension against the pure-numpy fallback.

Workloads mirror the hot path of tree growing: many small corner-basis
evaluations, EM weight fits, and density sums.
"""

from __future__ import annotations

import time

import numpy as np

from ._kernels import BACKEND, available_backends


def _time_call(fn, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def run_benchmark(sizes=(64, 400, 4000), dims=(1, 2, 4), repeats=200, out=print):
    backends = available_backends()
    out(f"active backend: {BACKEND}; available: {', '.join(sorted(backends))}")
    header = f"{'op':<22}{'n':>7}{'d':>3}" + "".join(f"{name:>16}" for name in sorted(backends))
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    out(header)
    rng = np.random.default_rng(7)
    for d in dims:
        for n in sizes:
            u = rng.random((n, d))
            w = rng.dirichlet(np.ones(1 << d))
            for op, make in (
                ("corner_basis", lambda m: (lambda: m.corner_basis(u))),
                ("em_corner_weights", lambda m: (lambda: m.em_corner_weights(u, 10, 1e-6))),
                ("multilinear_density", lambda m: (lambda: m.multilinear_density(u, w))),
            ):
                times = {}
                for name in sorted(backends):
                    times[name] = _time_call(make(backends[name]), repeats)
                line = f"{op:<22}{n:>7}{d:>3}" + "".join(f"{times[name] * 1e6:>13.1f} us" for name in sorted(backends))
                if len(times) == 2:
                    line += f"{times['python'] / times['compiled']:>9.1f}x"
                out(line)
