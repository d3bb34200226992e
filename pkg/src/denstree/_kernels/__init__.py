"""Numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set DENSTREE_NO_EXT=1
to force the fallback.  Both backends implement the same contract and are
compared by tests/test_kernels.py and benchmarks/bench_kernels.py.
"""

import os

if os.environ.get("DENSTREE_NO_EXT"):
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
corner_basis = _impl.corner_basis
multilinear_density = _impl.multilinear_density
em_corner_weights = _impl.em_corner_weights


def available_backends():
    """Name -> module for every importable backend."""
    from . import _fallback

    out = {"python": _fallback}
    try:
        from . import _core  # type: ignore[attr-defined]

        out["compiled"] = _core
    except ImportError:
        pass
    return out
