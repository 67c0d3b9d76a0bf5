"""Kernel backend selection: compiled extension when available.

Set SAFESTEP_BACKEND=python to force the numpy fallback, or =cython to
make a missing extension an error instead of a silent fallback.
"""

import os

_requested = os.environ.get("SAFESTEP_BACKEND", "auto").lower()

if _requested in ("auto", "", "cython"):
    try:
        from . import _chainkern as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _chain_np as _impl
        BACKEND = "python"
elif _requested in ("python", "numpy", "pure"):
    from . import _chain_np as _impl
    BACKEND = "python"
else:
    raise ValueError(f"unknown SAFESTEP_BACKEND value: {_requested!r}")

dcg = _impl.dcg
bias = _impl.bias
mass_matrix = _impl.mass_matrix
accel = _impl.accel
rhs = _impl.rhs
