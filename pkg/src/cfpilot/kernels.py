"""Backend selection for the local-search kernels.

The compiled extension is used when it was built; otherwise the pure-Python
twin is loaded. Set ``CFPILOT_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("CFPILOT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

NO_MOVE = _impl.NO_MOVE
ONE_MOVE = _impl.ONE_MOVE
SWAP_MOVE = _impl.SWAP_MOVE

next_u64 = _impl.next_u64
randbelow = _impl.randbelow
delta_one = _impl.delta_one
delta_swap = _impl.delta_swap
apply_one = _impl.apply_one
apply_swap = _impl.apply_swap
local_search = _impl.local_search
random_move = _impl.random_move
weak_perturbation = _impl.weak_perturbation
robust_perturbation = _impl.robust_perturbation
build_move_matrix = _impl.build_move_matrix


def load(name: str):
    """Return a specific backend module ("cython" or "python")."""
    if name == "python":
        from . import _kernels_py
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
