"""Hot-kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy fallback
is selected.  Setting ``BOXSWARM_PURE_PYTHON=1`` forces the fallback.
"""

import contextlib
import os

from boxswarm import _kernels_py

if os.environ.get("BOXSWARM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from boxswarm import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

lsa = _impl.lsa
box_cost_matrix = _impl.box_cost_matrix


def compiled():
    """Return the compiled kernel module, or None if it was not built."""
    try:
        from boxswarm import _kernels
    except ImportError:
        return None
    return _kernels


@contextlib.contextmanager
def use_backend(name):
    """Temporarily route the kernels to ``"cython"`` or ``"python"`` (for benchmarks and tests)."""
    global lsa, box_cost_matrix, BACKEND
    impl = _kernels_py if name == "python" else compiled()
    if impl is None:
        raise RuntimeError("the compiled kernels are not built")
    saved = lsa, box_cost_matrix, BACKEND
    lsa, box_cost_matrix, BACKEND = impl.lsa, impl.box_cost_matrix, name
    try:
        yield impl
    finally:
        lsa, box_cost_matrix, BACKEND = saved
