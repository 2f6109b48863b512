"""Kernel backend selection.

The hot loops (stencils, RK4 stage updates, characteristic integration)
exist twice: numba-compiled loops and a vectorized numpy fallback. The
``KVH_LAB_BACKEND`` environment variable picks one (``numba`` or
``numpy``); numba is the default when it imports cleanly.
"""
import os

# the bundled TBB is too old for numba and only produces a warning
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

BACKEND_ENV = "KVH_LAB_BACKEND"
THREADS_ENV = "KVH_LAB_THREADS"


def _numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(name=None):
    if name is None:
        name = os.environ.get(BACKEND_ENV, "numba")
    name = name.strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not _numba_available():
        return "numpy"
    return name


def get_kernels(name=None):
    """Return the kernel module for ``name`` (default: environment choice)."""
    if resolve_backend(name) == "numba":
        from . import _kernels_numba as mod
    else:
        from . import _kernels_numpy as mod
    return mod


def set_threads(n):
    """Set the numba worker count; 0 or None leaves the default."""
    if not n:
        return
    if resolve_backend() != "numba":
        return
    import numba

    numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
