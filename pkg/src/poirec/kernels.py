"""Backend selection for the numeric inner loops.

The compiled ``_speedups`` extension is used when it was built; otherwise the
pure-Python ``_fallback`` module is. Set ``POIREC_PURE_PYTHON=1`` to force the
fallback (the benchmark and the backend-parity tests do this per call via
:func:`get_backend`).
"""

import os

from . import _fallback

try:
    from . import _speedups
except ImportError:  # extension not built
    _speedups = None

BACKENDS = {"python": _fallback}
if _speedups is not None:
    BACKENDS["cython"] = _speedups

if os.environ.get("POIREC_PURE_PYTHON") or _speedups is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def em_accumulate(*args, backend=None):
    return get_backend(backend).em_accumulate(*args)


def pegasos(*args, backend=None):
    return get_backend(backend).pegasos(*args)


def listnet_epoch(*args, backend=None):
    return get_backend(backend).listnet_epoch(*args)
