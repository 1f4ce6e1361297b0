"""Selects the compiled postfilter kernel when available.

Set ``CDRPOST_BACKEND=python`` to force the numpy implementation.
"""

import os

from . import _kernels_py
from ._kernels_py import FLAG_CLAMPED, FLAG_LOW_ENERGY, FLAG_WARMUP  # noqa: F401

BACKENDS = {"python": _kernels_py.process_block}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled.process_block

if os.environ.get("CDRPOST_BACKEND", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_kernel(name: str | None = None):
    """Return the ``process_block`` implementation for ``name`` (default: active)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None
