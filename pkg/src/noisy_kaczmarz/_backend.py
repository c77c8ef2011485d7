"""Pick the solver-loop implementation at import time.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy loops in ``_fallback``.  Setting ``NOISY_KACZMARZ_BACKEND=python``
forces the fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["compiled"] = _kernels

if os.environ.get("NOISY_KACZMARZ_BACKEND", "").lower() == "python" or _kernels is None:
    DEFAULT = "python"
else:
    DEFAULT = "compiled"


def get(name=None):
    """Backend module by name (``"compiled"`` or ``"python"``); None for the default."""
    name = DEFAULT if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
