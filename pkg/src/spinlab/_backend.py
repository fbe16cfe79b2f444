"""Pick the compiled kernels when available; ``SPINLAB_BACKEND=python`` forces the fallback."""
import os

from . import _fallback

_forced = os.environ.get("SPINLAB_BACKEND", "").strip().lower()

if _forced == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        kernels = _fallback
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
