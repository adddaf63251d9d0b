"""Correlation backend selection.

The hot loop of filtering (same-size 2D correlation) exists twice: a
compiled Cython extension and a NumPy fallback with identical
semantics. Selection happens once, at import time, controlled by the
GABORDEFECT_BACKEND environment variable:

  auto    use the extension if it imported, else the fallback (default)
  c       require the extension, raise if missing
  python  force the fallback

Both backends accumulate taps in the same order, so results match
bit for bit and everything downstream is backend-independent.
"""

import os

from . import pyfallback

try:
    from . import _convext
except ImportError:
    _convext = None

__all__ = ["BACKEND", "corr2d", "get_backend"]

_choice = os.environ.get("GABORDEFECT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "c", "python"):
    raise RuntimeError(
        f"GABORDEFECT_BACKEND must be 'auto', 'c' or 'python', got {_choice!r}"
    )
if _choice == "c" and _convext is None:
    raise RuntimeError(
        "GABORDEFECT_BACKEND=c but the compiled extension is not available"
    )

if _choice == "python" or _convext is None:
    BACKEND = "python"
    _impl = pyfallback.corr2d
else:
    BACKEND = "c"
    _impl = _convext.corr2d


def corr2d(img, kernel, zero_pad):
    """Same-size 2D correlation of a single-channel float64 image."""
    return _impl(img, kernel, zero_pad)


def get_backend() -> str:
    """Name of the active backend, 'c' or 'python'."""
    return BACKEND
