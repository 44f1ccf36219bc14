"""Backend selection for the thinned-mode realization loop.

The compiled extension is used when it imports; otherwise, or when
``UNBIOT_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy implementation runs instead. Both draw the same random numbers in
the same order, so results agree to floating-point rounding.
"""

from __future__ import annotations

import os

from . import _pykernel
from ._pykernel import KernelParams, RealizationDetail, realize  # noqa: F401


def _want_pure() -> bool:
    return os.environ.get("UNBIOT_PURE_PYTHON", "") not in ("", "0")


_compiled = None
if not _want_pure():
    try:
        from . import _ckernel as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backends() -> dict:
    """Available ``name -> max_sinr_batch`` implementations."""
    out = {"python": _pykernel.max_sinr_batch}
    if _compiled is not None:
        out["cython"] = _compiled.max_sinr_batch
    return out


def max_sinr_batch(kp: KernelParams, first: int, count: int, backend: str | None = None):
    """Maximum SINR over evaluated BSs and messages, one value per realization."""
    impl = backends()[backend or BACKEND]
    return impl(kp, first, count)
