"""Import-time selection of the batched numerical kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when the environment variable ``HYPEROP_PURE`` is set to ``1``, the numpy
implementation in ``_fallback`` is used. Both expose the same functions.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("HYPEROP_PURE", "") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

transform_eval = _impl.transform_eval
gamma_array = _impl.gamma_array
recip_gamma_array = _impl.recip_gamma_array
singular_sum = _impl.singular_sum

__all__ = [
    "BACKEND",
    "transform_eval",
    "gamma_array",
    "recip_gamma_array",
    "singular_sum",
]
