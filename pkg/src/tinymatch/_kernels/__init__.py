"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback is used when
the extension was not built (or when ``TINYMATCH_FORCE_PURE`` is set in the
environment). Both backends produce bit-identical results; only speed
differs. ``benchmarks/bench_kernels.py`` compares them.
"""

import os

from . import pure

if os.environ.get("TINYMATCH_FORCE_PURE"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]

        BACKEND = "ext"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

pairwise_matrix = _impl.pairwise_matrix
topk_per_row = _impl.topk_per_row


def backend_name() -> str:
    """Name of the active kernel backend: 'ext' or 'pure'."""
    return BACKEND
