"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it is
missing or when ``KNN_LAB_BACKEND=py`` is set. ``KNN_LAB_BACKEND=c`` makes a
missing extension a hard error.
"""

from __future__ import annotations

import os

_requested = os.environ.get("KNN_LAB_BACKEND", "auto")
if _requested not in ("auto", "c", "py"):
    raise RuntimeError(f"KNN_LAB_BACKEND must be auto, c or py, got {_requested!r}")

if _requested == "py":
    from . import _kernels_py as _impl

    BACKEND = "py"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        from . import _kernels_py as _impl

        BACKEND = "py"

knn_neighbors = _impl.knn_neighbors
component_labels = _impl.component_labels
max_pairwise_sq = _impl.max_pairwise_sq
count_within_radii = _impl.count_within_radii
