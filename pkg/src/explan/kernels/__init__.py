"""Grid kernels with a compiled core and a pure-Python fallback.

The compiled extension is preferred when it imports cleanly.  Setting the
environment variable ``EXPLAN_PURE=1`` forces the pure backend, which is
useful for debugging and for the backend comparison benchmark.  Both
backends expose the same functions and produce bit-identical results.
"""

import os

from . import pure

FREE = pure.FREE
OCCUPIED = pure.OCCUPIED
UNKNOWN = pure.UNKNOWN

_FORCE_PURE = os.environ.get("EXPLAN_PURE", "") == "1"

if not _FORCE_PURE:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"
else:
    _impl = pure
    BACKEND = "pure"

wrap_angle = _impl.wrap_angle
los_clear = _impl.los_clear
raycast_cells = _impl.raycast_cells
visible_unknown_count = _impl.visible_unknown_count
visibility_bin_gains = _impl.visibility_bin_gains
sense_scan = _impl.sense_scan
dijkstra_grid = _impl.dijkstra_grid
has_visible_unknown = _impl.has_visible_unknown
observable_mask = _impl.observable_mask


def get_backend(name: str):
    """Return the named backend module ("pure" or "compiled").

    Raises KeyError for unknown names and RuntimeError when the compiled
    extension is unavailable.
    """
    if name == "pure":
        return pure
    if name == "compiled":
        if _FORCE_PURE or _impl is pure:
            try:
                from . import _core
            except ImportError as exc:
                raise RuntimeError("compiled kernel extension not built") from exc
            return _core
        return _impl
    raise KeyError(f"unknown kernel backend: {name!r}")
