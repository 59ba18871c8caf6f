"""Numeric hot loops with a compiled core and a pure-numpy fallback.

The compiled extension is optional: if it failed to build, or if the
``ULPOS_PURE`` environment variable is set to a non-empty value, the numpy
implementations are used instead.  Both backends accumulate in the same
order so results stay interchangeable (bitwise for the loss kernel, to
rounding noise for the trig-heavy synthesis kernel).
"""

import os

from . import numpy_backend

if os.environ.get("ULPOS_PURE"):
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"

tdoa_loss_points = _impl.tdoa_loss_points
dirichlet_cir = _impl.dirichlet_cir


def backend_name() -> str:
    """Which implementation is active: "compiled" or "numpy"."""
    return BACKEND
