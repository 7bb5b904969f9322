"""Kernel backend selection.

The compiled module is used when it imports; otherwise the numpy fallback.
``use_backend`` switches explicitly (tests and benchmarks run both).
"""

import logging

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _ckernels if _ckernels is not None else _pykernels


def available():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    prev = backend_name()
    _active = _BACKENDS[name]
    return prev


def backend_name():
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def point_triangle_distance(p, a, b, c):
    return _active.point_triangle_distance(p, a, b, c)


def band_distances(vertices, triangles, origin, h, dims, band):
    return _active.band_distances(vertices, triangles, origin, h, dims, band)


def parity_inside(vertices, triangles, origin, h, dims):
    return _active.parity_inside(vertices, triangles, origin, h, dims)


def dart_state(lo, hi, min_sep, min_sep2, max_attempts):
    return _active.DartState(lo, hi, min_sep, min_sep2, max_attempts)
