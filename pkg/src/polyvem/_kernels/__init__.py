"""Numeric kernels with a compiled core and a NumPy fallback.

The compiled extension is preferred when it imported cleanly; set
``POLYVEM_KERNELS=python`` or ``POLYVEM_KERNELS=compiled`` to force a
backend (the latter raises if the extension is unavailable). The active
backend can also be switched at runtime with :func:`use`, which the
benchmark harness relies on to compare both implementations in-process.
"""

import os

from . import reference

_BACKENDS = {"python": reference}

try:
    from . import _fastkern

    _BACKENDS["compiled"] = _fastkern
except ImportError:
    _fastkern = None

_requested = os.environ.get("POLYVEM_KERNELS", "auto")
if _requested == "auto":
    _active = "compiled" if _fastkern is not None else "python"
elif _requested in _BACKENDS:
    _active = _requested
else:
    raise ImportError(
        f"POLYVEM_KERNELS={_requested!r} not available; "
        f"choose from {sorted(_BACKENDS)} or 'auto'"
    )


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return _active


def use(name):
    """Switch the active kernel backend ('python' or 'compiled')."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    _active = name


def monomial_values(exps, cx, cy, scale, points):
    return _BACKENDS[_active].monomial_values(exps, cx, cy, scale, points)


def monomial_gradients(exps, cx, cy, scale, points):
    return _BACKENDS[_active].monomial_gradients(exps, cx, cy, scale, points)


def fan_quadrature(verts, center, ref_nodes, ref_weights):
    return _BACKENDS[_active].fan_quadrature(verts, center, ref_nodes, ref_weights)
