"""Pure NumPy implementations of the per-element numeric kernels.

These are the fallback for :mod:`polyvem._kernels._fastkern` and the
reference the compiled twin is tested against.
"""

import numpy as np


def monomial_values(exps, cx, cy, scale, points):
    """Evaluate scaled monomials ((x-cx)/h)^a ((y-cy)/h)^b at points.

    Parameters
    ----------
    exps : (nm, 2) int array of exponent pairs
    cx, cy, scale : element center and characteristic length h
    points : (np, 2) evaluation points

    Returns an (np, nm) array.
    """
    xi = (points[:, 0] - cx) / scale
    eta = (points[:, 1] - cy) / scale
    deg = int(exps.max()) if exps.size else 0
    px = np.vander(xi, deg + 1, increasing=True)
    py = np.vander(eta, deg + 1, increasing=True)
    return px[:, exps[:, 0]] * py[:, exps[:, 1]]


def monomial_gradients(exps, cx, cy, scale, points):
    """Gradients of the scaled monomials, with the 1/h chain-rule factor.

    Returns an (np, nm, 2) array.
    """
    xi = (points[:, 0] - cx) / scale
    eta = (points[:, 1] - cy) / scale
    deg = int(exps.max()) if exps.size else 0
    px = np.vander(xi, deg + 1, increasing=True)
    py = np.vander(eta, deg + 1, increasing=True)
    a = exps[:, 0]
    b = exps[:, 1]
    out = np.empty((len(points), len(exps), 2))
    out[:, :, 0] = (a / scale) * px[:, np.maximum(a - 1, 0)] * py[:, b]
    out[:, :, 1] = (b / scale) * px[:, a] * py[:, np.maximum(b - 1, 0)]
    return out


def fan_quadrature(verts, center, ref_nodes, ref_weights):
    """Map a reference-triangle rule over the fan (center, v_i, v_{i+1}).

    ref_nodes/ref_weights live on the unit triangle (0,0)-(1,0)-(0,1) with
    weights summing to 1/2. Returns physical (nodes, weights); weights are
    negative on fan triangles with reversed orientation, so callers can
    detect a non-star-shaped fan by checking signs.
    """
    n = len(verts)
    q = len(ref_weights)
    e1 = verts - center
    e2 = np.roll(verts, -1, axis=0) - center
    jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    u = ref_nodes[:, 0]
    v = ref_nodes[:, 1]
    nodes = (
        center[None, None, :]
        + u[None, :, None] * e1[:, None, :]
        + v[None, :, None] * e2[:, None, :]
    )
    weights = jac[:, None] * ref_weights[None, :]
    return nodes.reshape(n * q, 2), weights.reshape(n * q)
