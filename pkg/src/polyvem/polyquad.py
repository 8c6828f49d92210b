"""Scaled monomial bases and polygon/segment quadrature.

Monomials are ordered graded-lexicographically: within each total degree d
the exponent pairs run (d,0), (d-1,1), ..., (0,d). The ordering has the
prefix property, so the first ``n_monomials(d)`` entries of a degree-k
table form the degree-d table; Gram matrices can therefore be sliced
instead of rebuilt.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _geom, _kernels


def n_monomials(degree):
    """Dimension of the 2D polynomial space of total degree <= degree."""
    if degree < 0:
        return 0
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def monomial_exponents(degree):
    """Graded-lex exponent table as an (n, 2) int64 array (read-only)."""
    exps = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    arr = np.array(exps, dtype=np.int64).reshape(-1, 2)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def monomial_index_map(degree):
    """Dict mapping exponent pair -> position in the graded-lex table."""
    exps = monomial_exponents(degree)
    return {(int(a), int(b)): i for i, (a, b) in enumerate(exps)}


@lru_cache(maxsize=None)
def laplacian_table(degree):
    """Sparse representation of the Laplacian on the scaled basis.

    Returns a list of (row, col, coeff) triplets such that
    lap(m_row) = sum coeff/h^2 * m_col; coefficients are exponent
    integers, the 1/h^2 factor is applied by the caller.
    """
    exps = monomial_exponents(degree)
    idx = monomial_index_map(degree)
    triplets = []
    for i, (a, b) in enumerate(exps):
        a = int(a)
        b = int(b)
        if a >= 2:
            triplets.append((i, idx[(a - 2, b)], float(a * (a - 1))))
        if b >= 2:
            triplets.append((i, idx[(a, b - 2)], float(b * (b - 1))))
    return triplets


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials ((x - center)/scale)^alpha, |alpha| <= degree."""

    center: np.ndarray
    scale: float
    degree: int

    @property
    def exponents(self):
        return monomial_exponents(self.degree)

    def __len__(self):
        return n_monomials(self.degree)

    @classmethod
    def for_polygon(cls, verts, degree):
        return cls(
            center=_geom.centroid(verts),
            scale=_geom.diameter(verts),
            degree=degree,
        )

    def eval(self, points):
        """Monomial values at points, shape (npts, n)."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        return _kernels.monomial_values(
            self.exponents, self.center[0], self.center[1], self.scale, pts
        )

    def eval_grad(self, points):
        """Monomial gradients at points, shape (npts, n, 2)."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        return _kernels.monomial_gradients(
            self.exponents, self.center[0], self.center[1], self.scale, pts
        )


def eval_basis(basis, points):
    return basis.eval(points)


def eval_basis_grad(basis, points):
    return basis.eval_grad(points)


@dataclass(frozen=True)
class Quadrature:
    """Nodes/weights exact for polynomials up to exactness_degree."""

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def integrate(self, values):
        return self.weights @ values


@lru_cache(maxsize=None)
def gauss_legendre_01(n):
    """n-point Gauss-Legendre rule on [0, 1] (nodes, weights)."""
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=None)
def reference_triangle_rule(degree):
    """Quadrature on the unit triangle (0,0)-(1,0)-(0,1), exact to degree.

    Built by collapsing a tensor Gauss-Legendre rule through the Duffy map
    (u, v) -> (u(1-v), uv) with Jacobian u. A polynomial of total degree d
    pulls back to degree <= d+1 in u and <= d in v, so m points per
    direction with 2m-1 >= d+1 are exact. All weights are strictly
    positive at every degree, unlike tabulated symmetric rules.
    """
    m = (degree + 3) // 2
    xu, wu = gauss_legendre_01(m)
    xv, wv = gauss_legendre_01(m)
    u = np.repeat(xu, m)
    v = np.tile(xv, m)
    w = np.repeat(wu * xu, m) * np.tile(wv, m)
    nodes = np.column_stack([u * (1.0 - v), u * v])
    nodes = np.ascontiguousarray(nodes)
    w = np.ascontiguousarray(w)
    nodes.flags.writeable = False
    w.flags.writeable = False
    return nodes, w


def polygon_quadrature(verts, degree):
    """Quadrature over a CCW polygon, exact for polynomials <= degree.

    Fan-triangulates from the centroid; if the polygon is not star-shaped
    with respect to its centroid (some fan triangle folds over), falls
    back to ear clipping.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    degree = max(int(degree), 0)
    ref_nodes, ref_w = reference_triangle_rule(degree)
    center = _geom.centroid(verts)
    nodes, weights = _kernels.fan_quadrature(
        verts, np.ascontiguousarray(center), ref_nodes, ref_w
    )
    if np.all(weights > 0.0):
        return Quadrature(nodes, weights, degree)

    tris = _geom.ear_clip(verts)
    parts_n = []
    parts_w = []
    for tri in tris:
        e1 = tri[1] - tri[0]
        e2 = tri[2] - tri[0]
        jac = e1[0] * e2[1] - e1[1] * e2[0]
        pts = tri[0][None, :] + np.outer(ref_nodes[:, 0], e1) + np.outer(ref_nodes[:, 1], e2)
        parts_n.append(pts)
        parts_w.append(jac * ref_w)
    return Quadrature(np.vstack(parts_n), np.concatenate(parts_w), degree)


def edge_quadrature(p0, p1, degree):
    """Gauss-Legendre rule on the segment p0-p1, exact to degree.

    Weights sum to the segment length.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    n = max((int(degree) + 2) // 2, 1)
    t, w = gauss_legendre_01(n)
    nodes = p0[None, :] + np.outer(t, p1 - p0)
    length = float(np.hypot(*(p1 - p0)))
    return Quadrature(nodes, w * length, degree)
