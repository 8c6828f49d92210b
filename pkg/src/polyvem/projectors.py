"""Element degree-of-freedom layout and computable projection matrices.

Every matrix here acts on the element-local dof vector, whose layout is:
vertex values in loop order, then per loop edge the k-1 scaled edge
moments, then the k(k-1)/2 scaled cell moments. Edge moments are defined
in the edge's canonical orientation (from the lower to the higher global
vertex index when ids are supplied), so neighbouring elements reference
the identical functional and assembly needs no sign fixing.

The three projectors are the standard computable ones: the energy
projection onto P_k (closed by a boundary average for k=1 and a cell
average for k>=2), the L2 projection onto P_k obtained through the
enhancement constraint, and the componentwise L2 projection of the
gradient onto P_{k-1} computed by integration by parts.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import _geom
from .polyquad import (
    MonomialBasis,
    Quadrature,
    gauss_legendre_01,
    laplacian_table,
    monomial_exponents,
    monomial_index_map,
    n_monomials,
    polygon_quadrature,
)

K_MIN = 1
K_MAX = 4


class DegenerateElementError(Exception):
    """Projector system is singular; the element violates shape regularity."""


def _solve_refined(M, rhs, what):
    """Equilibrated dense solve with one iterative-refinement step.

    Gram matrices of high-degree scaled monomials on thin cells reach
    condition numbers around 1e8; symmetric diagonal scaling brings them
    near the conditioning of the correlation matrix, and one refinement
    pass then keeps the polynomial-preservation identities at the 1e-13
    level. The returned matrix still acts in the unscaled monomial basis.
    """
    d = np.abs(np.diag(M))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DegenerateElementError(f"degenerate {what} system")
    s = 1.0 / np.sqrt(d)
    Ms = M * s[:, None] * s[None, :]
    rs = rhs * s[:, None]
    try:
        lu = sla.lu_factor(Ms)
        y = sla.lu_solve(lu, rs)
        y += sla.lu_solve(lu, rs - Ms @ y)
    except (sla.LinAlgError, ValueError) as exc:
        raise DegenerateElementError(f"singular {what} system: {exc}")
    return y * s[:, None]


@dataclass(frozen=True)
class DofLayout:
    """Counts and index helpers for the local dof vector."""

    k: int
    n_vertices: int

    @property
    def n_edge_moments(self):
        return self.k - 1

    @property
    def n_cell_moments(self):
        return n_monomials(self.k - 2)

    @property
    def ndof(self):
        return self.n_vertices * self.k + self.n_cell_moments

    def vertex_dof(self, j):
        return j

    def edge_dof(self, edge, moment):
        return self.n_vertices + edge * (self.k - 1) + moment

    def cell_dof(self, moment):
        return self.n_vertices * self.k + moment


def dof_layout(cell, k):
    """Layout for a cell given as a vertex array or a vertex count."""
    if not (K_MIN <= k <= K_MAX):
        raise ValueError(f"order k must be in [{K_MIN}, {K_MAX}], got {k}")
    n = cell if isinstance(cell, int) else len(cell)
    return DofLayout(k=k, n_vertices=int(n))


@lru_cache(maxsize=None)
def _trace_system_inverse(k):
    """Inverse of the (k+1)x(k+1) edge trace system.

    Unknowns are the coefficients of the degree-k trace in the canonical
    edge coordinate s in [-1/2, 1/2]; data are the two endpoint values
    (s = -1/2 then +1/2) followed by the k-1 scaled moments.
    """
    m = np.empty((k + 1, k + 1))
    j = np.arange(k + 1)
    m[0] = (-0.5) ** j
    m[1] = 0.5 ** j
    for i in range(k - 1):
        p = i + j
        m[2 + i] = np.where(p % 2 == 1, 0.0, 0.5 ** p / (p + 1))
    inv = np.linalg.inv(m)
    inv.flags.writeable = False
    return inv


@dataclass(frozen=True)
class _EdgeData:
    """Per-edge quadrature and trace machinery reused by the projectors."""

    length: float
    normal: np.ndarray  # outward unit normal
    nodes: np.ndarray  # (q, 2) Gauss points along the loop direction
    weights: np.ndarray  # physical weights, sum |E|
    s_powers: np.ndarray  # (q, k+1) canonical-coordinate powers
    dof_columns: np.ndarray  # local dofs feeding the trace system rows
    trace_map: np.ndarray  # (q, k+1): trace values at nodes from dof data


@dataclass(frozen=True)
class ProjectorSet:
    """All computable projection matrices of one element.

    D maps monomial coefficients to dof vectors; pi_nabla, pi0 and
    pi0_grad map dof vectors to monomial coefficients (of P_k, P_k and
    P_{k-1} x P_{k-1} respectively; pi0_grad stacks the x block over the
    y block). H is the exact mass Gram of the scaled monomials of
    degree <= k.
    """

    k: int
    layout: DofLayout
    verts: np.ndarray
    basis: MonomialBasis
    area: float
    perimeter: float
    D: np.ndarray
    pi_nabla: np.ndarray
    pi0: np.ndarray
    pi0_grad: np.ndarray
    H: np.ndarray
    quad: Quadrature
    basis_values: np.ndarray  # monomials at the cell quadrature nodes
    edges: tuple = field(repr=False, default=())

    @property
    def diameter(self):
        return self.basis.scale

    @property
    def ndof(self):
        return self.layout.ndof


def build_projectors(verts, k, global_ids=None, extra_degree=0):
    """Compute the projector set of one CCW polygonal cell.

    global_ids fixes the canonical orientation of the edge moments; when
    omitted (standalone cells, tests) the loop order is canonical. The
    cell quadrature is exact to degree 2k + extra_degree so callers can
    reuse it for coefficient-weighted Gram matrices.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    nv = len(verts)
    layout = dof_layout(nv, k)
    nk = n_monomials(k)
    nk1 = n_monomials(k - 1)
    nk2 = n_monomials(k - 2)
    ndof = layout.ndof

    area = _geom.signed_area(verts)
    if area <= 0:
        raise DegenerateElementError("cell is not CCW or has nonpositive area")
    basis = MonomialBasis.for_polygon(verts, k)
    h = basis.scale
    perimeter = _geom.perimeter(verts)

    quad = polygon_quadrature(verts, 2 * k + max(int(extra_degree), 0))
    vq = basis.eval(quad.nodes)
    gq = basis.eval_grad(quad.nodes)
    w = quad.weights
    H = vq.T @ (w[:, None] * vq)
    H = 0.5 * (H + H.T)
    g_stiff = gq[:, :, 0].T @ (w[:, None] * gq[:, :, 0]) + gq[:, :, 1].T @ (
        w[:, None] * gq[:, :, 1]
    )

    edges = _edge_data(verts, k, layout, basis, global_ids)

    # dof-of-monomial matrix
    D = np.empty((ndof, nk))
    D[:nv] = basis.eval(verts)
    for e, ed in enumerate(edges):
        if k >= 2:
            vals = basis.eval(ed.nodes)
            wm = ed.weights[:, None] * ed.s_powers[:, : k - 1]
            D[layout.edge_dof(e, 0) : layout.edge_dof(e, k - 1)] = (
                wm.T @ vals
            ) / ed.length
    if nk2:
        D[layout.cell_dof(0) :] = H[:nk2, :] / area

    # energy projector: G s = B with the constant mode closed
    B = np.zeros((nk, ndof))
    for ed in edges:
        gn = ed.weights[:, None] * (
            basis.eval_grad(ed.nodes) @ ed.normal
        )  # (q, nk)
        B[:, ed.dof_columns] += gn.T @ ed.trace_map
    for row, col, coeff in laplacian_table(k):
        B[row, layout.cell_dof(col)] -= coeff * area / h ** 2

    G = g_stiff.copy()
    if k >= 2:
        G[0] = H[0] / area
        B[0] = 0.0
        B[0, layout.cell_dof(0)] = 1.0
    else:
        G[0] = 0.0
        B[0] = 0.0
        for ed in edges:
            G[0] += ed.weights @ basis.eval(ed.nodes) / perimeter
            B[0, ed.dof_columns] += ed.weights @ ed.trace_map / perimeter

    pi_nabla = _solve_refined(G, B, "energy-projector")

    # L2 projector through the enhancement constraint: low moments come
    # from the cell dofs, the top two degrees from the energy projection.
    C = H @ pi_nabla
    if nk2:
        C[:nk2] = 0.0
        C[np.arange(nk2), layout.cell_dof(0) + np.arange(nk2)] = area
    pi0 = _solve_refined(H, C, "mass-Gram")

    # projected gradient by integration by parts, one component at a time
    exps1 = monomial_exponents(k - 1)
    idx2 = monomial_index_map(max(k - 2, 0))
    R = np.zeros((2, nk1, ndof))
    for ed in edges:
        vals1 = ed.weights[:, None] * basis.eval(ed.nodes)[:, :nk1]
        contrib = vals1.T @ ed.trace_map
        R[0][:, ed.dof_columns] += ed.normal[0] * contrib
        R[1][:, ed.dof_columns] += ed.normal[1] * contrib
    for i, (a, b) in enumerate(exps1):
        if a > 0:
            R[0, i, layout.cell_dof(idx2[(int(a) - 1, int(b))])] -= a * area / h
        if b > 0:
            R[1, i, layout.cell_dof(idx2[(int(a), int(b) - 1)])] -= b * area / h
    hk1 = H[:nk1, :nk1]
    pi0_grad = np.vstack(
        [_solve_refined(hk1, R[0], "gradient-Gram"),
         _solve_refined(hk1, R[1], "gradient-Gram")]
    )

    # Newton polish of the polynomial-preservation identities: with
    # E = P D, replacing P by P + (I - E) P squares the identity error.
    # Two passes in extended precision take the worst family cells from
    # ~1e-9 (the cond(Gram) floor of degree-4 monomials) below the
    # float64 evaluation noise, while perturbing P only at its own error
    # level. The gradient matrix is polished against the analytic
    # gradient-coefficient matrix the same way.
    eye = np.eye(nk, dtype=np.longdouble)
    dl = D.astype(np.longdouble)
    pn = pi_nabla.astype(np.longdouble)
    p0 = pi0.astype(np.longdouble)
    for _ in range(2):
        pn = pn + (eye - pn @ dl) @ pn
        p0 = p0 + (eye - p0 @ dl) @ p0
    dgrad = _gradient_coefficients(k, h).astype(np.longdouble)
    pg = pi0_grad.astype(np.longdouble)
    for _ in range(2):
        pg = pg + (dgrad - pg @ dl) @ p0
    pi_nabla = pn.astype(np.float64)
    pi0 = p0.astype(np.float64)
    pi0_grad = pg.astype(np.float64)

    return ProjectorSet(
        k=k,
        layout=layout,
        verts=verts,
        basis=basis,
        area=float(area),
        perimeter=float(perimeter),
        D=D,
        pi_nabla=pi_nabla,
        pi0=pi0,
        pi0_grad=pi0_grad,
        H=H,
        quad=quad,
        basis_values=vq,
        edges=tuple(edges),
    )


def _gradient_coefficients(k, h):
    """Analytic coefficients of the monomial gradients.

    Returns the (2 n_{k-1}, n_k) matrix mapping P_k coefficients to the
    stacked P_{k-1} coefficients of the two gradient components.
    """
    nk = n_monomials(k)
    nk1 = n_monomials(k - 1)
    idx1 = monomial_index_map(k - 1)
    out = np.zeros((2 * nk1, nk))
    for col, (a, b) in enumerate(monomial_exponents(k)):
        a = int(a)
        b = int(b)
        if a > 0:
            out[idx1[(a - 1, b)], col] = a / h
        if b > 0:
            out[nk1 + idx1[(a, b - 1)], col] = b / h
    return out


def _edge_data(verts, k, layout, basis, global_ids):
    nv = len(verts)
    t, glw = gauss_legendre_01(k + 2)
    minv = _trace_system_inverse(k)
    if global_ids is not None:
        global_ids = np.asarray(global_ids)
    out = []
    for j in range(nv):
        jn = (j + 1) % nv
        pa = verts[j]
        pb = verts[jn]
        d = pb - pa
        length = float(np.hypot(d[0], d[1]))
        if length == 0.0:
            raise DegenerateElementError(f"zero-length edge at loop position {j}")
        normal = np.array([d[1], -d[0]]) / length
        nodes = pa[None, :] + np.outer(t, d)
        weights = glw * length
        flip = bool(global_ids is not None and global_ids[j] > global_ids[jn])
        s = (0.5 - t) if flip else (t - 0.5)
        s_powers = np.vander(s, k + 1, increasing=True)
        first, second = (jn, j) if flip else (j, jn)
        cols = [layout.vertex_dof(first), layout.vertex_dof(second)] + [
            layout.edge_dof(j, m) for m in range(k - 1)
        ]
        out.append(
            _EdgeData(
                length=length,
                normal=normal,
                nodes=np.ascontiguousarray(nodes),
                weights=weights,
                s_powers=s_powers,
                dof_columns=np.array(cols, dtype=np.int64),
                trace_map=s_powers @ minv,
            )
        )
    return out


def interpolate_dofs(f, ps):
    """Dof vector of a smooth function: exact vertex values, quadrature
    moments on edges and the cell."""
    layout = ps.layout
    vec = np.empty(layout.ndof)
    vec[: layout.n_vertices] = np.asarray(f(ps.verts), dtype=float).ravel()
    k = ps.k
    for e, ed in enumerate(ps.edges):
        if k >= 2:
            fv = np.asarray(f(ed.nodes), dtype=float).ravel()
            for m in range(k - 1):
                vec[layout.edge_dof(e, m)] = (
                    ed.weights @ (fv * ed.s_powers[:, m])
                ) / ed.length
    if layout.n_cell_moments:
        fv = np.asarray(f(ps.quad.nodes), dtype=float).ravel()
        nk2 = layout.n_cell_moments
        vec[layout.cell_dof(0) :] = (
            ps.basis_values[:, :nk2].T @ (ps.quad.weights * fv)
        ) / ps.area
    return vec


def pi_nabla(cell, k, global_ids=None):
    """Energy-projection matrix of a standalone cell."""
    return build_projectors(cell, k, global_ids=global_ids).pi_nabla


def pi0_scalar(cell, k, global_ids=None):
    """L2-projection matrix of a standalone cell."""
    return build_projectors(cell, k, global_ids=global_ids).pi0


def pi0_gradient(cell, k, global_ids=None):
    """Projected-gradient matrix of a standalone cell."""
    return build_projectors(cell, k, global_ids=global_ids).pi0_grad
