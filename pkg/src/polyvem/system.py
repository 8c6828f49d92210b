"""Global sparse assembly of the stiffness/mass pencil (A, B).

Dof numbering is global-vertex dofs first, then edge dofs (k-1 per edge,
ordered by edge id), then cell dofs; edge moments use the canonical
lower-to-higher vertex orientation so shared dofs coincide between
neighbours without sign bookkeeping. Elements are processed in index
order, which makes assembly bit-reproducible.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .forms import build_local_forms
from .polyquad import n_monomials
from .projectors import build_projectors

logger = logging.getLogger(__name__)

MASS_VARIANTS = ("plain", "stabilized")


class AssemblyError(Exception):
    pass


@dataclass(frozen=True)
class DofMap:
    """Element-local to global dof numbering."""

    k: int
    n_vertices: int
    n_edges: int
    n_cells: int

    @property
    def n_cell_dofs(self):
        return n_monomials(self.k - 2)

    @property
    def ndof(self):
        return (
            self.n_vertices
            + self.n_edges * (self.k - 1)
            + self.n_cells * self.n_cell_dofs
        )

    def cell_dofs(self, mesh, ci):
        k = self.k
        loop = mesh.cells[ci]
        parts = [loop]
        if k >= 2:
            base = self.n_vertices
            eids = mesh.cell_edges[ci]
            edge_part = (
                base + (k - 1) * eids[:, None] + np.arange(k - 1)[None, :]
            ).ravel()
            parts.append(edge_part)
        ncd = self.n_cell_dofs
        if ncd:
            base = self.n_vertices + self.n_edges * (k - 1)
            parts.append(base + ncd * ci + np.arange(ncd))
        return np.concatenate(parts).astype(np.int64)


@dataclass(frozen=True)
class GlobalSystem:
    """Assembled symmetric pencil with boundary metadata."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    dof_map: DofMap
    dirichlet_mask: np.ndarray
    mass_variant: str
    mesh: object
    k: int
    coefficients: object

    @property
    def ndof(self):
        return self.dof_map.ndof


def assemble(mesh, k, coefficients, mass_variant="plain",
             stabilization="projected"):
    """Scatter-add the local forms of every cell into sparse (A, B)."""
    if mass_variant not in MASS_VARIANTS:
        raise AssemblyError(f"unknown mass variant {mass_variant!r}")
    dof_map = DofMap(
        k=k,
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_cells=mesh.n_cells,
    )
    n = dof_map.ndof
    rows, cols, a_vals, b_vals = [], [], [], []
    extra = coefficients.quadrature_extra_degree
    for ci in range(mesh.n_cells):
        ps = build_projectors(
            mesh.cell_vertices(ci), k,
            global_ids=mesh.cells[ci], extra_degree=extra,
        )
        lf = build_local_forms(ps, coefficients, stabilization)
        a_loc = lf.stiffness()
        b_loc = lf.mass(mass_variant)
        gdofs = dof_map.cell_dofs(mesh, ci)
        if len(gdofs) != ps.ndof:
            raise AssemblyError(
                f"cell {ci}: dof map size {len(gdofs)} != local {ps.ndof}"
            )
        grid = np.meshgrid(gdofs, gdofs, indexing="ij")
        rows.append(grid[0].ravel())
        cols.append(grid[1].ravel())
        a_vals.append(a_loc.ravel())
        b_vals.append(b_loc.ravel())

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    A = sp.coo_matrix((np.concatenate(a_vals), (rows, cols)), shape=(n, n)).tocsr()
    B = sp.coo_matrix((np.concatenate(b_vals), (rows, cols)), shape=(n, n)).tocsr()

    mask = np.zeros(n, dtype=bool)
    if coefficients.bc == "dirichlet":
        mask[: mesh.n_vertices] = mesh.boundary_vertex_flags
        if k >= 2:
            bedges = np.nonzero(mesh.boundary_edge_flags)[0]
            for e in bedges:
                start = mesh.n_vertices + (k - 1) * e
                mask[start : start + k - 1] = True
    mask.flags.writeable = False
    logger.debug("assembled %d dofs on %d cells", n, mesh.n_cells)
    return GlobalSystem(
        A=A, B=B, dof_map=dof_map, dirichlet_mask=mask,
        mass_variant=mass_variant, mesh=mesh, k=k, coefficients=coefficients,
    )


@dataclass(frozen=True)
class ReducedSystem:
    """Interior block after symmetric Dirichlet elimination."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    interior: np.ndarray
    ndof_full: int

    @property
    def ndof(self):
        return len(self.interior)

    def embed(self, x):
        """Re-embed interior vectors into full dof vectors (zeros on the
        boundary)."""
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (self.ndof_full,))
        out[..., self.interior] = x
        return out


def apply_dirichlet(system):
    """Remove the masked rows/columns symmetrically."""
    interior = np.nonzero(~system.dirichlet_mask)[0]
    A = system.A[interior][:, interior].tocsr()
    B = system.B[interior][:, interior].tocsr()
    return ReducedSystem(A=A, B=B, interior=interior, ndof_full=system.ndof)


@dataclass(frozen=True)
class DeflationInfo:
    """Constant-kernel metadata for zero-potential Neumann pencils."""

    vector: np.ndarray
    relative_residual: float
    active: bool


def deflate_constants(system, reduced=None, tol=1e-10):
    """Record the constant-function dof vector of the Neumann kernel.

    For Neumann problems with zero potential, A annihilates the constant
    function; the returned info lets the eigensolver filter the zero
    mode. Note the constant's dof vector is all-ones only for k = 1: its
    higher edge moments vanish and its cell moments are the scaled
    monomial averages, so it is interpolated properly here. On Dirichlet
    problems this is a no-op (active=False).
    """
    if system.coefficients.bc != "neumann" or system.coefficients.potential is not None:
        return DeflationInfo(vector=np.zeros(0), relative_residual=np.inf,
                             active=False)
    const = interpolate_global(
        system.mesh, system.k, lambda pts: np.ones(len(pts))
    )
    if reduced is not None:
        target = reduced.A
        const = const[reduced.interior]
    else:
        target = system.A
    resid = np.abs(target @ const).max()
    scale = np.abs(target).max()
    rel = float(resid / scale) if scale else np.inf
    if rel > tol:
        raise AssemblyError(
            f"constants not in stiffness kernel (residual {rel:g}); "
            "deflation requested on a non-kernel system"
        )
    return DeflationInfo(vector=const, relative_residual=rel, active=True)


def export_matrix(matrix, path):
    """Write 'i j value' triplets (0-based) for external cross-checks."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def interpolate_global(mesh, k, f, extra_degree=0):
    """Global dof vector interpolating a smooth function.

    Shared dofs are written by several cells with values identical up to
    quadrature roundoff; the last write wins.
    """
    dof_map = DofMap(k=k, n_vertices=mesh.n_vertices, n_edges=mesh.n_edges,
                     n_cells=mesh.n_cells)
    from .projectors import interpolate_dofs

    out = np.zeros(dof_map.ndof)
    for ci in range(mesh.n_cells):
        ps = build_projectors(
            mesh.cell_vertices(ci), k,
            global_ids=mesh.cells[ci], extra_degree=extra_degree,
        )
        out[dof_map.cell_dofs(mesh, ci)] = interpolate_dofs(f, ps)
    return out


def solve_source(system, rhs_full, dirichlet_values=None):
    """Solve A u = rhs with homogeneous or lifted Dirichlet data.

    rhs_full and the returned u live on the full dof set; boundary
    entries of u are taken from dirichlet_values (zero when omitted).
    """
    from scipy.sparse.linalg import spsolve

    red = apply_dirichlet(system)
    u = np.zeros(system.ndof)
    if dirichlet_values is not None:
        u[system.dirichlet_mask] = dirichlet_values[system.dirichlet_mask]
    rhs = rhs_full[red.interior] - system.A[red.interior] @ u
    u[red.interior] = spsolve(red.A, rhs)
    return u
