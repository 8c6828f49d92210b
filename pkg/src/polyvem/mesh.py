"""Conforming 2D polygonal meshes: representation, generators, audit, I/O.

A mesh is immutable after construction. Cells are counter-clockwise
vertex-index loops; edges are derived from the loops, are shared
vertex-pair-exact between neighbours, and carry incident-cell data.

Four generator families reproduce the usual polytopal benchmark meshes on
a rectangle: a mainly-hexagonal tiling with a smooth distortion map, a
nonconvex octagon grid, a randomized quadrilateral grid, and a Lloyd-
relaxed (centroidal) Voronoi tessellation. All generators are pure
functions of (family, level, box, seed).
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi

from . import _geom

logger = logging.getLogger(__name__)

FAMILIES = ("hexagonal", "nonconvex_octagon", "randomized_quad", "voronoi")

MAX_GENERATED_VERTICES = 2_000_000

LLOYD_ITERATIONS = 100


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class MeshFormatError(MeshError):
    """Unparseable mesh file."""


class MeshConformityError(MeshError):
    """Mesh violates a conformity invariant."""


class MeshGenerationError(MeshError):
    """Generator cannot honour the request."""


@dataclass(frozen=True)
class PolygonalMesh:
    """Conforming polygonal mesh with derived edge connectivity.

    vertices : (nv, 2) float array
    cells : tuple of int arrays, CCW vertex loops
    edges : (ne, 2) int array, each row (lo, hi) with lo < hi
    edge_cells : (ne, 2) int array of incident cells, -1 when absent
    cell_edges : per cell, the edge id of each loop segment
    boundary_vertex_flags / boundary_edge_flags : bool arrays
    domain_box : (x0, y0, x1, y1) or None for loaded general domains
    """

    vertices: np.ndarray
    cells: tuple
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: tuple
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    domain_box: tuple

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def cell_vertices(self, i):
        return self.vertices[self.cells[i]]

    def cell_area(self, i):
        return _geom.signed_area(self.cell_vertices(i))

    @classmethod
    def from_cells(cls, vertices, cells, domain_box=None, fix_orientation=False,
                   validate=True):
        """Build a mesh from raw vertex/loop data, deriving edges.

        With fix_orientation=True, clockwise loops are reversed (with a
        warning) instead of rejected.
        """
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
        loops = []
        for ci, loop in enumerate(cells):
            loop = np.asarray(loop, dtype=np.int64).ravel()
            if len(loop) < 3 or len(np.unique(loop)) != len(loop):
                raise MeshConformityError(
                    f"cell {ci}: loop must have >= 3 distinct vertices"
                )
            if loop.min() < 0 or loop.max() >= len(vertices):
                raise MeshConformityError(f"cell {ci}: vertex index out of range")
            area = _geom.signed_area(vertices[loop])
            if area < 0 and fix_orientation:
                warnings.warn(f"cell {ci} was clockwise; reversed to CCW")
                loop = loop[::-1].copy()
                area = -area
            if area <= 0:
                raise MeshConformityError(
                    f"cell {ci}: nonpositive signed area {area:g} (not CCW)"
                )
            loop.flags.writeable = False
            loops.append(loop)

        edge_index = {}
        edge_list = []
        edge_cells = []
        edge_dirs = []
        cell_edges = []
        for ci, loop in enumerate(loops):
            eids = np.empty(len(loop), dtype=np.int64)
            for j in range(len(loop)):
                a = int(loop[j])
                b = int(loop[(j + 1) % len(loop)])
                key = (a, b) if a < b else (b, a)
                eid = edge_index.get(key)
                if eid is None:
                    eid = len(edge_list)
                    edge_index[key] = eid
                    edge_list.append(key)
                    edge_cells.append([ci, -1])
                    edge_dirs.append([a < b, None])
                else:
                    if edge_cells[eid][1] != -1:
                        raise MeshConformityError(
                            f"edge {edge_list[eid]} shared by more than 2 cells"
                        )
                    edge_cells[eid][1] = ci
                    edge_dirs[eid][1] = a < b
                eids[j] = eid
            eids.flags.writeable = False
            cell_edges.append(eids)

        edges = np.array(edge_list, dtype=np.int64).reshape(-1, 2)
        edge_cells = np.array(edge_cells, dtype=np.int64).reshape(-1, 2)
        boundary_edge = edge_cells[:, 1] == -1
        for eid, (d0, d1) in enumerate(edge_dirs):
            if d1 is not None and d0 == d1:
                raise MeshConformityError(
                    f"edge {edge_list[eid]} traversed twice in the same direction"
                )
        boundary_vertex = np.zeros(len(vertices), dtype=bool)
        if boundary_edge.any():
            boundary_vertex[edges[boundary_edge].ravel()] = True

        vertices.flags.writeable = False
        for arr in (edges, edge_cells, boundary_edge, boundary_vertex):
            arr.flags.writeable = False
        mesh = cls(
            vertices=vertices,
            cells=tuple(loops),
            edges=edges,
            edge_cells=edge_cells,
            cell_edges=tuple(cell_edges),
            boundary_vertex_flags=boundary_vertex,
            boundary_edge_flags=boundary_edge,
            domain_box=tuple(domain_box) if domain_box is not None else None,
        )
        if validate:
            mesh.validate()
        return mesh

    def validate(self):
        """Check the conformity invariants; raise MeshConformityError."""
        v = self.vertices
        areas = np.array([_geom.signed_area(v[c]) for c in self.cells])
        if np.any(areas <= 0):
            bad = int(np.argmin(areas))
            raise MeshConformityError(f"cell {bad} has nonpositive area")

        # Union area from the (once-traversed) boundary edges must match
        # the sum of cell areas: catches overlapping cells.
        union = 0.0
        for ci, loop in enumerate(self.cells):
            eids = self.cell_edges[ci]
            for j in range(len(loop)):
                if self.boundary_edge_flags[eids[j]]:
                    a = v[loop[j]]
                    b = v[loop[(j + 1) % len(loop)]]
                    union += a[0] * b[1] - b[0] * a[1]
        union = 0.5 * union
        total = areas.sum()
        if union <= 0 or abs(total - union) > 1e-10 * abs(union):
            raise MeshConformityError(
                f"cell areas sum to {total!r} but boundary encloses {union!r}"
            )
        if self.domain_box is not None:
            x0, y0, x1, y1 = self.domain_box
            box_area = (x1 - x0) * (y1 - y0)
            if abs(total - box_area) > 1e-10 * box_area:
                raise MeshConformityError(
                    f"cell areas sum to {total!r}, expected box area {box_area!r}"
                )
            scale = max(x1 - x0, y1 - y0)
            tol = 1e-9 * scale
            for eid in np.nonzero(self.boundary_edge_flags)[0]:
                pa, pb = v[self.edges[eid]]
                on_side = (
                    (abs(pa[0] - x0) < tol and abs(pb[0] - x0) < tol)
                    or (abs(pa[0] - x1) < tol and abs(pb[0] - x1) < tol)
                    or (abs(pa[1] - y0) < tol and abs(pb[1] - y0) < tol)
                    or (abs(pa[1] - y1) < tol and abs(pb[1] - y1) < tol)
                )
                if not on_side:
                    raise MeshConformityError(
                        f"boundary edge {tuple(self.edges[eid])} not on the "
                        "domain box (nonconforming interior edge?)"
                    )

        # T-junction scan: no boundary vertex strictly inside another
        # boundary edge.
        bverts = np.nonzero(self.boundary_vertex_flags)[0]
        bedges = np.nonzero(self.boundary_edge_flags)[0]
        if len(bedges):
            pa = v[self.edges[bedges, 0]]
            pb = v[self.edges[bedges, 1]]
            scale = float(np.abs(pb - pa).max()) + 1.0
            for vi in bverts:
                p = v[vi]
                d = pb - pa
                t = ((p - pa) * d).sum(axis=1) / (d * d).sum(axis=1)
                proj = pa + t[:, None] * d
                dist = np.abs(proj - p).max(axis=1)
                inside = (t > 1e-9) & (t < 1 - 1e-9) & (dist < 1e-9 * scale)
                hits = np.nonzero(inside)[0]
                for h in hits:
                    eid = bedges[h]
                    if vi not in self.edges[eid]:
                        raise MeshConformityError(
                            f"vertex {vi} lies inside boundary edge "
                            f"{tuple(self.edges[eid])} (T-junction)"
                        )


def mesh_diameter(mesh):
    """Largest cell diameter h = max_P sup |x - y|."""
    return max(_geom.diameter(mesh.cell_vertices(i)) for i in range(mesh.n_cells))


def cell_diameters(mesh):
    return np.array(
        [_geom.diameter(mesh.cell_vertices(i)) for i in range(mesh.n_cells)]
    )


@dataclass(frozen=True)
class RegularityReport:
    """Result of the shape-regularity audit.

    rho_star is the largest rho such that every cell is star-shaped with
    respect to a disk of radius rho*h_P and has all edges >= rho*h_P.
    """

    rho_star: float
    per_cell_star_radius_ratio: np.ndarray
    per_cell_min_edge_ratio: np.ndarray
    rho_required: float
    passed: bool


def _kernel_disk_radius(verts):
    """Radius of the largest disk in the polygon kernel (LP formulation).

    The kernel (intersection of the inner half-planes of all edges) is the
    set of points seeing the whole polygon, so a disk of radius r inside
    it certifies star-shapedness with respect to that disk. For convex
    polygons this is the Chebyshev-center inscribed disk.
    """
    a = verts
    b = np.roll(verts, -1, axis=0)
    d = b - a
    lengths = np.hypot(d[:, 0], d[:, 1])
    # outward normal of a CCW edge
    n = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    A_ub = np.column_stack([n, np.ones(len(a))])
    b_ub = (n * a).sum(axis=1)
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[
            (verts[:, 0].min(), verts[:, 0].max()),
            (verts[:, 1].min(), verts[:, 1].max()),
            (0.0, None),
        ],
        method="highs",
    )
    if not res.success:
        return 0.0
    return float(res.x[2])


def check_regularity(mesh, rho=0.0):
    """Audit star-shapedness and edge-length ratios for every cell."""
    star = np.empty(mesh.n_cells)
    edge = np.empty(mesh.n_cells)
    for i in range(mesh.n_cells):
        verts = mesh.cell_vertices(i)
        h = _geom.diameter(verts)
        star[i] = _kernel_disk_radius(verts) / h
        edge[i] = _geom.edge_lengths(verts).min() / h
    rho_star = float(min(star.min(), edge.min()))
    return RegularityReport(
        rho_star=rho_star,
        per_cell_star_radius_ratio=star,
        per_cell_min_edge_ratio=edge,
        rho_required=rho,
        passed=bool(rho_star >= rho),
    )


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------


def generate_family(family, level, box, seed=0, split_at=None):
    """Generate one member of a mesh family on a rectangle.

    Parameters
    ----------
    family : one of FAMILIES
    level : refinement index >= 0; the mesh size roughly halves per level
    box : (x0, y0, x1, y1)
    seed : RNG seed for the randomized families
    split_at : optional (xs, ys) interior cross point; the rectangle is
        split into four sub-rectangles meshed independently and merged
        conformally, so no cell straddles the cross lines.
    """
    if family not in FAMILIES:
        raise MeshGenerationError(f"unknown mesh family {family!r}")
    if level < 0:
        raise MeshGenerationError("level must be >= 0")
    x0, y0, x1, y1 = (float(c) for c in box)
    if not (x1 > x0 and y1 > y0):
        raise MeshGenerationError("degenerate box")

    if split_at is not None:
        return _generate_split(family, level, (x0, y0, x1, y1), seed, split_at)

    gen = {
        "hexagonal": _gen_hexagonal,
        "nonconvex_octagon": _gen_octagon,
        "randomized_quad": _gen_quads,
        "voronoi": _gen_voronoi,
    }[family]
    return gen(level, (x0, y0, x1, y1), seed)


def _generate_split(family, level, box, seed, split_at):
    x0, y0, x1, y1 = box
    xs, ys = float(split_at[0]), float(split_at[1])
    if not (x0 < xs < x1 and y0 < ys < y1):
        raise MeshGenerationError("split point must be interior to the box")
    quadrants = [
        (x0, y0, xs, ys),
        (xs, y0, x1, ys),
        (x0, ys, xs, y1),
        (xs, ys, x1, y1),
    ]
    sub_level = max(level - 1, 0)
    parts = []
    for qi, qbox in enumerate(quadrants):
        child_seed = int(np.random.SeedSequence([int(seed), qi]).generate_state(1)[0])
        parts.append(generate_family(family, sub_level, qbox, seed=child_seed))
    verts, cells = _merge_submeshes(parts, box, (xs, ys))
    return PolygonalMesh.from_cells(verts, cells, domain_box=box)


def _check_cap(n_estimate):
    if n_estimate > MAX_GENERATED_VERTICES:
        raise MeshGenerationError(
            f"requested level needs ~{n_estimate} vertices, above the cap "
            f"{MAX_GENERATED_VERTICES}"
        )


def _gen_quads(level, box, seed):
    """Randomized quadrilateral grid; level 0 is the plain 2x2 grid."""
    x0, y0, x1, y1 = box
    n = 2 ** (level + 1)
    _check_cap((n + 1) ** 2)
    sx = (x1 - x0) / n
    sy = (y1 - y0) / n
    gx, gy = np.meshgrid(
        x0 + sx * np.arange(n + 1), y0 + sy * np.arange(n + 1), indexing="xy"
    )
    verts = np.column_stack([gx.ravel(), gy.ravel()])
    if level > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), level, 3]))
        noise = rng.uniform(-0.3, 0.3, size=(n + 1, n + 1, 2))
        noise[:, :, 0] *= sx
        noise[:, :, 1] *= sy
        interior = np.zeros((n + 1, n + 1), dtype=bool)
        interior[1:-1, 1:-1] = True
        left_right = np.zeros_like(interior)
        left_right[1:-1, [0, -1]] = True
        bottom_top = np.zeros_like(interior)
        bottom_top[[0, -1], 1:-1] = True
        disp = np.zeros_like(noise)
        disp[interior] = noise[interior]
        # boundary vertices slide along their side only
        disp[left_right, 1] = noise[left_right, 1]
        disp[bottom_top, 0] = noise[bottom_top, 0]
        verts = verts + disp.reshape(-1, 2)

    def vid(i, j):
        return j * (n + 1) + i

    cells = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    return PolygonalMesh.from_cells(verts, cells, domain_box=box)


def _gen_octagon(level, box, seed):
    """Nonconvex octagon grid: edge midpoints of an n x n grid displaced
    so that every interior cell has two reflex vertices."""
    x0, y0, x1, y1 = box
    n = 2 ** (level + 1)
    _check_cap(3 * (n + 1) ** 2)
    sx = (x1 - x0) / n
    sy = (y1 - y0) / n
    beta = 0.2

    nc = (n + 1) * (n + 1)
    nvm = (n + 1) * n  # vertical-edge midpoints: (i, j+1/2)
    verts = np.empty((nc + nvm + n * (n + 1), 2))

    def cid(i, j):
        return j * (n + 1) + i

    def vmid(i, j):
        return nc + j * (n + 1) + i

    def hmid(i, j):
        return nc + nvm + j * n + i

    for j in range(n + 1):
        for i in range(n + 1):
            verts[cid(i, j)] = (x0 + i * sx, y0 + j * sy)
    for j in range(n):
        for i in range(n + 1):
            dx = beta * sx if 0 < i < n else 0.0
            verts[vmid(i, j)] = (x0 + i * sx + dx, y0 + (j + 0.5) * sy)
    for j in range(n + 1):
        for i in range(n):
            dy = beta * sy if 0 < j < n else 0.0
            verts[hmid(i, j)] = (x0 + (i + 0.5) * sx, y0 + j * sy + dy)

    cells = [
        [
            cid(i, j),
            hmid(i, j),
            cid(i + 1, j),
            vmid(i + 1, j),
            cid(i + 1, j + 1),
            hmid(i, j + 1),
            cid(i, j + 1),
            vmid(i, j),
        ]
        for j in range(n)
        for i in range(n)
    ]
    return PolygonalMesh.from_cells(verts, cells, domain_box=box)


def _gen_hexagonal(level, box, seed):
    """Mainly hexagonal tiling, smoothly distorted.

    Column/row counts are rounded so the box sides cut hexagons through
    flat edges or cell centers, which avoids boundary slivers; a smooth
    coordinate map that vanishes on the boundary then distorts the cells.
    """
    x0, y0, x1, y1 = box
    lx = x1 - x0
    ly = y1 - y0
    a_target = lx / 2 ** (level + 3)
    ncols = max(2, round(lx / (1.5 * a_target)))
    a = lx / (1.5 * ncols)
    nrows = max(1, round(ly / (np.sqrt(3.0) * a)))
    uy = ly / (2 * nrows)
    ux = a / 2.0
    _check_cap(int(4.5 * ncols * nrows) + 16)

    cells_int = []  # integer lattice loops, units (ux, uy)
    for i in range(ncols + 1):
        odd = i % 2
        for j in range(-1, nrows + 1):
            cy = 2 * j + odd
            cx = 3 * i
            hexagon = [
                (cx + 2, cy),
                (cx + 1, cy + 1),
                (cx - 1, cy + 1),
                (cx - 2, cy),
                (cx - 1, cy - 1),
                (cx + 1, cy - 1),
            ]
            cells_int.append(hexagon)

    imax = 3 * ncols
    jmax = 2 * nrows
    vert_ids = {}
    coords = []
    loops = []
    for hexagon in cells_int:
        # quick reject: fully outside
        if max(p for p, q in hexagon) <= 0 or min(p for p, q in hexagon) >= imax:
            continue
        if max(q for p, q in hexagon) <= 0 or min(q for p, q in hexagon) >= jmax:
            continue
        inside = all(0 <= p <= imax and 0 <= q <= jmax for p, q in hexagon)
        if inside:
            loop = []
            for p, q in hexagon:
                key = (p, q)
                if key not in vert_ids:
                    vert_ids[key] = len(coords)
                    coords.append((x0 + ux * p, y0 + uy * q))
                loop.append(vert_ids[key])
            loops.append(loop)
        else:
            poly = np.array(
                [(x0 + ux * p, y0 + uy * q) for p, q in hexagon], dtype=float
            )
            clipped = _geom.clip_to_box(poly, box)
            if len(clipped) < 3 or abs(_geom.signed_area(clipped)) < 1e-12 * ux * uy:
                continue
            loop = []
            for x, y in clipped:
                # snap back to the lattice where possible so shared
                # vertices weld exactly
                p = x / ux - x0 / ux
                q = y / uy - y0 / uy
                pr, qr = round(p), round(q)
                if abs(p - pr) < 1e-9 and abs(q - qr) < 1e-9:
                    key = (int(pr), int(qr))
                    xy = (x0 + ux * pr, y0 + uy * qr)
                else:
                    key = ("f", round(x / (1e-9 * ux)), round(y / (1e-9 * uy)))
                    xy = (x, y)
                if key not in vert_ids:
                    vert_ids[key] = len(coords)
                    coords.append(xy)
                vtx = vert_ids[key]
                if not loop or loop[-1] != vtx:
                    loop.append(vtx)
            if len(loop) > 1 and loop[0] == loop[-1]:
                loop.pop()
            if len(loop) >= 3:
                loops.append(loop)

    verts = np.array(coords)
    verts[:, 0] = np.clip(verts[:, 0], x0, x1)
    verts[:, 1] = np.clip(verts[:, 1], y0, y1)

    # smooth distortion, zero on the boundary
    amp = 0.1 * a
    xi = (verts[:, 0] - x0) / lx
    eta = (verts[:, 1] - y0) / ly
    verts = verts + amp * np.column_stack(
        [
            np.sin(2 * np.pi * xi) * np.sin(2 * np.pi * eta),
            np.sin(4 * np.pi * xi) * np.sin(4 * np.pi * eta),
        ]
    )
    return PolygonalMesh.from_cells(verts, loops, domain_box=box)


def _gen_voronoi(level, box, seed):
    """Centroidal Voronoi tessellation: uniform seeds + Lloyd iterations.

    Seeds are mirrored across the box sides so every cell is clipped to
    the rectangle exactly; conformity is inherited from the shared
    Voronoi vertices.
    """
    x0, y0, x1, y1 = box
    nseeds = 2 * 4 ** level
    _check_cap(8 * nseeds + 64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), level, 17]))
    pts = np.column_stack(
        [rng.uniform(x0, x1, nseeds), rng.uniform(y0, y1, nseeds)]
    )

    def regions_of(vor, n):
        regions = []
        for i in range(n):
            reg = vor.regions[vor.point_region[i]]
            vv = vor.vertices[reg]
            ang = np.arctan2(vv[:, 1] - vv[:, 1].mean(), vv[:, 0] - vv[:, 0].mean())
            order = np.argsort(ang)
            regions.append(np.asarray(reg)[order])
        return regions

    if nseeds >= 2:
        for _ in range(LLOYD_ITERATIONS):
            vor = Voronoi(_mirror(pts, box))
            for i, reg in enumerate(regions_of(vor, nseeds)):
                pts[i] = _geom.centroid(vor.vertices[reg])

    vor = Voronoi(_mirror(pts, box))
    regions = regions_of(vor, nseeds)
    coords = vor.vertices.copy()
    # snap boundary vertices exactly onto the box
    tol = 1e-9 * max(x1 - x0, y1 - y0)
    for c, lo, hi in ((0, x0, x1), (1, y0, y1)):
        coords[np.abs(coords[:, c] - lo) < tol, c] = lo
        coords[np.abs(coords[:, c] - hi) < tol, c] = hi

    used = sorted({int(v) for reg in regions for v in reg})
    remap = {old: new for new, old in enumerate(used)}
    verts = coords[used]
    loops = [[remap[int(v)] for v in reg] for reg in regions]
    verts, loops = _weld_vertices(verts, loops, tol)

    med = np.median(
        np.concatenate([_geom.edge_lengths(verts[np.asarray(l)]) for l in loops])
    )
    verts, loops = _contract_short_edges(verts, loops, 0.08 * med, box)
    return PolygonalMesh.from_cells(verts, loops, domain_box=box)


def _mirror(pts, box):
    x0, y0, x1, y1 = box
    left = np.column_stack([2 * x0 - pts[:, 0], pts[:, 1]])
    right = np.column_stack([2 * x1 - pts[:, 0], pts[:, 1]])
    bottom = np.column_stack([pts[:, 0], 2 * y0 - pts[:, 1]])
    top = np.column_stack([pts[:, 0], 2 * y1 - pts[:, 1]])
    return np.vstack([pts, left, right, bottom, top])


def _weld_vertices(verts, loops, tol):
    """Merge vertices closer than tol using a spatial hash."""
    buckets = {}
    new_ids = np.full(len(verts), -1, dtype=np.int64)
    coords = []
    for i, (x, y) in enumerate(verts):
        kx, ky = int(np.floor(x / tol)), int(np.floor(y / tol))
        hit = -1
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for j in buckets.get((kx + dx, ky + dy), ()):
                    if abs(coords[j][0] - x) <= tol and abs(coords[j][1] - y) <= tol:
                        hit = j
                        break
                if hit >= 0:
                    break
            if hit >= 0:
                break
        if hit >= 0:
            new_ids[i] = hit
        else:
            new_ids[i] = len(coords)
            buckets.setdefault((kx, ky), []).append(len(coords))
            coords.append((x, y))
    out_loops = []
    for loop in loops:
        nl = []
        for v in loop:
            w = int(new_ids[v])
            if not nl or nl[-1] != w:
                nl.append(w)
        if len(nl) > 1 and nl[0] == nl[-1]:
            nl.pop()
        out_loops.append(nl)
    return np.array(coords), out_loops


def _constraint_lines(p, box, extra_lines, tol):
    """Axis-aligned lines (axis, value) that the point must stay on."""
    x0, y0, x1, y1 = box
    lines = []
    for axis, val in [(0, x0), (0, x1), (1, y0), (1, y1)] + list(extra_lines):
        if abs(p[axis] - val) < tol:
            lines.append((axis, val))
    return lines


def _contract_short_edges(verts, loops, min_len, box, extra_lines=()):
    """Collapse edges shorter than min_len, respecting boundary lines.

    A merged vertex must satisfy the union of both endpoints' line
    constraints; incompatible merges are skipped. Keeps the partition
    exact because all loops share the moved vertex.
    """
    verts = verts.copy()
    loops = [list(l) for l in loops]
    tol = 1e-9 * (abs(box[2] - box[0]) + abs(box[3] - box[1]))
    for _round in range(20):
        # collect current edges
        merged = {}
        did = False
        for loop in loops:
            n = len(loop)
            for j in range(n):
                a, b = loop[j], loop[(j + 1) % n]
                if a == b or (a, b) in merged or (b, a) in merged:
                    continue
                pa, pb = verts[a], verts[b]
                if np.hypot(*(pb - pa)) >= min_len:
                    continue
                ca = _constraint_lines(pa, box, extra_lines, tol)
                cb = _constraint_lines(pb, box, extra_lines, tol)
                lines = list(dict.fromkeys(ca + cb))
                axes = {ax for ax, _ in lines}
                target = 0.5 * (pa + pb)
                ok = True
                if len(lines) == 0:
                    pass
                elif len(axes) == 1:
                    vals = {val for _, val in lines}
                    if len(vals) > 1:
                        ok = False  # two parallel boundary lines
                    else:
                        (axis, val) = lines[0]
                        target = target.copy()
                        target[axis] = val
                else:
                    xv = [val for ax, val in lines if ax == 0]
                    yv = [val for ax, val in lines if ax == 1]
                    if len(set(xv)) > 1 or len(set(yv)) > 1:
                        ok = False
                    else:
                        target = np.array([xv[0], yv[0]])
                        if np.hypot(*(target - pa)) > 4 * min_len:
                            ok = False
                if not ok:
                    continue
                merged[(a, b)] = target
                did = True
        if not did:
            break
        # apply merges: b -> a with a moved to target
        alias = np.arange(len(verts))
        for (a, b), target in merged.items():
            ra = _find(alias, a)
            rb = _find(alias, b)
            if ra == rb:
                continue
            verts[ra] = target
            alias[rb] = ra
        alias = np.array([_find(alias, i) for i in range(len(verts))])
        new_loops = []
        for loop in loops:
            nl = []
            for v in loop:
                w = int(alias[v])
                if not nl or nl[-1] != w:
                    nl.append(w)
            while len(nl) > 1 and nl[0] == nl[-1]:
                nl.pop()
            if len(nl) >= 3:
                new_loops.append(nl)
            else:
                raise MeshGenerationError(
                    "short-edge cleanup degenerated a cell; decrease min_len"
                )
        loops = new_loops
    # drop unused vertices
    used = sorted({v for loop in loops for v in loop})
    remap = {old: new for new, old in enumerate(used)}
    verts = verts[used]
    loops = [[remap[v] for v in loop] for loop in loops]
    return verts, loops


def _find(alias, i):
    while alias[i] != i:
        i = alias[i]
    return int(i)


def _merge_submeshes(parts, box, cross):
    """Merge quadrant meshes conformally along the cross lines.

    Vertices are welded, then every cell edge lying on a cross line gets
    the other side's breakpoints inserted, so interface edges match
    vertex-pair-exactly.
    """
    xs, ys = cross
    offsets = []
    n = 0
    all_coords = []
    for m in parts:
        offsets.append(n)
        n += m.n_vertices
        all_coords.append(m.vertices)
    verts = np.vstack(all_coords)
    loops = []
    for m, off in zip(parts, offsets):
        for loop in m.cells:
            loops.append([int(v) + off for v in loop])
    scale = max(box[2] - box[0], box[3] - box[1])
    tol = 1e-9 * scale
    verts, loops = _weld_vertices(verts, loops, tol)

    lines = [(0, xs), (1, ys)]
    on_line = {}
    for axis, val in lines:
        mask = np.abs(verts[:, axis] - val) < tol
        verts[mask, axis] = val
        on_line[(axis, val)] = set(np.nonzero(mask)[0])

    new_loops = []
    for loop in loops:
        out = []
        nl = len(loop)
        for j in range(nl):
            a, b = loop[j], loop[(j + 1) % nl]
            out.append(a)
            for axis, val in lines:
                group = on_line[(axis, val)]
                if a in group and b in group:
                    other = 1 - axis
                    lo, hi = sorted((verts[a][other], verts[b][other]))
                    mids = [
                        v
                        for v in group
                        if v not in (a, b) and lo + tol < verts[v][other] < hi - tol
                    ]
                    mids.sort(key=lambda v: verts[v][other])
                    if verts[a][other] > verts[b][other]:
                        mids.reverse()
                    out.extend(mids)
                    break
        new_loops.append(out)
    return verts, new_loops


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------

_HEADER = "polymesh 2 1"


def save_mesh(mesh, path):
    """Write the line-oriented text format (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_cells}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for loop in mesh.cells:
            fh.write(" ".join([str(len(loop))] + [str(int(v)) for v in loop]) + "\n")


def load_mesh(path):
    """Read the text format; rejects nonconforming meshes.

    Clockwise cells are auto-reversed with a warning. Parse failures
    raise MeshFormatError with the offending line number.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise MeshFormatError(f"{path}: line {lineno}: {msg}")

    if not lines or lines[0].strip() != _HEADER:
        fail(1, f"expected header {_HEADER!r}")
    if len(lines) < 2:
        fail(2, "missing counts line")
    try:
        nv, nc = (int(t) for t in lines[1].split())
    except ValueError:
        fail(2, "counts line must be two integers")
    if len(lines) < 2 + nv + nc:
        fail(len(lines), f"expected {2 + nv + nc} lines, found {len(lines)}")
    verts = np.empty((nv, 2))
    for i in range(nv):
        try:
            x, y = (float(t) for t in lines[2 + i].split())
        except ValueError:
            fail(3 + i, "vertex line must be two floats")
        verts[i] = (x, y)
    cells = []
    for c in range(nc):
        lineno = 3 + nv + c
        toks = lines[2 + nv + c].split()
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            fail(lineno, "cell line must be integers")
        if not vals or vals[0] != len(vals) - 1:
            fail(lineno, "cell line must start with its vertex count")
        cells.append(vals[1:])
    return PolygonalMesh.from_cells(verts, cells, fix_orientation=True)
