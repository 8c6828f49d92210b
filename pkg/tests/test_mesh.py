import numpy as np
import pytest

import polyvem._geom as geom
from oracles import brute_force_inscribed_ratio
from polyvem.mesh import (
    FAMILIES,
    MeshConformityError,
    MeshFormatError,
    MeshGenerationError,
    PolygonalMesh,
    check_regularity,
    generate_family,
    load_mesh,
    mesh_diameter,
    save_mesh,
)

BOX = (-10.0, -10.0, 10.0, 10.0)
UNIT = (0.0, 0.0, 1.0, 1.0)


def single_square():
    return PolygonalMesh.from_cells(
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        [[0, 1, 2, 3]],
        domain_box=UNIT,
    )


class TestGenerators:
    def test_quad_level0_is_plain_2x2(self):
        mesh = generate_family("randomized_quad", 0, UNIT, seed=9)
        assert mesh.n_vertices == 9
        assert mesh.n_cells == 4
        # unperturbed tensor grid
        xs = np.unique(mesh.vertices[:, 0])
        assert np.allclose(xs, [0, 0.5, 1])

    def test_voronoi_level2_h_and_convexity(self):
        mesh = generate_family("voronoi", 2, BOX, seed=7)
        h = mesh_diameter(mesh)
        assert 3.5 < h < 7.0  # nominal 20 / 2^2
        assert all(
            geom.is_convex(mesh.cell_vertices(i), tol=1e-9)
            for i in range(mesh.n_cells)
        )

    def test_octagons_nonconvex_away_from_boundary(self):
        mesh = generate_family("nonconvex_octagon", 1, BOX, seed=0)
        interior = 0
        for ci in range(mesh.n_cells):
            loop = mesh.cells[ci]
            if mesh.boundary_vertex_flags[loop].any():
                continue
            interior += 1
            verts = mesh.cell_vertices(ci)
            assert len(verts) == 8
            assert not geom.is_convex(verts)
        assert interior >= 4

    @pytest.mark.parametrize("family", FAMILIES)
    def test_determinism(self, family):
        a = generate_family(family, 1, BOX, seed=42)
        b = generate_family(family, 1, BOX, seed=42)
        assert np.array_equal(a.vertices, b.vertices)
        assert all(np.array_equal(x, y) for x, y in zip(a.cells, b.cells))

    @pytest.mark.parametrize("family", FAMILIES)
    def test_h_halves_per_level(self, family, mesh_cache):
        # level 0 of the quad family is pinned to the unperturbed grid, so
        # its step to level 1 is checked against the perturbed ladder only
        levels = range(1, 5) if family == "randomized_quad" else range(0, 4)
        hs = [mesh_diameter(mesh_cache(family, lv, seed=7)) for lv in levels]
        ratios = np.array(hs[:-1]) / np.array(hs[1:])
        assert np.all(ratios > 1.6) and np.all(ratios < 2.45)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_partition_and_conformity(self, family, mesh_cache):
        mesh = mesh_cache(family, 2, seed=7)
        areas = sum(mesh.cell_area(i) for i in range(mesh.n_cells))
        assert areas == pytest.approx(400.0, rel=1e-10)
        mesh.validate()  # all conformity invariants
        # every interior edge has exactly two incident cells
        inc = mesh.edge_cells
        interior = ~mesh.boundary_edge_flags
        assert np.all(inc[interior, 1] >= 0)

    def test_vertex_cap(self):
        with pytest.raises(MeshGenerationError):
            generate_family("randomized_quad", 12, UNIT)

    def test_unknown_family(self):
        with pytest.raises(MeshGenerationError):
            generate_family("triangles", 1, UNIT)

    def test_quadrant_split_alignment(self):
        mesh = generate_family("voronoi", 3, (-1, -1, 1, 1), seed=3,
                               split_at=(0.0, 0.0))
        tol = 1e-12
        for ci in range(mesh.n_cells):
            verts = mesh.cell_vertices(ci)
            for axis in (0, 1):
                c = verts[:, axis]
                assert not ((c > tol).any() and (c < -tol).any())
        areas = sum(mesh.cell_area(i) for i in range(mesh.n_cells))
        assert areas == pytest.approx(4.0, rel=1e-10)


class TestRegularity:
    def test_single_square(self):
        report = check_regularity(single_square())
        assert report.per_cell_star_radius_ratio[0] == pytest.approx(
            0.5 / np.sqrt(2), rel=1e-6
        )
        assert report.per_cell_min_edge_ratio[0] == pytest.approx(
            1 / np.sqrt(2), rel=1e-12
        )
        assert report.rho_star == pytest.approx(0.35355339, rel=1e-6)

    def test_regular_hexagon_closed_form_and_brute_force(self):
        ang = np.linspace(0, 2 * np.pi, 7)[:-1]
        verts = np.column_stack([np.cos(ang), np.sin(ang)])
        mesh = PolygonalMesh.from_cells(verts, [list(range(6))])
        report = check_regularity(mesh)
        assert report.rho_star == pytest.approx(np.sqrt(3) / 4, rel=1e-6)
        assert report.per_cell_min_edge_ratio[0] == pytest.approx(0.5, rel=1e-12)
        brute = brute_force_inscribed_ratio(verts)
        assert report.per_cell_star_radius_ratio[0] == pytest.approx(
            brute, rel=1e-3
        )

    def test_nonconvex_octagon_vs_brute_force(self, mesh_cache):
        mesh = mesh_cache("nonconvex_octagon", 1)
        ci = next(
            i for i in range(mesh.n_cells)
            if not mesh.boundary_vertex_flags[mesh.cells[i]].any()
        )
        verts = mesh.cell_vertices(ci)
        report = check_regularity(
            PolygonalMesh.from_cells(verts, [list(range(len(verts)))])
        )
        assert report.per_cell_star_radius_ratio[0] == pytest.approx(
            brute_force_inscribed_ratio(verts), rel=1e-3
        )

    def test_randomized_quads_positive(self, mesh_cache):
        for seed in (0, 1, 2):
            mesh = generate_family("randomized_quad", 2, BOX, seed=seed)
            assert check_regularity(mesh).rho_star > 0.0

    def test_pass_flag(self):
        report = check_regularity(single_square(), rho=0.3)
        assert report.passed
        report = check_regularity(single_square(), rho=0.4)
        assert not report.passed
        assert 0.0 < report.rho_star < 1.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_uniform_regularity_across_levels(self, family, mesh_cache):
        # family constant independent of level: the refined meshes may not
        # degrade more than 10% below the coarse-level constant
        rhos = [
            check_regularity(mesh_cache(family, lv, seed=7)).rho_star
            for lv in range(5)
        ]
        assert min(rhos) > 0.04
        assert min(rhos[3:]) >= 0.9 * min(rhos[:2])


class TestDiameterAndIO:
    def test_single_square_diameter(self):
        assert mesh_diameter(single_square()) == pytest.approx(np.sqrt(2))

    def test_2x2_grid_diameter(self):
        mesh = generate_family("randomized_quad", 0, UNIT)
        assert mesh_diameter(mesh) == pytest.approx(np.sqrt(2) / 2)

    def test_voronoi_h_tracks_level(self, mesh_cache):
        diam = 20 * np.sqrt(2)
        for level in (1, 2, 3):
            h = mesh_diameter(mesh_cache("voronoi", level, seed=7))
            assert diam / 2 ** level / 2 < h < diam / 2 ** level * 2

    def test_roundtrip_bit_exact(self, tmp_path, mesh_cache):
        mesh = mesh_cache("voronoi", 2, seed=7)
        path = tmp_path / "m.poly"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert np.array_equal(back.vertices, mesh.vertices)
        assert all(np.array_equal(a, b) for a, b in zip(back.cells, mesh.cells))

    def test_roundtrip_single_square(self, tmp_path):
        mesh = single_square()
        path = tmp_path / "sq.poly"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert np.array_equal(back.vertices, mesh.vertices)
        assert list(back.cells[0]) == [0, 1, 2, 3]

    def test_edge_shared_by_three_cells(self, tmp_path):
        path = tmp_path / "bad.poly"
        path.write_text(
            "polymesh 2 1\n"
            "5 3\n"
            "0 0\n1 0\n1 1\n0 1\n2 0.5\n"
            "4 0 1 2 3\n"
            "3 1 2 4\n"
            "3 2 1 4\n"
        )
        with pytest.raises(MeshConformityError, match=r"\(1, 2\)"):
            load_mesh(path)

    def test_clockwise_cell_reversed_with_warning(self, tmp_path):
        path = tmp_path / "cw.poly"
        path.write_text(
            "polymesh 2 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 3 2 1\n"
        )
        with pytest.warns(UserWarning, match="clockwise"):
            mesh = load_mesh(path)
        assert mesh.cell_area(0) > 0

    def test_parse_error_line_number(self, tmp_path):
        path = tmp_path / "broken.poly"
        path.write_text("polymesh 2 1\n2 1\n0 0\nnot-a-number 3\n3 0 1 2\n")
        with pytest.raises(MeshFormatError, match="line 4"):
            load_mesh(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.poly"
        path.write_text("something\n")
        with pytest.raises(MeshFormatError, match="line 1"):
            load_mesh(path)

    def test_t_junction_rejected(self):
        # cell A spans the full edge that B and C split: classic hanging
        # vertex, must be refused
        verts = np.array(
            [[0, 0], [1, 0], [1, 1], [0, 1], [2, 0], [2, 0.5], [2, 1], [1, 0.5]]
        )
        cells = [
            [0, 1, 2, 3],
            [1, 4, 5, 7],
            [7, 5, 6, 2],
        ]
        with pytest.raises(MeshConformityError):
            PolygonalMesh.from_cells(verts, cells, domain_box=(0, 0, 2, 1))
