"""
Tests for the mesh_tri module.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cordes.errors import ParameterError
from cordes.mesh_tri import (
    check_conforming,
    initial_tri_mesh,
    nvb_refine,
    refine_uniform,
)


@pytest.fixture
def coarse_mesh():
    """The 2x2 criss triangulation."""
    return initial_tri_mesh(n=2)


class TestInitialMesh:
    """Tests for initial triangulations."""

    def test_counts(self, coarse_mesh):
        """Test that each square gives two triangles."""
        assert coarse_mesh.n_triangles == 8
        assert coarse_mesh.n_vertices == 9
        assert check_conforming(coarse_mesh)

    def test_refinement_edge_is_longest(self, coarse_mesh):
        """Test that local edge 0 is the hypotenuse."""
        p = coarse_mesh.corners()
        ref = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        np.testing.assert_allclose(ref, coarse_mesh.diameters())

    def test_orientation(self, coarse_mesh):
        """Test counterclockwise orientation."""
        assert np.all(coarse_mesh.signed_areas() > 0.0)
        assert coarse_mesh.areas().sum() == pytest.approx(4.0)

    def test_cross(self):
        """Test the triangulation through an interior point."""
        mesh = initial_tri_mesh(cross=(0.1, 0.2))
        assert mesh.n_triangles == 8
        assert check_conforming(mesh)

    def test_invalid(self):
        """Test rejected arguments."""
        with pytest.raises(ParameterError):
            initial_tri_mesh()
        with pytest.raises(ParameterError):
            initial_tri_mesh(cross=(-1.0, 0.0))

    def test_edge_table(self, coarse_mesh):
        """Test the unique edge count of the criss mesh."""
        edges, tri_edges = coarse_mesh.edge_table()
        assert len(edges) == 16
        assert tri_edges.shape == (8, 3)
        assert int(coarse_mesh.boundary_edge_mask(edges).sum()) == 8


class TestBisection:
    """Tests for newest-vertex bisection."""

    def test_single_mark_on_one_square(self):
        """Test the closure on a single square."""
        mesh = nvb_refine(initial_tri_mesh(n=1), {0})
        assert mesh.n_triangles == 4
        assert check_conforming(mesh)

    def test_marked_are_refined(self, coarse_mesh):
        """Test that marked triangles disappear and ids are preserved."""
        fine = nvb_refine(coarse_mesh, {2, 5})
        assert check_conforming(fine)
        np.testing.assert_array_equal(fine.vertices[:9], coarse_mesh.vertices)
        old = {tuple(sorted(t)) for t in coarse_mesh.triangles.tolist()}
        new = {tuple(sorted(t)) for t in fine.triangles.tolist()}
        for t in (2, 5):
            assert tuple(sorted(coarse_mesh.triangles[t].tolist())) not in new
        assert len(old & new) < len(old)

    def test_generations(self, coarse_mesh):
        """Test that generations count bisections."""
        fine = nvb_refine(coarse_mesh, {0})
        assert fine.generations.max() >= 1
        assert fine.generations.min() == 0

    def test_empty_marks(self, coarse_mesh):
        """Test that no marks return the mesh unchanged."""
        assert nvb_refine(coarse_mesh, []) is coarse_mesh

    def test_out_of_range(self, coarse_mesh):
        """Test that an invalid index raises."""
        with pytest.raises(ParameterError):
            nvb_refine(coarse_mesh, {8})

    def test_uniform_quadruples(self, coarse_mesh):
        """Test that uniform refinement gives four children per triangle."""
        fine = refine_uniform(coarse_mesh)
        assert fine.n_triangles == 4 * coarse_mesh.n_triangles
        assert fine.h_max() == pytest.approx(0.5 * coarse_mesh.h_max())
        assert check_conforming(fine)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 10_000), min_size=1, max_size=8))
    def test_random_refinements(self, picks):
        """Test conformity and shape regularity along random refinements."""
        mesh = initial_tri_mesh(n=2)
        for pick in picks:
            previous = mesh
            mesh = nvb_refine(mesh, {pick % mesh.n_triangles})
            assert check_conforming(mesh)
            assert mesh.n_triangles > previous.n_triangles
            assert mesh.areas().sum() == pytest.approx(4.0)
        # bisection of right isosceles triangles keeps them similar
        np.testing.assert_allclose(mesh.min_angles(), math.pi / 4.0, atol=1e-12)

    def test_long_refinement_sequence(self):
        """Test conformity over a hundred rounds of random marks."""
        rng = np.random.default_rng(37)
        mesh = initial_tri_mesh(n=2)
        for _ in range(100):
            previous = mesh
            marked = rng.choice(mesh.n_triangles, size=2, replace=False)
            mesh = nvb_refine(mesh, marked)
            assert check_conforming(mesh)
            assert mesh.n_triangles >= previous.n_triangles + 2
        assert mesh.areas().sum() == pytest.approx(4.0)


class TestConformityCheck:
    """Tests for the conformity check."""

    def test_hanging_vertex_fails(self, coarse_mesh):
        """Test that bisecting one triangle without its neighbor fails."""
        a, b, c = coarse_mesh.triangles[0]
        m = len(coarse_mesh.vertices)
        midpoint = 0.5 * (coarse_mesh.vertices[a] + coarse_mesh.vertices[b])
        vertices = np.vstack([coarse_mesh.vertices, midpoint])
        triangles = np.vstack([coarse_mesh.triangles[1:], [[c, a, m], [b, c, m]]])
        broken = type(coarse_mesh)(vertices, triangles, np.zeros(len(triangles), dtype=np.int64))
        assert not check_conforming(broken)

    def test_clockwise_fails(self, coarse_mesh):
        """Test that a reversed triangle fails."""
        triangles = coarse_mesh.triangles.copy()
        triangles[0] = triangles[0, [1, 0, 2]]
        flipped = type(coarse_mesh)(coarse_mesh.vertices, triangles, coarse_mesh.generations)
        assert not check_conforming(flipped)
