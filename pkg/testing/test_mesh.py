"""Unit Tests the mesh.py module."""
import collections
import itertools
import math
import unittest

import numpy as np

import __init__
from geometry import PhaseFieldProfile, band_parameters, circle, sphere, rho
from mesh import *
from quadrature import map_to_element, rule_for


def _circle_mesh(
    h: float = 0.075, epsilon: float = 0.4, q: int = 2,
    element_order: int = 1
) -> SimplicialBandMesh:
    geometry = circle()
    grid = BackgroundGrid.covering(geometry.lower, geometry.upper, h)
    return build_band_mesh(
        grid, geometry, PhaseFieldProfile(q, epsilon), rule_for(2, q),
        element_order)


def _sphere_mesh() -> SimplicialBandMesh:
    geometry = sphere()
    grid = BackgroundGrid.covering(geometry.lower, geometry.upper, 0.1125)
    return build_band_mesh(
        grid, geometry, PhaseFieldProfile(1, 0.6), rule_for(3, 1))


class Test_mesh(unittest.TestCase):

    def test_kuhn_subdivide(self) -> None:
        for dimension, count in ((2, 2), (3, 6)):
            simplices = kuhn_subdivide(np.full(dimension, 0.5), 0.25)
            self.assertEqual(simplices.shape, (count, dimension + 1, dimension))
            volumes, gradients = element_geometry(simplices)
            self.assertTrue(np.allclose(
                volumes, 0.25 ** dimension / math.factorial(dimension)))
            self.assertAlmostEqual(volumes.sum(), 0.25 ** dimension)
            self.assertTrue(np.allclose(gradients.sum(axis=1), 0))
            edges = simplices[:, 1:] - simplices[:, :1]
            self.assertTrue(np.allclose(
                np.einsum("kjd,kmd->kjm", gradients[:, 1:], edges),
                np.eye(dimension)))
        self.assertRaises(ValueError, kuhn_subdivide, np.zeros(4), 1)
        self.assertRaises(ValueError, kuhn_subdivide, np.zeros(2), 0)

    def test_conforming(self) -> None:
        # Faces of the Kuhn simplices of a 2x2x2 block appear twice
        # inside the block and once on its boundary.
        faces = collections.Counter()
        for corner in itertools.product((0, 1), repeat=3):
            for simplex in kuhn_subdivide(np.array(corner), 1):
                for face in itertools.combinations(simplex.tolist(), 3):
                    faces[tuple(sorted(map(tuple, face)))] += 1
        for face, count in faces.items():
            points = np.array(face)
            on_boundary = any(
                np.all(points[:, axis] == points[0, axis])
                and points[0, axis] in (0, 2) for axis in range(3))
            self.assertEqual(count, 1 if on_boundary else 2, face)

    def test_background_grid(self) -> None:
        grid = BackgroundGrid.covering((-1.2, -1.2), (1.2, 1.2), 0.075)
        self.assertEqual(grid.cells_per_axis, (32, 32))
        self.assertEqual(grid.vertices_per_axis, (33, 33))
        self.assertEqual(grid.cell_count, 1024)
        self.assertTrue(np.allclose(grid.upper, [1.2, 1.2]))
        self.assertTrue(np.allclose(
            grid.vertex_coordinates(np.array([0, 34])),
            [[-1.2, -1.2], [-1.125, -1.125]]))
        self.assertRaises(
            ValueError, BackgroundGrid.covering, (0, 0), (1, 1), 0.3)
        self.assertRaises(
            ValueError, BackgroundGrid.covering, (0, 0), (1, 1), 0)
        self.assertRaises(ValueError, BackgroundGrid, (0, 0), -1, (2, 2))

    def test_band_selection(self) -> None:
        mesh = _circle_mesh()
        band = band_parameters(mesh.h, mesh.epsilon, circle().c1)
        expected = []
        offsets = kuhn_subdivide(np.zeros(2), 1)
        for cell in itertools.product(range(32), repeat=2):
            simplices = mesh.grid.origin + mesh.h * (np.array(cell) + offsets)
            for kuhn, simplex in enumerate(simplices):
                points, _ = map_to_element(mesh.rule, simplex)
                if np.abs(circle().phi(points)).max() <= band.half_width:
                    expected.append(
                        (np.ravel_multi_index(cell, (32, 32)), kuhn))
        self.assertEqual(
            list(zip(mesh.cell_ids.tolist(), mesh.kuhn_ids.tolist())),
            expected)

    def test_rho_floor(self) -> None:
        for mesh in (_circle_mesh(), _sphere_mesh()):
            q = mesh.profile.degree_q
            floor = (mesh.h / mesh.epsilon) ** (2 * (q + 1))
            band = band_parameters(
                mesh.h, mesh.epsilon, mesh.geometry.c1)
            self.assertAlmostEqual(band.rho_floor(q), floor, delta=1e-15)
            points = np.einsum(
                "qj,kjd->kqd", mesh.rule.points, mesh.element_coordinates())
            values = rho(
                mesh.profile, mesh.geometry,
                points.reshape(-1, mesh.dimension))
            self.assertGreaterEqual(values.min(), floor - 1e-14)

    def test_mesh_arrays(self) -> None:
        mesh = _circle_mesh()
        self.assertEqual(mesh.dofs_per_element, 3)
        self.assertEqual(mesh.n_dofs, mesh.n_vertices)
        self.assertFalse(mesh.simplices.flags.writeable)
        again = _circle_mesh()
        self.assertTrue(np.array_equal(mesh.simplices, again.simplices))
        self.assertTrue(np.array_equal(mesh.vertices, again.vertices))

    def test_quadratic_dofs(self) -> None:
        mesh = _circle_mesh(element_order=2)
        self.assertEqual(mesh.dofs_per_element, 6)
        self.assertEqual(mesh.n_dofs, mesh.n_vertices + len(mesh.edges))
        first = mesh.dofs[0]
        simplex = mesh.simplices[0]
        self.assertTrue(np.array_equal(first[:3], simplex))
        for position, (a, b) in enumerate(
            itertools.combinations(range(3), 2)
        ):
            self.assertTrue(np.allclose(
                mesh.dof_coordinates[first[3 + position]],
                mesh.vertices[[simplex[a], simplex[b]]].mean(axis=0)))

    def test_empty_band(self) -> None:
        grid = BackgroundGrid.covering((2, 2), (3, 3), 0.1)
        self.assertRaises(
            EmptyBandError, build_band_mesh, grid, circle(),
            PhaseFieldProfile(1, 0.2), rule_for(2, 1))
        self.assertRaises(
            ValueError, build_band_mesh, grid, circle(),
            PhaseFieldProfile(1, 0.2), rule_for(2, 1), 3)

    def test_locate_circle_points(self) -> None:
        mesh = _circle_mesh()
        angles = np.linspace(0, 2 * math.pi, 200, endpoint=False)
        points = np.column_stack([np.cos(angles), np.sin(angles)])
        elements, barycentric = locate_point(mesh, points)
        self.assertTrue(np.all(barycentric >= -1e-12))
        self.assertTrue(np.allclose(barycentric.sum(axis=1), 1))
        self.assertTrue(np.allclose(
            np.einsum("kj,kjd->kd", barycentric,
                      mesh.element_coordinates(elements)), points))

    def test_locate_vertices_and_centroids(self) -> None:
        mesh = _circle_mesh()
        elements, barycentric = locate_point(mesh, mesh.vertices)
        self.assertTrue(np.allclose(barycentric.max(axis=1), 1))
        centroids = mesh.element_coordinates().mean(axis=1)
        elements, _ = locate_point(mesh, centroids)
        self.assertTrue(np.array_equal(elements, np.arange(mesh.n_elements)))
        element, coordinates = locate_point(mesh, centroids[5])
        self.assertEqual(element, 5)
        self.assertTrue(np.allclose(coordinates, 1 / 3))

    def test_point_not_found(self) -> None:
        mesh = _circle_mesh()
        with self.assertRaises(PointNotFoundError) as context:
            locate_point(mesh, np.array([[1.0, 0.0], [0.0, 0.0]]))
        self.assertEqual(list(context.exception.indices), [1])
        self.assertRaises(ValueError, locate_point, mesh, np.zeros(3))

    def test_sphere_mesh(self) -> None:
        mesh = _sphere_mesh()
        faces = collections.Counter(
            tuple(sorted(face)) for simplex in mesh.simplices.tolist()
            for face in itertools.combinations(simplex, 3))
        self.assertLessEqual(max(faces.values()), 2)
        rng = np.random.default_rng(3)
        points = rng.normal(size=(100, 3))
        points /= np.linalg.norm(points, axis=1)[:, None]
        elements, barycentric = locate_point(mesh, points)
        self.assertTrue(np.allclose(
            np.einsum("kj,kjd->kd", barycentric,
                      mesh.element_coordinates(elements)), points))


if __name__ == "__main__":
    unittest.main()
