"""
Extraction of the zero level surface of I_hφ from a 3D band mesh by
marching tetrahedra, with the solution sampled on it.

A vertex counts as inside when φ >= 0. Each tetrahedron whose vertices
are split 1:3 yields one triangle, and each 2:2 split yields a
quadrilateral cut into two triangles. Crossing points sit where the
linear interpolant of φ along the edge vanishes and are shared between
neighbouring tetrahedra through a global edge key.
"""
from dataclasses import dataclass

import numpy as np

from geometry import LevelSetGeometry
from mesh import SimplicialBandMesh


@dataclass
class TriangleSurface:
    """Triangle surface with one scalar value per point."""
    points: np.ndarray
    triangles: np.ndarray
    values: np.ndarray

    @property
    def value_range(self) -> tuple[float, float]:
        if not len(self.values):
            return (0.0, 0.0)
        return float(self.values.min()), float(self.values.max())


def surface_area(surface: TriangleSurface) -> float:
    corners = surface.points[surface.triangles]
    cross = np.cross(
        corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    return float(0.5 * np.linalg.norm(cross, axis=1).sum())


def _edge_triangles(
    simplices: np.ndarray, inside: np.ndarray
) -> np.ndarray:
    # Returns (triangles, 3, 2) vertex pairs of the crossing edges that
    # make up each triangle.
    counts = inside.sum(axis=1)
    # Inside vertices first, in their original order.
    order = np.argsort(~inside, axis=1, kind="stable")
    ordered = np.take_along_axis(simplices, order, axis=1)
    pieces = []

    lone_inside = ordered[counts == 1]
    pieces.append(np.stack(
        [np.stack([lone_inside[:, 0], lone_inside[:, k]], axis=1)
         for k in (1, 2, 3)], axis=1))

    lone_outside = ordered[counts == 3]
    pieces.append(np.stack(
        [np.stack([lone_outside[:, k], lone_outside[:, 3]], axis=1)
         for k in (0, 1, 2)], axis=1))

    split = ordered[counts == 2]
    a, b, c, d = split.T
    ac = np.stack([a, c], axis=1)
    ad = np.stack([a, d], axis=1)
    bd = np.stack([b, d], axis=1)
    bc = np.stack([b, c], axis=1)
    pieces.append(np.stack([ac, ad, bd], axis=1))
    pieces.append(np.stack([ac, bd, bc], axis=1))
    return np.concatenate(pieces)


def extract_zero_isosurface(
    mesh: SimplicialBandMesh, geometry: LevelSetGeometry,
    u_h: np.ndarray
) -> TriangleSurface:
    """
    Triangulates {I_hφ = 0} over the band and interpolates u_h linearly
    along the cut edges. An empty surface is returned if nothing is cut.
    """
    if mesh.dimension != 3:
        raise ValueError("Isosurface extraction needs a 3D band mesh.")
    u_h = np.asarray(u_h, dtype=float)
    phi = geometry.phi(mesh.vertices)
    # Vertex DOFs come first for both element orders.
    vertex_values = u_h[:mesh.n_vertices]
    pairs = _edge_triangles(mesh.simplices, phi[mesh.simplices] >= 0)
    if not len(pairs):
        return TriangleSurface(
            np.empty((0, 3)), np.empty((0, 3), dtype=int), np.empty(0))
    low = pairs.min(axis=2).astype(np.int64)
    high = pairs.max(axis=2).astype(np.int64)
    keys, inverse = np.unique(
        (low * mesh.n_vertices + high).ravel(), return_inverse=True)
    first, second = keys // mesh.n_vertices, keys % mesh.n_vertices
    t = phi[first] / (phi[first] - phi[second])
    points = (
        mesh.vertices[first]
        + t[:, None] * (mesh.vertices[second] - mesh.vertices[first]))
    values = (
        vertex_values[first]
        + t * (vertex_values[second] - vertex_values[first]))
    return TriangleSurface(points, inverse.reshape(-1, 3), values)
