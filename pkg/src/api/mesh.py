"""
This module builds the narrow-band simplicial mesh the scheme is
solved on, and locates points inside it.

The domain box is covered by a uniform background grid of square or
cubic cells with spacing h. Each cell is split into simplices by the
Kuhn subdivision: for every permutation π of the axes there is one
simplex with vertices

    v_0 = corner, v_k = v_{k-1} + h * e_{π(k)}

which gives 2 triangles per square and 6 tetrahedra per cube. Every
cell uses the same diagonal, so neighbouring cells match face to face
and the mesh is conforming.

A simplex is kept if the level-set function is small at every
quadrature point of the rule in use:

    max_i |φ(b_i)| <= ε * arccos(h / ε)

so ρ >= (h/ε)^(2(q+1)) at every quadrature point of the band. Elements
are ordered by cell (lexicographic, first axis slowest) and then by
axis permutation, so the same inputs always give the same mesh.
"""
import functools
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

try:
    from api._utils import _split_range, _in_box
    from api.geometry import (
        LevelSetGeometry, PhaseFieldProfile, band_parameters)
    from api.quadrature import QuadratureRule
except ImportError:
    try:
        from _utils import _split_range, _in_box
        from geometry import (
            LevelSetGeometry, PhaseFieldProfile, band_parameters)
        from quadrature import QuadratureRule
    except ImportError:
        from ._utils import _split_range, _in_box
        from .geometry import (
            LevelSetGeometry, PhaseFieldProfile, band_parameters)
        from .quadrature import QuadratureRule


logger = logging.getLogger(__name__)

ELEMENT_ORDERS = (1, 2)
# Candidate simplices examined per band-selection batch.
SELECTION_BATCH = 60000
# Barycentric coordinates down to this value count as inside.
BARYCENTRIC_TOLERANCE = 1e-12
# Relative mismatch allowed between the domain box and the grid extent.
GRID_FIT_TOLERANCE = 1e-9


class EmptyBandError(ValueError):
    """Raised when band selection keeps no element."""


class PointNotFoundError(LookupError):
    """Raised when points lie outside every band element."""

    def __init__(self, message: str, indices: np.ndarray) -> None:
        super().__init__(message)
        self.indices = np.asarray(indices)


class BackgroundGrid:
    """
    Uniform grid of square (2D) or cubic (3D) cells of size h,
    starting at `origin` with `cells_per_axis` cells along each axis.
    """

    def __init__(
        self, origin: np.ndarray, h: float,
        cells_per_axis: tuple[int, ...]
    ) -> None:
        self.origin = origin
        self.h = h
        self.cells_per_axis = cells_per_axis

    @classmethod
    def covering(
        cls, lower: np.ndarray, upper: np.ndarray, h: float
    ) -> "BackgroundGrid":
        """
        Grid covering the box [lower, upper] exactly. The spacing must
        divide every side length.
        """
        lower = np.asarray(lower, dtype=float)
        extent = np.asarray(upper, dtype=float) - lower
        if not h > 0:
            raise ValueError("Grid spacing must be positive.")
        cells = np.rint(extent / h).astype(int)
        if np.any(cells < 1) or np.any(
            np.abs(cells * h - extent) > GRID_FIT_TOLERANCE * extent
        ):
            raise ValueError(
                f"Grid spacing {h} does not divide the domain box "
                f"{extent.tolist()}.")
        return cls(lower, h, tuple(int(cell) for cell in cells))

    @property
    def origin(self) -> np.ndarray:
        return self._origin

    @origin.setter
    def origin(self, origin: np.ndarray) -> None:
        origin = np.array(origin, dtype=float)
        if origin.ndim != 1 or len(origin) not in (2, 3):
            raise ValueError("Grid origin must be a 2D or 3D point.")
        origin.flags.writeable = False
        self._origin = origin

    @property
    def h(self) -> float:
        return self._h

    @h.setter
    def h(self, h: float) -> None:
        if not isinstance(h, (int, float)):
            raise TypeError("Grid spacing must be a number.")
        if not h > 0:
            raise ValueError("Grid spacing must be positive.")
        self._h = float(h)

    @property
    def cells_per_axis(self) -> tuple[int, ...]:
        return self._cells_per_axis

    @cells_per_axis.setter
    def cells_per_axis(self, cells_per_axis: tuple[int, ...]) -> None:
        cells_per_axis = tuple(cells_per_axis)
        if len(cells_per_axis) != len(self.origin):
            raise ValueError("One cell count is needed per axis.")
        if not all(
            isinstance(cells, (int, np.integer)) for cells in cells_per_axis
        ):
            raise TypeError("Cell counts must be integers.")
        if min(cells_per_axis) < 1:
            raise ValueError("Cell counts must be at least 1.")
        self._cells_per_axis = tuple(int(cells) for cells in cells_per_axis)

    @property
    def dimension(self) -> int:
        return len(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.h * np.array(self.cells_per_axis)

    @property
    def vertices_per_axis(self) -> tuple[int, ...]:
        return tuple(cells + 1 for cells in self.cells_per_axis)

    @property
    def cell_count(self) -> int:
        return math.prod(self.cells_per_axis)

    def vertex_coordinates(self, vertex_ids: np.ndarray) -> np.ndarray:
        """Coordinates of grid vertices given by linear index."""
        multi = np.unravel_index(vertex_ids, self.vertices_per_axis)
        return self.origin + self.h * np.stack(multi, axis=-1)

    def __repr__(self) -> str:
        return (
            f"BackgroundGrid(origin={self.origin.tolist()}, h={self.h}, "
            f"cells_per_axis={self.cells_per_axis})")


@functools.cache
def _kuhn_offsets(dimension: int) -> np.ndarray:
    # (dimension!, dimension + 1, dimension) integer vertex offsets, one
    # simplex per axis permutation in itertools order.
    offsets = []
    for permutation in itertools.permutations(range(dimension)):
        vertex = np.zeros(dimension, dtype=int)
        simplex = [vertex.copy()]
        for axis in permutation:
            vertex[axis] += 1
            simplex.append(vertex.copy())
        offsets.append(simplex)
    offsets = np.array(offsets)
    offsets.flags.writeable = False
    return offsets


@functools.cache
def _permutation_lookup(dimension: int) -> np.ndarray:
    # Maps the code sum_k π(k) * n^k of an axis permutation to its index.
    lookup = np.full(dimension ** dimension, -1)
    powers = dimension ** np.arange(dimension)
    for index, permutation in enumerate(
        itertools.permutations(range(dimension))
    ):
        lookup[np.array(permutation) @ powers] = index
    lookup.flags.writeable = False
    return lookup


def kuhn_subdivide(corner: np.ndarray, size: float) -> np.ndarray:
    """
    Splits the axis-aligned square/cube with lower corner `corner` and
    side `size` into 2 triangles or 6 tetrahedra, returned as vertex
    coordinates of shape (simplices, dimension + 1, dimension).
    """
    corner = np.asarray(corner, dtype=float)
    if corner.ndim != 1 or len(corner) not in (2, 3):
        raise ValueError("Cell corner must be a 2D or 3D point.")
    if not size > 0:
        raise ValueError("Cell size must be positive.")
    return corner + size * _kuhn_offsets(len(corner))


def element_geometry(
    coordinates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Volumes (k,) and barycentric-coordinate gradients
    (k, dimension + 1, dimension) of simplices with vertex coordinates
    of shape (k, dimension + 1, dimension).
    """
    dimension = coordinates.shape[-1]
    edges = coordinates[:, 1:] - coordinates[:, :1]
    volumes = np.abs(np.linalg.det(edges)) / math.factorial(dimension)
    inverse = np.linalg.inv(edges)
    gradients = np.empty(coordinates.shape)
    gradients[:, 1:] = np.swapaxes(inverse, 1, 2)
    gradients[:, 0] = -gradients[:, 1:].sum(axis=1)
    return volumes, gradients


@dataclass(frozen=True, eq=False)
class SimplicialBandMesh:
    """
    The band mesh D_h. `simplices` index `vertices`; `dofs` gives the
    degrees of freedom of each element (its vertices, followed by its
    edge midpoints for quadratic elements, edges in
    combinations(range(dimension + 1), 2) order). `cell_ids` and
    `kuhn_ids` record which grid cell and which axis permutation each
    element comes from.
    """
    grid: BackgroundGrid
    geometry: LevelSetGeometry
    profile: PhaseFieldProfile
    rule: QuadratureRule
    element_order: int
    vertices: np.ndarray
    vertex_ids: np.ndarray
    simplices: np.ndarray
    cell_ids: np.ndarray
    kuhn_ids: np.ndarray
    edges: np.ndarray
    dofs: np.ndarray
    dof_coordinates: np.ndarray
    element_grad_interp_phi: np.ndarray

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def epsilon(self) -> float:
        return self.profile.epsilon

    @property
    def n_elements(self) -> int:
        return len(self.simplices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coordinates)

    @property
    def dofs_per_element(self) -> int:
        return self.dofs.shape[1]

    def element_coordinates(
        self, elements: np.ndarray | slice = slice(None)
    ) -> np.ndarray:
        return self.vertices[self.simplices[elements]]

    def __repr__(self) -> str:
        return (
            f"SimplicialBandMesh(dimension={self.dimension}, h={self.h}, "
            f"elements={self.n_elements}, dofs={self.n_dofs}, "
            f"element_order={self.element_order})")


def _candidate_cells(
    grid: BackgroundGrid, geometry: LevelSetGeometry, limit: float
) -> np.ndarray:
    # Multi-indices of cells whose centre satisfies |φ| <= limit, in
    # lexicographic order, scanned one slab of the first axis at a time.
    dimension = grid.dimension
    rest = np.indices(grid.cells_per_axis[1:]).reshape(dimension - 1, -1).T
    candidates = []
    for first in range(grid.cells_per_axis[0]):
        multi = np.column_stack([np.full(len(rest), first), rest])
        centres = grid.origin + (multi + 0.5) * grid.h
        candidates.append(multi[np.abs(geometry.phi(centres)) <= limit])
    return np.concatenate(candidates)


def build_band_mesh(
    grid: BackgroundGrid, geometry: LevelSetGeometry,
    profile: PhaseFieldProfile, rule: QuadratureRule,
    element_order: int = 1
) -> SimplicialBandMesh:
    """
    Keeps every Kuhn simplex of the grid whose quadrature points all
    satisfy |φ| <= ε·arccos(h/ε) and numbers its degrees of freedom.
    Raises EmptyBandError if no simplex qualifies.
    """
    if element_order not in ELEMENT_ORDERS:
        raise ValueError(f"Element order must be one of {ELEMENT_ORDERS}.")
    if rule.dimension != grid.dimension:
        raise ValueError("Quadrature rule dimension does not match grid.")
    if geometry.dimension != grid.dimension:
        raise ValueError("Geometry dimension does not match grid.")
    dimension = grid.dimension
    h = grid.h
    band = band_parameters(h, profile.epsilon, geometry.c1)
    limit = (
        profile.epsilon * math.pi / 2
        + geometry.c1 * h * math.sqrt(dimension))
    candidates = _candidate_cells(grid, geometry, limit)
    offsets = _kuhn_offsets(dimension)
    per_cell = len(offsets)

    vertex_ids, cell_ids, kuhn_ids = [], [], []
    batch = max(1, SELECTION_BATCH // per_cell)
    for chunk in _split_range(len(candidates), batch):
        cells = candidates[chunk]
        vertex_multi = cells[:, None, None, :] + offsets[None]
        coordinates = grid.origin + h * vertex_multi
        points = np.einsum("qj,kpjd->kpqd", rule.points, coordinates)
        values = geometry.phi(points.reshape(-1, dimension))
        values = np.abs(values).reshape(len(cells), per_cell, rule.size)
        kept_cells, kept_kuhn = np.nonzero(
            values.max(axis=2) <= band.half_width)
        kept_multi = vertex_multi[kept_cells, kept_kuhn].reshape(
            -1, dimension)
        vertex_ids.append(np.ravel_multi_index(
            kept_multi.T, grid.vertices_per_axis).reshape(-1, dimension + 1))
        cell_ids.append(np.ravel_multi_index(
            cells[kept_cells].T, grid.cells_per_axis))
        kuhn_ids.append(kept_kuhn)
    if not candidates.size or not sum(len(ids) for ids in cell_ids):
        raise EmptyBandError(
            "No element satisfies the band criterion; Γ may lie outside "
            "the domain or ε is too small for the grid.")
    element_vertex_ids = np.concatenate(vertex_ids)
    unique_ids, inverse = np.unique(element_vertex_ids, return_inverse=True)
    simplices = inverse.reshape(element_vertex_ids.shape)
    vertices = grid.vertex_coordinates(unique_ids)

    volumes, gradients = element_geometry(vertices[simplices])
    phi_vertices = geometry.phi(vertices)
    grad_interp_phi = np.linalg.norm(
        np.einsum("kj,kjd->kd", phi_vertices[simplices], gradients), axis=1)

    edges = np.empty((0, 2), dtype=int)
    dofs = simplices
    dof_coordinates = vertices
    if element_order == 2:
        edges, dofs = _number_edges(simplices, len(vertices))
        dof_coordinates = np.vstack(
            [vertices, vertices[edges].mean(axis=1)])

    mesh = SimplicialBandMesh(
        grid=grid, geometry=geometry, profile=profile, rule=rule,
        element_order=element_order, vertices=vertices,
        vertex_ids=unique_ids, simplices=simplices,
        cell_ids=np.concatenate(cell_ids),
        kuhn_ids=np.concatenate(kuhn_ids), edges=edges, dofs=dofs,
        dof_coordinates=dof_coordinates,
        element_grad_interp_phi=grad_interp_phi)
    for array in (
        mesh.vertices, mesh.vertex_ids, mesh.simplices, mesh.cell_ids,
        mesh.kuhn_ids, mesh.edges, mesh.dofs, mesh.dof_coordinates,
        mesh.element_grad_interp_phi
    ):
        array.flags.writeable = False
    logger.info(
        "Band mesh: h=%.4g eps=%.4g, %d of %d candidate cells, "
        "%d elements, %d vertices, %d dofs",
        h, profile.epsilon, len(np.unique(mesh.cell_ids)), len(candidates),
        mesh.n_elements, mesh.n_vertices, mesh.n_dofs)
    logger.debug("Band volume %.6g", volumes.sum())
    return mesh


def _number_edges(
    simplices: np.ndarray, n_vertices: int
) -> tuple[np.ndarray, np.ndarray]:
    # Global edges (sorted vertex pairs) and per-element DOFs: vertices
    # first, then edge midpoints numbered after all vertices.
    pairs = list(itertools.combinations(range(simplices.shape[1]), 2))
    first = simplices[:, [a for a, _ in pairs]]
    second = simplices[:, [b for _, b in pairs]]
    low = np.minimum(first, second).astype(np.int64)
    high = np.maximum(first, second).astype(np.int64)
    keys, inverse = np.unique(
        (low * n_vertices + high).ravel(), return_inverse=True)
    edges = np.column_stack([keys // n_vertices, keys % n_vertices])
    edge_dofs = n_vertices + inverse.reshape(low.shape)
    return edges, np.hstack([simplices, edge_dofs])


def _element_keys(mesh: SimplicialBandMesh) -> np.ndarray:
    return mesh.cell_ids.astype(np.int64) * math.factorial(mesh.dimension) \
        + mesh.kuhn_ids


def _locate_in_cell(
    mesh: SimplicialBandMesh, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # Uses the axis ordering of the in-cell coordinates to pick the Kuhn
    # simplex directly. Returns element indices (-1 if missing) and
    # barycentric coordinates.
    grid = mesh.grid
    dimension = grid.dimension
    scaled = (points - grid.origin) / grid.h
    cells = np.clip(
        np.floor(scaled).astype(int), 0, np.array(grid.cells_per_axis) - 1)
    local = scaled - cells
    order = np.argsort(-local, axis=1, kind="stable")
    kuhn = _permutation_lookup(dimension)[
        order @ (dimension ** np.arange(dimension))]
    keys = (
        np.ravel_multi_index(cells.T, grid.cells_per_axis).astype(np.int64)
        * math.factorial(dimension) + kuhn)
    element_keys = _element_keys(mesh)
    positions = np.minimum(
        np.searchsorted(element_keys, keys), len(element_keys) - 1)
    elements = np.where(element_keys[positions] == keys, positions, -1)
    sorted_local = np.take_along_axis(local, order, axis=1)
    barycentric = np.empty((len(points), dimension + 1))
    barycentric[:, 0] = 1 - sorted_local[:, 0]
    barycentric[:, 1:-1] = sorted_local[:, :-1] - sorted_local[:, 1:]
    barycentric[:, -1] = sorted_local[:, -1]
    elements[barycentric.min(axis=1) < -BARYCENTRIC_TOLERANCE] = -1
    return elements, barycentric


def _locate_nearby(
    mesh: SimplicialBandMesh, point: np.ndarray
) -> tuple[int, np.ndarray] | None:
    # Searches every element of the surrounding cells, lowest element
    # index first.
    grid = mesh.grid
    dimension = grid.dimension
    cell = np.floor((point - grid.origin) / grid.h).astype(int)
    neighbours = cell + np.array(
        list(itertools.product((-1, 0, 1), repeat=dimension)))
    neighbours = neighbours[
        _in_box(np.zeros(dimension), np.array(grid.cells_per_axis) - 1,
                neighbours)]
    if not len(neighbours):
        return None
    per_cell = math.factorial(dimension)
    keys = (
        np.ravel_multi_index(neighbours.T, grid.cells_per_axis)
        .astype(np.int64)[:, None] * per_cell + np.arange(per_cell))
    element_keys = _element_keys(mesh)
    positions = np.searchsorted(element_keys, keys.ravel())
    positions = positions[positions < len(element_keys)]
    elements = np.unique(
        positions[np.isin(element_keys[positions], keys.ravel())])
    if not len(elements):
        return None
    coordinates = mesh.element_coordinates(elements)
    _, gradients = element_geometry(coordinates)
    barycentric = np.einsum(
        "kjd,kd->kj", gradients[:, 1:], point - coordinates[:, 0])
    barycentric = np.column_stack(
        [1 - barycentric.sum(axis=1), barycentric])
    inside = np.flatnonzero(
        barycentric.min(axis=1) >= -BARYCENTRIC_TOLERANCE)
    if not len(inside):
        return None
    return int(elements[inside[0]]), barycentric[inside[0]]


def locate_point(
    mesh: SimplicialBandMesh, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | tuple[int, np.ndarray]:
    """
    Finds the element containing each point and the barycentric
    coordinates of the point in it. A single point of shape (dimension,)
    gives (element, coordinates); an array of shape (m, dimension) gives
    arrays of shapes (m,) and (m, dimension + 1).
    Raises PointNotFoundError for points outside the band.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != mesh.dimension:
        raise ValueError(
            f"Points must have {mesh.dimension} coordinates.")
    elements, barycentric = _locate_in_cell(mesh, points)
    missing = []
    for index in np.flatnonzero(elements < 0):
        found = _locate_nearby(mesh, points[index])
        if found is None:
            missing.append(index)
            continue
        elements[index], barycentric[index] = found
    if missing:
        raise PointNotFoundError(
            f"{len(missing)} point(s) lie outside the band mesh; the band "
            "may be too thin for the requested sample.", missing)
    if single:
        return int(elements[0]), barycentric[0]
    return elements, barycentric
