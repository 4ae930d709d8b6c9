"""
This module assembles the discrete bilinear and linear forms of the
phase-field scheme on a band mesh into a sparse symmetric system, and
evaluates the discrete band norm.

For linear elements (P1) the forms are

    a_h(v, w) = ε⁻¹ Σ_T Q_T[ρ (I_hÂ ∇v·∇w + I_hâ0 v w)] |∇I_hφ|_T
    l_h(w)    = ε⁻¹ Σ_T Q_T[ρ I_hf̂ w] |∇I_hφ|_T

where Â, â0 and f̂ are the surface data extended by the closest-point
map and interpolated at the vertices, and |∇I_hφ|_T is the constant
gradient norm of the linear interpolant of φ on T.

For quadratic elements (P2) the diffusion is the identity, the reaction
coefficient is 1, and |∇I_hφ| of the quadratic interpolant is taken
inside the quadrature sum at every quadrature point.

Matrices are assembled symmetrically: every element contributes its
upper triangle mirrored, contributions are summed in element order and
the compressed-row structure is built from sorted (row, column) keys,
so the same inputs always give a bit-identical matrix.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

try:
    from api._utils import _split_range
    from api.geometry import (
        LevelSetGeometry, PhaseFieldProfile, closest_point, rho)
    from api.mesh import SimplicialBandMesh, element_geometry
    from api.quadrature import QuadratureRule
except ImportError:
    try:
        from _utils import _split_range
        from geometry import (
            LevelSetGeometry, PhaseFieldProfile, closest_point, rho)
        from mesh import SimplicialBandMesh, element_geometry
        from quadrature import QuadratureRule
    except ImportError:
        from ._utils import _split_range
        from .geometry import (
            LevelSetGeometry, PhaseFieldProfile, closest_point, rho)
        from .mesh import SimplicialBandMesh, element_geometry
        from .quadrature import QuadratureRule


logger = logging.getLogger(__name__)

# Elements handled per vectorised batch.
P1_BATCH = 20000
P2_BATCH = 5000
SYMMETRY_TOLERANCE = 1e-12
# Smallest profile degree (and rule degree) usable with quadratic elements.
P2_MIN_DEGREE = 2

Field = Callable[[np.ndarray], np.ndarray]


@dataclass
class SurfaceProblem:
    """
    Data of -∇_Γ·(A∇_Γu) + a0 u = f on Γ. Fields are evaluated at points
    of Γ given as an (m, dimension) array. `diffusion` returns
    (m, dimension, dimension) matrices and defaults to the identity;
    `reaction` defaults to 1. The exact solution and its surface
    gradient are optional and only used for error measurement.
    """
    source: Field
    diffusion: Field | None = None
    reaction: Field | None = None
    exact_solution: Field | None = None
    exact_surface_gradient: Field | None = None
    name: str = "custom"

    @property
    def has_unit_coefficients(self) -> bool:
        return self.diffusion is None and self.reaction is None

    def diffusion_at(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.diffusion is None:
            dimension = points.shape[1]
            return np.broadcast_to(
                np.eye(dimension), (len(points), dimension, dimension))
        return np.asarray(self.diffusion(points), dtype=float)

    def reaction_at(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.reaction is None:
            return np.ones(len(points))
        return np.asarray(self.reaction(points), dtype=float)

    def source_at(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.source(np.atleast_2d(points)), dtype=float)

    def validate_coefficients(
        self, points: np.ndarray, normals: np.ndarray
    ) -> None:
        """
        Spot-checks a0 > 0, symmetry of A and positivity of A on the
        tangent space at the given surface points.
        """
        reaction = self.reaction_at(points)
        if not np.all(reaction > 0):
            raise ValueError("Reaction coefficient must be positive on Γ.")
        if self.diffusion is None:
            return
        diffusion = self.diffusion_at(points)
        if not np.allclose(
            diffusion, np.swapaxes(diffusion, 1, 2),
            atol=SYMMETRY_TOLERANCE
        ):
            raise ValueError("Diffusion matrix must be symmetric.")
        # ξᵀAξ > 0 for tangent ξ iff PAP + ννᵀ is positive definite.
        projection = (
            np.eye(points.shape[1]) - normals[:, :, None] * normals[:, None])
        restricted = (
            projection @ diffusion @ projection
            + normals[:, :, None] * normals[:, None])
        if not np.all(np.linalg.eigvalsh(restricted)[:, 0] > 0):
            raise ValueError(
                "Diffusion matrix must be positive definite on the "
                "tangent space of Γ.")


@dataclass
class AssembledSystem:
    """Sparse symmetric system of the scheme on one band mesh."""
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    mesh: SimplicialBandMesh
    element_order: int

    @property
    def n_dofs(self) -> int:
        return len(self.rhs)

    @property
    def dofs(self) -> np.ndarray:
        """Per-element DOF numbering the system refers to."""
        return self.mesh.dofs


def shape_functions(order: int, barycentric: np.ndarray) -> np.ndarray:
    """
    Lagrange basis values at barycentric points (..., dimension + 1):
    the coordinates themselves for P1; for P2 the vertex functions
    λ_i(2λ_i - 1) followed by the edge functions 4λ_iλ_j.
    """
    barycentric = np.asarray(barycentric, dtype=float)
    if order == 1:
        return barycentric.copy()
    if order != 2:
        raise ValueError("Element order must be 1 or 2.")
    pairs = itertools.combinations(range(barycentric.shape[-1]), 2)
    edge_values = [
        4 * barycentric[..., a] * barycentric[..., b] for a, b in pairs]
    return np.concatenate(
        [barycentric * (2 * barycentric - 1),
         np.stack(edge_values, axis=-1)], axis=-1)


def shape_derivatives(order: int, barycentric: np.ndarray) -> np.ndarray:
    """
    Derivatives of the basis with respect to the barycentric
    coordinates, shape (..., basis functions, dimension + 1).
    """
    barycentric = np.asarray(barycentric, dtype=float)
    vertices = barycentric.shape[-1]
    if order == 1:
        return np.broadcast_to(
            np.eye(vertices), barycentric.shape[:-1] + (vertices, vertices)
        ).copy()
    if order != 2:
        raise ValueError("Element order must be 1 or 2.")
    pairs = list(itertools.combinations(range(vertices), 2))
    derivatives = np.zeros(
        barycentric.shape[:-1] + (vertices + len(pairs), vertices))
    for i in range(vertices):
        derivatives[..., i, i] = 4 * barycentric[..., i] - 1
    for k, (a, b) in enumerate(pairs, vertices):
        derivatives[..., k, a] = 4 * barycentric[..., b]
        derivatives[..., k, b] = 4 * barycentric[..., a]
    return derivatives


def interpolate_surface_field(
    mesh: SimplicialBandMesh, geometry: LevelSetGeometry, field: Field
) -> np.ndarray:
    """
    Nodal interpolant I_h(g ∘ p̂) of a surface field g: the field is
    evaluated at the closest points of the DOF locations.
    """
    projected = closest_point(geometry, mesh.dof_coordinates)
    return np.asarray(field(projected), dtype=float)


def _check_consistent(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile
) -> None:
    if (rule.dimension, rule.degree_q) != (
        mesh.rule.dimension, mesh.rule.degree_q
    ):
        raise ValueError("Quadrature rule differs from the mesh's rule.")
    if (profile.degree_q, profile.epsilon) != (
        mesh.profile.degree_q, mesh.profile.epsilon
    ):
        raise ValueError("Phase-field profile differs from the mesh's.")


def _band_batches(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, geometry: LevelSetGeometry, size: int
):
    # Yields (elements, volumes, barycentric gradients, ρ-weights) per
    # batch; the ρ-weights are w_i ρ(b_i) without the element volume.
    for elements in _split_range(mesh.n_elements, size):
        coordinates = mesh.element_coordinates(elements)
        volumes, gradients = element_geometry(coordinates)
        points = np.einsum("qj,kjd->kqd", rule.points, coordinates)
        weights = rho(
            profile, geometry, points.reshape(-1, mesh.dimension)
        ).reshape(len(volumes), rule.size) * rule.weights
        yield elements, volumes, gradients, weights


def _sum_by_key(
    keys: np.ndarray, values: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # Sums values sharing a key, in input order; keys come out sorted.
    unique, inverse = np.unique(keys, return_inverse=True)
    return unique, np.bincount(
        inverse.ravel(), weights=values, minlength=len(unique))


def _scatter(
    dofs: np.ndarray, local: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    # Local matrices are mirrored from their upper triangles, so the
    # reduced entries (i, j) and (j, i) add identical numbers in the
    # same order.
    local = np.triu(local) + np.swapaxes(np.triu(local, 1), 1, 2)
    size = dofs.shape[1]
    rows = np.repeat(dofs, size, axis=1).astype(np.int64)
    columns = np.tile(dofs, (1, size)).astype(np.int64)
    return _sum_by_key((rows * n + columns).ravel(), local.ravel())


def _build_matrix(
    partials: list[tuple[np.ndarray, np.ndarray]], n: int
) -> sparse.csr_matrix:
    keys, values = _sum_by_key(
        np.concatenate([keys for keys, _ in partials]),
        np.concatenate([values for _, values in partials]))
    rows, columns = keys // n, keys % n
    indptr = np.concatenate(
        [[0], np.cumsum(np.bincount(rows, minlength=n))])
    return sparse.csr_matrix((values, columns, indptr), shape=(n, n))


def assemble_p1(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, geometry: LevelSetGeometry,
    problem: SurfaceProblem
) -> AssembledSystem:
    """
    Assembles the linear-element system with vertex-interpolated
    coefficient and source data. Raises ProjectionError naming the
    vertices whose closest point could not be found.
    """
    _check_consistent(mesh, rule, profile)
    if mesh.element_order != 1:
        raise ValueError("Linear assembly needs a mesh of element order 1.")
    projected = closest_point(geometry, mesh.vertices)
    problem.validate_coefficients(projected, geometry.unit_normal(projected))
    diffusion = problem.diffusion_at(projected)
    reaction = problem.reaction_at(projected)
    source = problem.source_at(projected)
    n = mesh.n_dofs
    lam = rule.points
    partials = []
    rhs = np.zeros(n)
    for elements, volumes, gradients, weights in _band_batches(
        mesh, rule, profile, geometry, P1_BATCH
    ):
        dofs = mesh.dofs[elements]
        scale = (
            volumes * mesh.element_grad_interp_phi[elements]
            / profile.epsilon)
        weighted_diffusion = np.einsum(
            "kq,qj,kjab->kab", weights, lam, diffusion[dofs])
        local = np.einsum(
            "kia,kab,kjb->kij", gradients, weighted_diffusion, gradients)
        weighted_reaction = weights * (reaction[dofs] @ lam.T)
        local += np.einsum("kq,qi,qj->kij", weighted_reaction, lam, lam)
        local *= scale[:, None, None]
        load = np.einsum(
            "kq,qi->ki", weights * (source[dofs] @ lam.T), lam)
        load *= scale[:, None]
        partials.append(_scatter(dofs, local, n))
        rhs += np.bincount(dofs.ravel(), weights=load.ravel(), minlength=n)
    matrix = _build_matrix(partials, n)
    logger.info("Assembled P1 system: %d dofs, %d nonzeros", n, matrix.nnz)
    return AssembledSystem(matrix, rhs, mesh, 1)


def assemble_p2(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, geometry: LevelSetGeometry,
    problem: SurfaceProblem
) -> AssembledSystem:
    """
    Assembles the quadratic-element system for A = I and a0 = 1 with a
    quadratically interpolated source; |∇I_hφ| is evaluated at each
    quadrature point.
    """
    _check_consistent(mesh, rule, profile)
    if mesh.element_order != 2:
        raise ValueError(
            "Quadratic assembly needs a mesh of element order 2.")
    if not problem.has_unit_coefficients:
        raise ValueError(
            "Quadratic elements support only A = I and a0 = 1.")
    if profile.degree_q < P2_MIN_DEGREE:
        raise ValueError(
            f"Quadratic elements need q >= {P2_MIN_DEGREE}; the "
            f"degree {profile.degree_q} rule leaves the matrix singular.")
    source = interpolate_surface_field(mesh, geometry, problem.source_at)
    phi = geometry.phi(mesh.dof_coordinates)
    values = shape_functions(2, rule.points)
    derivatives = shape_derivatives(2, rule.points)
    n = mesh.n_dofs
    partials = []
    rhs = np.zeros(n)
    for elements, volumes, gradients, weights in _band_batches(
        mesh, rule, profile, geometry, P2_BATCH
    ):
        dofs = mesh.dofs[elements]
        basis_gradients = np.einsum(
            "qlj,kjd->kqld", derivatives, gradients)
        grad_interp_phi = np.linalg.norm(
            np.einsum("kl,kqld->kqd", phi[dofs], basis_gradients), axis=2)
        scaled = (
            weights * grad_interp_phi * volumes[:, None] / profile.epsilon)
        local = np.einsum(
            "kq,kqid,kqjd->kij", scaled, basis_gradients, basis_gradients)
        local += np.einsum("kq,qi,qj->kij", scaled, values, values)
        load = np.einsum(
            "kq,qi->ki", scaled * (source[dofs] @ values.T), values)
        partials.append(_scatter(dofs, local, n))
        rhs += np.bincount(dofs.ravel(), weights=load.ravel(), minlength=n)
    matrix = _build_matrix(partials, n)
    logger.info("Assembled P2 system: %d dofs, %d nonzeros", n, matrix.nnz)
    return AssembledSystem(matrix, rhs, mesh, 2)


def assemble(
    mesh: SimplicialBandMesh, problem: SurfaceProblem
) -> AssembledSystem:
    """Assembles with the mesh's own rule, profile, geometry and order."""
    match mesh.element_order:
        case 1:
            method = assemble_p1
        case 2:
            method = assemble_p2
        case _:
            raise ValueError("Element order must be 1 or 2.")
    return method(mesh, mesh.rule, mesh.profile, mesh.geometry, problem)


def band_norm_parts(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, coefficients: np.ndarray
) -> tuple[float, float]:
    """
    The two squared parts of the band norm, ε⁻¹ Σ_T Q_T[ρ v²] and
    ε⁻¹ Σ_T Q_T[ρ |∇v|²], of a finite element function on the mesh.
    """
    _check_consistent(mesh, rule, profile)
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (mesh.n_dofs,):
        raise ValueError(
            f"Expected {mesh.n_dofs} coefficients, "
            f"got {coefficients.shape}.")
    order = mesh.element_order
    values = shape_functions(order, rule.points)
    derivatives = shape_derivatives(order, rule.points)
    size = P1_BATCH if order == 1 else P2_BATCH
    squared = gradient_squared = 0.0
    for elements, volumes, gradients, weights in _band_batches(
        mesh, rule, profile, mesh.geometry, size
    ):
        local = coefficients[mesh.dofs[elements]]
        basis_gradients = np.einsum(
            "qlj,kjd->kqld", derivatives, gradients)
        at_points = local @ values.T
        gradient_at_points = np.einsum(
            "kl,kqld->kqd", local, basis_gradients)
        weights = weights * volumes[:, None]
        squared += float(np.sum(weights * at_points ** 2))
        gradient_squared += float(
            np.sum(weights * np.sum(gradient_at_points ** 2, axis=2)))
    return squared / profile.epsilon, gradient_squared / profile.epsilon


def discrete_norm_h(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, coefficients: np.ndarray
) -> float:
    """Band norm sqrt(ε⁻¹ Σ_T Q_T[ρ (v² + |∇v|²)])."""
    squared, gradient_squared = band_norm_parts(
        mesh, rule, profile, coefficients)
    return float(np.sqrt(squared + gradient_squared))
