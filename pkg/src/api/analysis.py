"""
This module measures how well the scheme converges: error functionals
on the band and on the surface, experimental orders of convergence,
and complete refinement studies on the built-in examples.

Errors (all squared quantities):

E1 - ε⁻¹ Σ_T Q_T[ρ |I_hu^e - u_h|²], the band L² error.

E2 - ε⁻¹ Σ_T Q_T[ρ |∇(I_hu^e - u_h)|²], the band H¹ seminorm error.

E3 - a surface quadrature of |u - u_h|² at sample points of Γ.

E4 - the same with tangential gradients, ∇_Γu_h = (I - ννᵀ)∇u_h.

The manufactured solution for the circle and sphere examples is
u(x) = (x1² - x2²) / |x|², which solves -Δ_Γu + u = f with f = 5u on the
unit circle and f = 7u on the unit sphere. The pretzel example has no
known solution; its source is f(x) = 10000 sin(5(x1 + x2 + x3) + 2.5).
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    from api.assembly import (
        P2_MIN_DEGREE, AssembledSystem, SurfaceProblem, assemble,
        band_norm_parts, interpolate_surface_field, shape_derivatives,
        shape_functions)
    from api.geometry import (
        LevelSetGeometry, PhaseFieldProfile, compute_r0, level_set)
    from api.mesh import (
        BackgroundGrid, SimplicialBandMesh, build_band_mesh,
        element_geometry, locate_point)
    from api.quadrature import QuadratureRule, rule_for
    from api.solver import DEFAULT_REL_TOL, SolveReport, solve_cg
except ImportError:
    try:
        from assembly import (
            P2_MIN_DEGREE, AssembledSystem, SurfaceProblem, assemble,
            band_norm_parts, interpolate_surface_field, shape_derivatives,
            shape_functions)
        from geometry import (
            LevelSetGeometry, PhaseFieldProfile, compute_r0, level_set)
        from mesh import (
            BackgroundGrid, SimplicialBandMesh, build_band_mesh,
            element_geometry, locate_point)
        from quadrature import QuadratureRule, rule_for
        from solver import DEFAULT_REL_TOL, SolveReport, solve_cg
    except ImportError:
        from .assembly import (
            P2_MIN_DEGREE, AssembledSystem, SurfaceProblem, assemble,
            band_norm_parts, interpolate_surface_field, shape_derivatives,
            shape_functions)
        from .geometry import (
            LevelSetGeometry, PhaseFieldProfile, compute_r0, level_set)
        from .mesh import (
            BackgroundGrid, SimplicialBandMesh, build_band_mesh,
            element_geometry, locate_point)
        from .quadrature import QuadratureRule, rule_for
        from .solver import DEFAULT_REL_TOL, SolveReport, solve_cg


logger = logging.getLogger(__name__)

EXAMPLES = ("circle", "sphere", "pretzel", "custom")
DEFAULT_GAMMA = 5.333
DEFAULT_LEVELS = 4
DEFAULT_SURFACE_POINTS = 200
DEFAULT_H0 = {"circle": 0.0375, "sphere": 0.075, "pretzel": 0.03125}
DEFAULT_Q = {"circle": 6, "sphere": 6, "pretzel": 1}
MAX_LEVELS = 8
# Source coefficients: circle f = 5u, sphere f = 7u.
SOURCE_FACTORS = {"circle": 5.0, "sphere": 7.0}
PRETZEL_AMPLITUDE = 10000.0
PRETZEL_FREQUENCY = 5.0
PRETZEL_PHASE = 2.5
ERROR_NAMES = ("E1", "E2", "E3", "E4")
STAGES = ("mesh", "assembly", "solve", "errors")


class StudyError(RuntimeError):
    """Raised when one level of a study fails; names the level and stage."""

    def __init__(self, level: int, h: float, stage: str, cause: Exception):
        super().__init__(
            f"Level {level} (h={h:.4g}) failed during {stage}: {cause}")
        self.level = level
        self.h = h
        self.stage = stage


def exact_solution(points: np.ndarray) -> np.ndarray:
    """u(x) = (x1² - x2²) / |x|²."""
    points = np.atleast_2d(points)
    return (
        (points[:, 0] ** 2 - points[:, 1] ** 2)
        / np.sum(points * points, axis=1))


def exact_surface_gradient(points: np.ndarray) -> np.ndarray:
    """
    Gradient of u(x) = (x1² - x2²) / |x|². u is constant along rays, so
    on Γ = unit circle/sphere this gradient is tangential.
    """
    points = np.atleast_2d(points)
    squared = np.sum(points * points, axis=1)
    numerator = points[:, 0] ** 2 - points[:, 1] ** 2
    gradient = -2 * numerator[:, None] * points / squared[:, None] ** 2
    gradient[:, 0] += 2 * points[:, 0] / squared
    gradient[:, 1] -= 2 * points[:, 1] / squared
    return gradient


def manufactured_source(example: str):
    """Source f = (1 + k) u for the circle (k = 4) or sphere (k = 6)."""
    if example not in SOURCE_FACTORS:
        raise ValueError(
            f"No manufactured source for {example!r}; "
            f"expected one of {tuple(SOURCE_FACTORS)}.")
    factor = SOURCE_FACTORS[example]
    return lambda points: factor * exact_solution(points)


def pretzel_source(points: np.ndarray) -> np.ndarray:
    """f(x) = 10000 sin(5(x1 + x2 + x3) + 2.5)."""
    points = np.atleast_2d(points)
    return PRETZEL_AMPLITUDE * np.sin(
        PRETZEL_FREQUENCY * points.sum(axis=1) + PRETZEL_PHASE)


def example_problem(example: str) -> SurfaceProblem:
    """Surface problem of a built-in example with A = I and a0 = 1."""
    match example:
        case "circle" | "sphere":
            return SurfaceProblem(
                source=manufactured_source(example),
                exact_solution=exact_solution,
                exact_surface_gradient=exact_surface_gradient,
                name=example)
        case "pretzel":
            return SurfaceProblem(source=pretzel_source, name=example)
    raise ValueError(f"No built-in problem for {example!r}.")


def evaluate_solution(
    mesh: SimplicialBandMesh, coefficients: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Values (m,) and gradients (m, dimension) of a finite element
    function at points of the band. Points on shared faces use the
    element point location returns first.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    elements, barycentric = locate_point(mesh, points)
    _, gradients = element_geometry(mesh.element_coordinates(elements))
    local = coefficients[mesh.dofs[elements]]
    values = np.sum(
        local * shape_functions(mesh.element_order, barycentric), axis=1)
    derivatives = shape_derivatives(mesh.element_order, barycentric)
    point_gradients = np.einsum(
        "ml,mlj,mjd->md", local, derivatives, gradients)
    return values, point_gradients


def surface_errors(
    mesh: SimplicialBandMesh, coefficients: np.ndarray,
    problem: SurfaceProblem, points: np.ndarray, weights: np.ndarray
) -> tuple[float, float]:
    """
    E3 = Σ w |u - u_h|² and E4 = Σ w |∇_Γu - ∇_Γu_h|² over weighted
    sample points of Γ.
    """
    if problem.exact_solution is None or \
            problem.exact_surface_gradient is None:
        raise ValueError(
            "Surface errors need the exact solution and its gradient.")
    values, gradients = evaluate_solution(mesh, coefficients, points)
    normals = mesh.geometry.unit_normal(points)
    tangential = gradients - np.sum(
        gradients * normals, axis=1, keepdims=True) * normals
    value_error = np.asarray(problem.exact_solution(points)) - values
    gradient_error = (
        np.asarray(problem.exact_surface_gradient(points)) - tangential)
    return (
        float(weights @ value_error ** 2),
        float(weights @ np.sum(gradient_error ** 2, axis=1)))


def circle_sample(count: int) -> tuple[np.ndarray, np.ndarray]:
    """L equally spaced points of the unit circle with weights 2π/L."""
    angles = 2 * np.pi * np.arange(count) / count
    points = np.column_stack([np.cos(angles), np.sin(angles)])
    return points, np.full(count, 2 * np.pi / count)


def sphere_sample(count: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Latitude-longitude grid of the unit sphere: 2L longitudes by L
    latitudes including the pole row, weights (π/L)² sin(lπ/L).
    """
    longitudes = np.pi * np.arange(2 * count) / count
    latitudes = np.pi * np.arange(count) / count
    azimuth, polar = np.meshgrid(longitudes, latitudes, indexing="ij")
    points = np.stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar)], axis=-1).reshape(-1, 3)
    weights = ((np.pi / count) ** 2 * np.sin(polar)).ravel()
    return points, weights


def error_E1_E2(
    mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, u_h: np.ndarray, problem: SurfaceProblem
) -> tuple[float, float]:
    """Band errors of e_h = I_hu^e - u_h."""
    if problem.exact_solution is None:
        raise ValueError("Band errors need the exact solution.")
    interpolant = interpolate_surface_field(
        mesh, mesh.geometry, problem.exact_solution)
    return band_norm_parts(
        mesh, rule, profile, interpolant - np.asarray(u_h, dtype=float))


def error_E3_E4_circle(
    mesh: SimplicialBandMesh, u_h: np.ndarray, problem: SurfaceProblem,
    L: int = DEFAULT_SURFACE_POINTS
) -> tuple[float, float]:
    if mesh.dimension != 2:
        raise ValueError("Circle errors need a 2D mesh.")
    return surface_errors(mesh, u_h, problem, *circle_sample(L))


def error_E3_E4_sphere(
    mesh: SimplicialBandMesh, u_h: np.ndarray, problem: SurfaceProblem,
    L: int = DEFAULT_SURFACE_POINTS
) -> tuple[float, float]:
    if mesh.dimension != 3:
        raise ValueError("Sphere errors need a 3D mesh.")
    return surface_errors(mesh, u_h, problem, *sphere_sample(L))


def eoc(errors: list[float], hs: list[float]) -> list[float]:
    """
    Experimental orders log(E_{k-1}/E_k) / log(h_{k-1}/h_k), one per
    consecutive pair.
    """
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("Need matching error and h lists of length >= 2.")
    if min(errors) <= 0:
        raise ValueError("Errors must be positive.")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("Grid spacings must be strictly decreasing.")
    return [
        math.log(errors[k - 1] / errors[k]) / math.log(hs[k - 1] / hs[k])
        for k in range(1, len(errors))]


@dataclass
class StudyConfig:
    """Settings of one refinement study."""
    example: str
    q: int | None = None
    gamma: float = DEFAULT_GAMMA
    levels: int = DEFAULT_LEVELS
    h0: float | None = None
    element_order: int = 1
    cg_tol: float = DEFAULT_REL_TOL
    csv_path: str | None = None
    vtk_path: str | None = None
    surface_points: int = DEFAULT_SURFACE_POINTS
    workers: int = 1

    def __post_init__(self) -> None:
        if self.q is None and self.example in DEFAULT_Q:
            self.q = DEFAULT_Q[self.example]
        if self.h0 is None and self.example in DEFAULT_H0:
            self.h0 = DEFAULT_H0[self.example]


def validate_study_config(config: StudyConfig) -> None:
    """Raises TypeError / ValueError for an unusable configuration."""
    if config.example not in EXAMPLES:
        raise ValueError(
            f"Unknown example {config.example!r}; "
            f"expected one of {EXAMPLES}.")
    for name in ("q", "levels", "element_order", "surface_points",
                 "workers"):
        if not isinstance(getattr(config, name), int):
            raise TypeError(f"{name} must be an integer.")
    for name in ("gamma", "h0", "cg_tol"):
        if not isinstance(getattr(config, name), (int, float)):
            raise TypeError(f"{name} must be a number.")
    if config.q < 1:
        raise ValueError("q must be at least 1.")
    if not 1 <= config.levels <= MAX_LEVELS:
        raise ValueError(f"levels must be between 1 and {MAX_LEVELS}.")
    if config.element_order not in (1, 2):
        raise ValueError("element_order must be 1 or 2.")
    if config.element_order == 2 and config.q < P2_MIN_DEGREE:
        raise ValueError(
            f"Quadratic elements need q >= {P2_MIN_DEGREE}.")
    if not config.gamma > 1:
        raise ValueError("gamma must exceed 1 so that h < ε.")
    if not config.h0 > 0:
        raise ValueError("h0 must be positive.")
    if not 0 < config.cg_tol < 1:
        raise ValueError("cg_tol must be between 0 and 1.")
    if config.surface_points < 1:
        raise ValueError("L must be at least 1.")
    if config.workers < 1:
        raise ValueError("workers must be at least 1.")


@dataclass(frozen=True)
class ConvergenceRow:
    """One refinement level; `eocs` holds None on the first row."""
    h: float
    epsilon: float
    errors: tuple[float, float, float, float]
    eocs: tuple[float | None, float | None, float | None, float | None]


@dataclass
class ConvergenceTable:
    """Errors and experimental orders of a refinement study."""
    example: str
    q: int
    element_order: int
    gamma: float
    rows: list[ConvergenceRow] = field(default_factory=list)

    @classmethod
    def from_errors(
        cls, example: str, q: int, element_order: int, gamma: float,
        hs: list[float], epsilons: list[float],
        errors: list[tuple[float, float, float, float]]
    ) -> "ConvergenceTable":
        """Builds rows, computing orders column by column."""
        columns = list(zip(*errors)) if errors else []
        orders = []
        for column in columns:
            if len(hs) > 1 and min(column) > 0:
                orders.append([None] + eoc(list(column), hs))
            else:
                # Orders are undefined for a single level or a zero error.
                orders.append([None] * len(hs))
        rows = [
            ConvergenceRow(
                h, epsilon, tuple(level_errors),
                tuple(order[k] for order in orders))
            for k, (h, epsilon, level_errors) in enumerate(
                zip(hs, epsilons, errors))]
        return cls(example, q, element_order, gamma, rows)

    @property
    def hs(self) -> list[float]:
        return [row.h for row in self.rows]

    def column(self, name: str) -> list[float]:
        """Error column by name, E1 to E4."""
        return [row.errors[ERROR_NAMES.index(name)] for row in self.rows]

    def orders(self, name: str) -> list[float | None]:
        return [row.eocs[ERROR_NAMES.index(name)] for row in self.rows]


@dataclass
class LevelResult:
    """Everything one level of a study produced."""
    level: int
    h: float
    epsilon: float
    mesh: SimplicialBandMesh
    system: AssembledSystem
    coefficients: np.ndarray
    report: SolveReport
    errors: tuple[float, float, float, float] | None = None
    seconds: float = 0.0


def level_spacing(config: StudyConfig, level: int) -> float:
    """Grid spacing h0 / 2^level."""
    return config.h0 / 2 ** level


def solve_level(
    config: StudyConfig, level: int,
    geometry: LevelSetGeometry | None = None,
    problem: SurfaceProblem | None = None,
    surface_sample: tuple[np.ndarray, np.ndarray] | None = None
) -> LevelResult:
    """
    Builds the band mesh of one level, assembles and solves the system,
    and measures the errors when an exact solution is known. Stage
    failures are raised as StudyError.
    """
    validate_study_config(config)
    geometry = geometry or level_set(config.example)
    problem = problem or example_problem(config.example)
    h = level_spacing(config, level)
    start = time.perf_counter()
    stage = STAGES[0]
    try:
        profile = PhaseFieldProfile.from_gamma(config.q, config.gamma, h)
        rule = rule_for(geometry.dimension, config.q)
        grid = BackgroundGrid.covering(geometry.lower, geometry.upper, h)
        mesh = build_band_mesh(
            grid, geometry, profile, rule, config.element_order)
        stage = STAGES[1]
        system = assemble(mesh, problem)
        stage = STAGES[2]
        coefficients, report = solve_cg(system, config.cg_tol)
        if not report.converged:
            logger.warning(
                "Level %d: CG did not reach %.1e (residual %.3e); "
                "continuing with the best iterate.",
                level, config.cg_tol, report.final_relative_residual)
        errors = None
        if problem.exact_solution is not None:
            stage = STAGES[3]
            errors = _level_errors(
                config, mesh, rule, profile, coefficients, problem,
                surface_sample)
    except Exception as error:
        raise StudyError(level, h, stage, error) from error
    seconds = time.perf_counter() - start
    logger.info(
        "Level %d: h=%.4g eps=%.4g dofs=%d iterations=%d (%.1fs)",
        level, h, profile.epsilon, mesh.n_dofs, report.iterations, seconds)
    return LevelResult(
        level, h, profile.epsilon, mesh, system, coefficients, report,
        errors, seconds)


def _level_errors(
    config: StudyConfig, mesh: SimplicialBandMesh, rule: QuadratureRule,
    profile: PhaseFieldProfile, coefficients: np.ndarray,
    problem: SurfaceProblem,
    surface_sample: tuple[np.ndarray, np.ndarray] | None
) -> tuple[float, float, float, float]:
    e1, e2 = error_E1_E2(mesh, rule, profile, coefficients, problem)
    if surface_sample is not None:
        e3, e4 = surface_errors(
            mesh, coefficients, problem, *surface_sample)
    elif mesh.geometry.kind == "circle":
        e3, e4 = error_E3_E4_circle(
            mesh, coefficients, problem, config.surface_points)
    elif mesh.geometry.kind == "sphere":
        e3, e4 = error_E3_E4_sphere(
            mesh, coefficients, problem, config.surface_points)
    else:
        raise ValueError(
            "Surface errors on this level set need a surface sample.")
    return e1, e2, e3, e4


def _check_inclusion(config: StudyConfig, geometry: LevelSetGeometry) -> None:
    r0 = compute_r0(geometry.c1)
    if config.gamma <= 1 / r0:
        logger.warning(
            "gamma=%.4g does not exceed 1/r0=%.4g for c1=%.4g; the band "
            "may not contain a full neighbourhood of the surface.",
            config.gamma, 1 / r0, geometry.c1)


def run_convergence_study(
    config: StudyConfig, geometry: LevelSetGeometry | None = None,
    problem: SurfaceProblem | None = None,
    surface_sample: tuple[np.ndarray, np.ndarray] | None = None
) -> ConvergenceTable:
    """
    Solves every level h0, h0/2, ... and tabulates E1 to E4 with their
    experimental orders. With `workers` > 1 levels run concurrently;
    rows are always ordered by decreasing h.
    """
    validate_study_config(config)
    geometry = geometry or level_set(config.example)
    problem = problem or example_problem(config.example)
    if problem.exact_solution is None:
        raise ValueError(
            f"Example {config.example!r} has no exact solution to "
            "measure errors against.")
    _check_inclusion(config, geometry)

    def solve(level: int) -> LevelResult:
        return solve_level(config, level, geometry, problem, surface_sample)

    levels = range(config.levels)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as executor:
            results = list(executor.map(solve, levels))
    else:
        results = [solve(level) for level in levels]
    results.sort(key=lambda result: -result.h)
    return ConvergenceTable.from_errors(
        config.example, config.q, config.element_order, config.gamma,
        [result.h for result in results],
        [result.epsilon for result in results],
        [result.errors for result in results])
