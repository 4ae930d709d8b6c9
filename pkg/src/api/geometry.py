"""
This module describes the surface Γ = {φ = 0} and the quantities the
phase-field scheme derives from it: the level-set function φ with its
gradient and Hessian, the closest-point projection p̂, the profile σ
and phase field ρ = σ(φ/ε), and the constants that control the
narrow band of elements the scheme works on.

Three level sets are built in and selectable by name:

circle - φ(x) = x1² + x2² - 1 on Ω = (-1.2, 1.2)²

sphere - φ(x) = x1² + x2² + x3² - 1 on Ω = (-1.8, 1.8)³

pretzel - a quartic genus-3 surface on Ω = (-2, 2)³:
    φ(x) = (x1²-1)² + (x2²-1)² + (x3²-1)²
        + (x1²+x2²-3)² + (x1²+x3²-3)² + (x2²+x3²-3)² - 10

Any other level set can be supplied through `custom`, in which case the
gradient bounds c0 and c1 are estimated by sampling |∇φ| near Γ.

All field callables take an array of points of shape (m, dimension).
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize


logger = logging.getLogger(__name__)

BUILT_IN_LEVEL_SETS = ("circle", "sphere", "pretzel")
CIRCLE_HALF_WIDTH = 1.2
SPHERE_HALF_WIDTH = 1.8
PRETZEL_HALF_WIDTH = 2.0
# Largest |φ| at which the quadric gradient bound c0 holds.
QUADRIC_BAND = 0.95

MIN_DEGREE_Q = 1
MAX_NEWTON_ITERATIONS = 50
PROJECTION_TOLERANCE = 1e-12
# Line-search halvings per Newton step before a step is taken anyway.
MAX_STEP_HALVINGS = 8
# Sampled gradient bounds are widened by this factor.
GRADIENT_MARGIN = 1.1
DEFAULT_SAMPLES_PER_AXIS = 64
# Samples with |φ| below this value count as near Γ.
DEFAULT_SAMPLE_BAND = 1.0
# Step used by the central-difference Hessian.
HESSIAN_STEP = 1e-6
R0_TOLERANCE = 1e-15

ScalarField = Callable[[np.ndarray], np.ndarray]


class ProjectionError(RuntimeError):
    """
    Raised when the closest point of one or more points cannot be found.
    `indices` lists the offending points, `residuals` their final
    Newton residual norms.
    """

    def __init__(
        self, message: str, indices: np.ndarray, residuals: np.ndarray
    ) -> None:
        super().__init__(message)
        self.indices = np.asarray(indices)
        self.residuals = np.asarray(residuals)


def _as_points(points: np.ndarray, dimension: int) -> tuple[np.ndarray, bool]:
    # Returns a (m, dimension) float array and whether a single point was
    # passed in.
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != dimension:
        raise ValueError(
            f"Points must have {dimension} coordinates, "
            f"got {points.shape[1]}.")
    return points, single


def sigma(degree_q: int, r: np.ndarray | float) -> np.ndarray | float:
    """
    Profile σ(r) = cos^{2(q+1)}(r) for |r| <= π/2 and 0 otherwise.
    Accepts scalars or arrays.
    """
    r_array = np.asarray(r, dtype=float)
    inside = np.abs(r_array) <= math.pi / 2
    values = np.where(
        inside, np.cos(np.where(inside, r_array, 0)) ** (2 * (degree_q + 1)),
        0.0)
    return float(values) if values.ndim == 0 else values


def sigma_derivative(
    degree_q: int, r: np.ndarray | float
) -> np.ndarray | float:
    """σ'(r) = -2(q+1) cos^{2q+1}(r) sin(r) inside the support, else 0."""
    r_array = np.asarray(r, dtype=float)
    inside = np.abs(r_array) <= math.pi / 2
    safe = np.where(inside, r_array, 0)
    values = np.where(
        inside,
        -2 * (degree_q + 1) * np.cos(safe) ** (2 * degree_q + 1)
        * np.sin(safe), 0.0)
    return float(values) if values.ndim == 0 else values


def profile_mass(degree_q: int) -> float:
    """
    Integral of σ over its support, π * C(2q+2, q+1) / 4^(q+1).
    """
    if not isinstance(degree_q, int):
        raise TypeError("Degree must be an integer.")
    if degree_q < 0:
        raise ValueError("Degree must not be negative.")
    return (
        math.pi * math.comb(2 * degree_q + 2, degree_q + 1)
        / 4 ** (degree_q + 1))


def compute_r0(c1: float) -> float:
    """
    Unique zero in (0, 1) of r -> arccos(r) - c1 * r, found by bisection.
    The band inclusions hold whenever γ > 1 / r0.
    """
    if c1 <= 0:
        raise ValueError("c1 must be positive.")
    return optimize.bisect(
        lambda r: math.acos(r) - c1 * r, 0.0, 1.0,
        xtol=R0_TOLERANCE, maxiter=200)


class PhaseFieldProfile:
    """
    Phase-field settings: the profile exponent `degree_q` (matching the
    quadrature exactness) and the band width ε. The scaling γ = ε / h
    is recorded when known.
    """

    def __init__(
        self, degree_q: int, epsilon: float, gamma: float | None = None
    ) -> None:
        self.degree_q = degree_q
        self.epsilon = epsilon
        self.gamma = gamma

    @classmethod
    def from_gamma(
        cls, degree_q: int, gamma: float, h: float
    ) -> "PhaseFieldProfile":
        """Profile with ε = γ * h."""
        if h <= 0:
            raise ValueError("Grid spacing must be positive.")
        return cls(degree_q, gamma * h, gamma)

    @property
    def degree_q(self) -> int:
        return self._degree_q

    @degree_q.setter
    def degree_q(self, degree_q: int) -> None:
        if not isinstance(degree_q, int):
            raise TypeError("Degree must be an integer.")
        if degree_q < MIN_DEGREE_Q:
            raise ValueError(f"Degree must be at least {MIN_DEGREE_Q}.")
        self._degree_q = degree_q

    @property
    def epsilon(self) -> float:
        return self._epsilon

    @epsilon.setter
    def epsilon(self, epsilon: float) -> None:
        if not isinstance(epsilon, (int, float)):
            raise TypeError("Epsilon must be a number.")
        if not epsilon > 0:
            raise ValueError("Epsilon must be positive.")
        self._epsilon = float(epsilon)

    @property
    def gamma(self) -> float | None:
        return self._gamma

    @gamma.setter
    def gamma(self, gamma: float | None) -> None:
        if gamma is not None:
            if not isinstance(gamma, (int, float)):
                raise TypeError("Gamma must be a number.")
            if not gamma > 0:
                raise ValueError("Gamma must be positive.")
            gamma = float(gamma)
        self._gamma = gamma

    @property
    def mass(self) -> float:
        """Normalisation constant ĉ = ∫σ."""
        return profile_mass(self.degree_q)

    def sigma(self, r: np.ndarray | float) -> np.ndarray | float:
        return sigma(self.degree_q, r)

    def __repr__(self) -> str:
        return (
            f"PhaseFieldProfile(degree_q={self.degree_q}, "
            f"epsilon={self.epsilon}, gamma={self.gamma})")


class LevelSetGeometry:
    """
    A level-set description of Γ on an axis-aligned domain box with
    gradient bounds c0 <= |∇φ| <= c1 near Γ. Immutable once built.
    """

    def __init__(
        self, kind: str, phi: ScalarField, gradient: ScalarField,
        lower: np.ndarray, upper: np.ndarray, c0: float, c1: float,
        hessian: ScalarField | None = None
    ) -> None:
        lower = np.array(lower, dtype=float)
        upper = np.array(upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("Domain box corners must be matching vectors.")
        if len(lower) not in (2, 3):
            raise ValueError("Only 2D and 3D domains are supported.")
        if np.any(upper <= lower):
            raise ValueError("Domain box must have positive extent.")
        if not 0 < c0 <= c1:
            raise ValueError("Gradient bounds must satisfy 0 < c0 <= c1.")
        lower.flags.writeable = False
        upper.flags.writeable = False
        self._kind = kind
        self._phi = phi
        self._gradient = gradient
        self._hessian = hessian
        self._lower = lower
        self._upper = upper
        self._c0 = float(c0)
        self._c1 = float(c1)

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def dimension(self) -> int:
        return len(self._lower)

    @property
    def lower(self) -> np.ndarray:
        return self._lower

    @property
    def upper(self) -> np.ndarray:
        return self._upper

    @property
    def domain_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lower, self._upper

    @property
    def c0(self) -> float:
        return self._c0

    @property
    def c1(self) -> float:
        return self._c1

    def phi(self, points: np.ndarray) -> np.ndarray | float:
        points, single = _as_points(points, self.dimension)
        values = np.asarray(self._phi(points), dtype=float)
        return float(values[0]) if single else values

    def gradient(self, points: np.ndarray) -> np.ndarray:
        points, single = _as_points(points, self.dimension)
        values = np.asarray(self._gradient(points), dtype=float)
        return values[0] if single else values

    def hessian(self, points: np.ndarray) -> np.ndarray:
        points, single = _as_points(points, self.dimension)
        if self._hessian is not None:
            values = np.asarray(self._hessian(points), dtype=float)
        else:
            values = _finite_difference_hessian(self._gradient, points)
        return values[0] if single else values

    def unit_normal(self, points: np.ndarray) -> np.ndarray:
        gradient = self.gradient(points)
        return gradient / np.linalg.norm(gradient, axis=-1, keepdims=True)

    def __repr__(self) -> str:
        return (
            f"LevelSetGeometry(kind={self.kind!r}, "
            f"lower={self.lower.tolist()}, upper={self.upper.tolist()}, "
            f"c0={self.c0:.4g}, c1={self.c1:.4g})")


def _finite_difference_hessian(
    gradient: ScalarField, points: np.ndarray
) -> np.ndarray:
    # Central differences of the gradient, symmetrised.
    m, dimension = points.shape
    hessian = np.empty((m, dimension, dimension))
    steps = HESSIAN_STEP * (1 + np.linalg.norm(points, axis=1))
    for k in range(dimension):
        offset = np.zeros_like(points)
        offset[:, k] = steps
        difference = (
            np.asarray(gradient(points + offset))
            - np.asarray(gradient(points - offset)))
        hessian[:, :, k] = difference / (2 * steps[:, None])
    return (hessian + np.swapaxes(hessian, 1, 2)) / 2


def _sample_grid(
    lower: np.ndarray, upper: np.ndarray, samples: int
) -> np.ndarray:
    axes = [np.linspace(a, b, samples) for a, b in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([axis.ravel() for axis in mesh], axis=1)


def estimate_gradient_bounds(
    phi: ScalarField, gradient: ScalarField,
    lower: np.ndarray, upper: np.ndarray,
    band: float = DEFAULT_SAMPLE_BAND,
    samples: int = DEFAULT_SAMPLES_PER_AXIS
) -> tuple[float, float]:
    """
    Estimates (c0, c1) by sampling |∇φ| on a uniform grid of the domain
    box restricted to {|φ| <= band}, widened by a 10% margin.
    Raises ValueError if φ does not change sign in the box or if no
    sample lies near Γ.
    """
    points = _sample_grid(np.asarray(lower), np.asarray(upper), samples)
    values = np.asarray(phi(points), dtype=float)
    if not values.min() < 0 < values.max():
        raise ValueError("Level set has no zero inside the domain box.")
    near = np.abs(values) <= band
    if not near.any():
        raise ValueError(
            "No sample lies near the zero level set; "
            "increase the samples or the band.")
    norms = np.linalg.norm(np.asarray(gradient(points[near])), axis=1)
    if norms.min() == 0:
        raise ValueError("Gradient of the level set vanishes near Γ.")
    c0, c1 = norms.min() / GRADIENT_MARGIN, norms.max() * GRADIENT_MARGIN
    logger.debug(
        "Sampled gradient bounds c0=%.4g c1=%.4g from %d points",
        c0, c1, near.sum())
    return float(c0), float(c1)


def _quadric_phi(points: np.ndarray) -> np.ndarray:
    return np.sum(points * points, axis=1) - 1


def _quadric_gradient(points: np.ndarray) -> np.ndarray:
    return 2 * points


def _quadric_hessian(points: np.ndarray) -> np.ndarray:
    dimension = points.shape[1]
    return np.broadcast_to(
        2 * np.eye(dimension), (len(points), dimension, dimension)).copy()


def _pretzel_phi(points: np.ndarray) -> np.ndarray:
    s = points * points
    value = np.sum((s - 1) ** 2, axis=1) - 10
    for i, j in ((0, 1), (0, 2), (1, 2)):
        value += (s[:, i] + s[:, j] - 3) ** 2
    return value


def _pretzel_gradient(points: np.ndarray) -> np.ndarray:
    s = points * points
    gradient = 4 * points * (s - 1)
    for i in range(3):
        for j in range(3):
            if j != i:
                gradient[:, i] += 4 * points[:, i] * (s[:, i] + s[:, j] - 3)
    return gradient


def _pretzel_hessian(points: np.ndarray) -> np.ndarray:
    s = points * points
    hessian = 8 * points[:, :, None] * points[:, None, :]
    for i in range(3):
        diagonal = 4 * (3 * s[:, i] - 1)
        for j in range(3):
            if j != i:
                diagonal += 4 * (3 * s[:, i] + s[:, j] - 3)
        hessian[:, i, i] = diagonal
    return hessian


def _quadric_geometry(kind: str, dimension: int, half_width: float):
    lower = np.full(dimension, -half_width)
    upper = np.full(dimension, half_width)
    # |∇φ| = 2|x|: c1 from the farthest box corner, c0 from the region
    # |φ| <= QUADRIC_BAND, which holds every band with ε <= 0.6.
    c1 = 2 * half_width * math.sqrt(dimension)
    c0 = 2 * math.sqrt(1 - QUADRIC_BAND)
    return LevelSetGeometry(
        kind, _quadric_phi, _quadric_gradient, lower, upper, c0, c1,
        _quadric_hessian)


@functools.cache
def circle() -> LevelSetGeometry:
    """Unit circle in (-1.2, 1.2)²."""
    return _quadric_geometry("circle", 2, CIRCLE_HALF_WIDTH)


@functools.cache
def sphere() -> LevelSetGeometry:
    """Unit sphere in (-1.8, 1.8)³."""
    return _quadric_geometry("sphere", 3, SPHERE_HALF_WIDTH)


@functools.cache
def pretzel() -> LevelSetGeometry:
    """Quartic genus-3 surface in (-2, 2)³."""
    lower = np.full(3, -PRETZEL_HALF_WIDTH)
    upper = np.full(3, PRETZEL_HALF_WIDTH)
    c0, c1 = estimate_gradient_bounds(
        _pretzel_phi, _pretzel_gradient, lower, upper)
    return LevelSetGeometry(
        "pretzel", _pretzel_phi, _pretzel_gradient, lower, upper, c0, c1,
        _pretzel_hessian)


def custom(
    phi: ScalarField, gradient: ScalarField,
    lower: np.ndarray, upper: np.ndarray,
    hessian: ScalarField | None = None,
    c0: float | None = None, c1: float | None = None
) -> LevelSetGeometry:
    """
    User-supplied level set. Missing gradient bounds are estimated by
    sampling; a missing Hessian falls back to central differences of
    the gradient.
    """
    if c0 is None or c1 is None:
        estimated_c0, estimated_c1 = estimate_gradient_bounds(
            phi, gradient, lower, upper)
        c0 = estimated_c0 if c0 is None else c0
        c1 = estimated_c1 if c1 is None else c1
    return LevelSetGeometry(
        "custom", phi, gradient, lower, upper, c0, c1, hessian)


def level_set(name: str) -> LevelSetGeometry:
    """Returns a built-in geometry by name."""
    match name:
        case "circle":
            return circle()
        case "sphere":
            return sphere()
        case "pretzel":
            return pretzel()
    raise ValueError(
        f"Unknown level set {name!r}. "
        f"Built-in level sets: {', '.join(BUILT_IN_LEVEL_SETS)}.")


def rho(
    profile: PhaseFieldProfile, geometry: LevelSetGeometry,
    points: np.ndarray
) -> np.ndarray | float:
    """Phase field ρ(x) = σ(φ(x) / ε)."""
    return sigma(profile.degree_q, geometry.phi(points) / profile.epsilon)


def _projection_residual(
    geometry: LevelSetGeometry, x: np.ndarray, p: np.ndarray,
    lam: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Residual of {(x - p) - λ∇φ(p) = 0, φ(p) = 0}, plus φ(p) and ∇φ(p).
    phi = np.asarray(geometry._phi(p), dtype=float)
    gradient = np.asarray(geometry._gradient(p), dtype=float)
    residual = np.concatenate(
        [x - p - lam[:, None] * gradient, phi[:, None]], axis=1)
    return residual, phi, gradient


def _is_projected(
    x: np.ndarray, p: np.ndarray, residual: np.ndarray,
    gradient: np.ndarray
) -> np.ndarray:
    phi_scale = np.maximum(1, np.linalg.norm(gradient, axis=1))
    alignment_scale = np.maximum(1, np.linalg.norm(x, axis=1))
    return (
        (np.abs(residual[:, -1]) <= PROJECTION_TOLERANCE * phi_scale)
        & (np.linalg.norm(residual[:, :-1], axis=1)
           <= PROJECTION_TOLERANCE * alignment_scale))


def _newton_projection(
    geometry: LevelSetGeometry, x: np.ndarray
) -> np.ndarray:
    dimension = geometry.dimension
    phi = np.asarray(geometry._phi(x), dtype=float)
    gradient = np.asarray(geometry._gradient(x), dtype=float)
    squared = np.sum(gradient * gradient, axis=1)
    flat = np.flatnonzero(squared == 0)
    if len(flat):
        raise ProjectionError(
            "Level-set gradient vanishes at points to be projected.",
            flat, np.abs(phi[flat]))
    lam = phi / squared
    p = x - lam[:, None] * gradient
    residual, _, gradient_p = _projection_residual(geometry, x, p, lam)
    converged = _is_projected(x, p, residual, gradient_p)
    for _ in range(MAX_NEWTON_ITERATIONS):
        active = np.flatnonzero(~converged)
        if not len(active):
            break
        xa, pa, la = x[active], p[active], lam[active]
        ra = residual[active]
        gradient_a = gradient_p[active]
        hessian = geometry.hessian(pa)
        jacobian = np.zeros((len(active), dimension + 1, dimension + 1))
        jacobian[:, :dimension, :dimension] = (
            -np.eye(dimension) - la[:, None, None] * hessian)
        jacobian[:, :dimension, dimension] = -gradient_a
        jacobian[:, dimension, :dimension] = gradient_a
        step = np.linalg.solve(jacobian, -ra[:, :, None])[:, :, 0]
        merit = np.sum(ra * ra, axis=1)
        t = np.ones(len(active))
        for _ in range(MAX_STEP_HALVINGS):
            trial_p = pa + t[:, None] * step[:, :dimension]
            trial_lam = la + t * step[:, dimension]
            trial, _, trial_gradient = _projection_residual(
                geometry, xa, trial_p, trial_lam)
            worse = np.sum(trial * trial, axis=1) > (1 - 1e-4 * t) * merit
            # Already at rounding level: accept the full step.
            worse &= merit > PROJECTION_TOLERANCE ** 2
            if not worse.any():
                break
            t[worse] /= 2
        p[active] = trial_p
        lam[active] = trial_lam
        residual[active] = trial
        gradient_p[active] = trial_gradient
        converged[active] = _is_projected(
            xa, trial_p, trial, trial_gradient)
    failed = np.flatnonzero(~converged)
    if len(failed):
        raise ProjectionError(
            f"Closest-point projection failed for {len(failed)} point(s) "
            f"after {MAX_NEWTON_ITERATIONS} iterations; the points may lie "
            "outside the tubular neighbourhood of Γ.",
            failed, np.linalg.norm(residual[failed], axis=1))
    return p


def closest_point(
    geometry: LevelSetGeometry, points: np.ndarray, newton: bool = False
) -> np.ndarray:
    """
    Closest point p̂(x) on Γ for one point of shape (dimension,) or many
    of shape (m, dimension). Circle and sphere use x / |x| unless
    `newton` is set; other level sets use a damped Newton iteration on
    {φ(p) = 0, (x - p) = λ∇φ(p)}.
    """
    points, single = _as_points(points, geometry.dimension)
    if geometry.kind in ("circle", "sphere") and not newton:
        norms = np.linalg.norm(points, axis=1)
        origin = np.flatnonzero(norms == 0)
        if len(origin):
            raise ProjectionError(
                "Closest point is undefined at the centre.",
                origin, np.ones(len(origin)))
        projected = points / norms[:, None]
    else:
        projected = _newton_projection(geometry, points)
    return projected[0] if single else projected


@dataclass(frozen=True)
class BandParameters:
    """
    Narrow-band constants for grid spacing h and band width ε:
    the selection threshold ε·arccos(h/ε), the inner width
    ε·arccos(h/ε) - c1·h, c2 = π/2 + c1 and r0.
    """
    h: float
    epsilon: float
    c1: float
    half_width: float
    hat_epsilon: float
    c2: float
    r0: float

    @property
    def gamma(self) -> float:
        return self.epsilon / self.h

    @property
    def satisfies_inclusion(self) -> bool:
        """True if γ > 1/r0, which guarantees a positive inner width."""
        return self.gamma > 1 / self.r0

    def rho_floor(self, degree_q: int) -> float:
        """Lower bound (h/ε)^{2(q+1)} of ρ at selected quadrature points."""
        return (self.h / self.epsilon) ** (2 * (degree_q + 1))


def band_parameters(h: float, epsilon: float, c1: float) -> BandParameters:
    """Band constants for 0 < h < ε; hat_epsilon may come out <= 0."""
    if not h > 0:
        raise ValueError("Grid spacing must be positive.")
    if not h < epsilon:
        raise ValueError(
            f"Grid spacing {h} must be smaller than epsilon {epsilon}.")
    half_width = epsilon * math.acos(h / epsilon)
    return BandParameters(
        h=h, epsilon=epsilon, c1=c1, half_width=half_width,
        hat_epsilon=half_width - c1 * h, c2=math.pi / 2 + c1,
        r0=compute_r0(c1))
