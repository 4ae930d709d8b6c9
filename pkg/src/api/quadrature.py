"""
This module provides positive-weight quadrature rules on the reference
simplex and maps them onto physical simplices.

A rule is stored in barycentric form: each point is a tuple of n + 1
non-negative coordinates summing to 1, and the weights are relative to
the measure of the reference simplex, so they sum to 1. On a physical
simplex T with vertices x_0, ..., x_n the rule becomes

    Q_T(g) = |T| * sum_i w_i * g(b_i)

where b_i is the affine image of the i-th barycentric point.

Supported rules (all weights strictly positive):

Triangles - degrees 1 to 6.

Tetrahedra - degrees 1, 2, 4, 5 and 6. The classical degree 3
tetrahedron rule carries a negative weight and is therefore not shipped.

Unsupported (dimension, degree) pairs raise `NoTabulatedRuleError`;
there is never a silent fallback to a different degree.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np


MIN_DIMENSION = 2
MAX_DIMENSION = 3
# Simplices whose volume is below this fraction of (longest edge)^n
# are treated as degenerate.
DEGENERATE_VOLUME_RATIO = 1e-12
# Barycentric coordinates closer than this are one orbit value.
ORBIT_TOLERANCE = 1e-12
# Allowed deviation of a rule's weight sum from 1.
WEIGHT_SUM_TOLERANCE = 1e-12


class NoTabulatedRuleError(ValueError):
    """Raised when no rule is tabulated for a (dimension, degree) pair."""


class DegenerateSimplexError(ValueError):
    """Raised when a simplex has (numerically) zero volume."""


def _orbit(*coordinates: float) -> list[tuple[float, ...]]:
    # All distinct permutations of one barycentric point, in first-seen
    # order. The final coordinate is completed so the point sums to 1.
    # Coordinates closer than ORBIT_TOLERANCE share one symmetry class,
    # and the classes are permuted as integer labels.
    point = (*coordinates, 1.0 - math.fsum(coordinates))
    values = []
    labels = []
    for coordinate in point:
        for label, value in enumerate(values):
            if abs(coordinate - value) <= ORBIT_TOLERANCE:
                labels.append(label)
                break
        else:
            labels.append(len(values))
            values.append(coordinate)
    patterns = dict.fromkeys(itertools.permutations(labels))
    return [tuple(values[label] for label in pattern) for pattern in patterns]


_TET_DEGREE_2 = (5 - math.sqrt(5)) / 20

# (dimension, degree) -> list of (orbit generator, weight per point).
_RULE_TABLE = {
    (2, 1): [((1 / 3, 1 / 3), 1.0)],
    (2, 2): [((0.5, 0.5), 1 / 3)],
    (2, 3): [((0.231933368553031, 0.109039009072877), 1 / 6)],
    (2, 4): [
        ((0.091576213509771, 0.091576213509771), 0.109951743655322),
        ((0.445948490915965, 0.445948490915965), 0.223381589678011)],
    (2, 5): [
        ((1 / 3, 1 / 3), 0.225),
        ((0.10128650732345633, 0.10128650732345633), 0.12593918054482717),
        ((0.47014206410511505, 0.47014206410511505), 0.13239415278850616)],
    (2, 6): [
        ((0.063089014491502228340331602870819,
          0.063089014491502228340331602870819),
         0.050844906370206816920936809106869),
        ((0.249286745170910421291638553107019,
          0.249286745170910421291638553107019),
         0.116786275726379366030690438513721),
        ((0.053145049844816947353249671631398,
          0.310352451033784405416607733956552),
         0.082851075618373575193553456420442)],
    (3, 1): [((0.25, 0.25, 0.25), 1.0)],
    (3, 2): [((_TET_DEGREE_2, _TET_DEGREE_2, _TET_DEGREE_2), 0.25)],
    (3, 4): [
        ((0.5, 0.5, 0.0), 0.0190476190476190),
        ((0.1005267652252045, 0.1005267652252045, 0.1005267652252045),
         0.0885898247429807),
        ((0.3143728734931922, 0.3143728734931922, 0.3143728734931922),
         0.1328387466855907)],
    (3, 5): [
        ((0.25, 0.25, 0.25), 0.1817020685825351),
        ((1 / 3, 1 / 3, 1 / 3), 0.0361607142857143),
        ((1 / 11, 1 / 11, 1 / 11), 0.0698714945161738),
        ((0.0665501535736643, 0.0665501535736643, 0.4334498464263357),
         0.0656948493683187)],
    (3, 6): [
        ((0.2146028712591517, 0.2146028712591517, 0.2146028712591517),
         0.0399227502581679),
        ((0.0406739585346113, 0.0406739585346113, 0.0406739585346113),
         0.0100772110553207),
        ((0.3223378901422757, 0.3223378901422757, 0.3223378901422757),
         0.0553571815436544),
        ((0.0636610018750175, 0.0636610018750175, 0.2696723314583159),
         27 / 560)],
}

SUPPORTED_RULES = tuple(sorted(_RULE_TABLE))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Positive-weight quadrature rule on the reference simplex.
    `points` has shape (size, dimension + 1) and holds barycentric
    coordinates; `weights` sums to 1 (relative to the reference measure).
    """
    dimension: int
    degree_q: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        """Number of quadrature points."""
        return len(self.weights)

    @property
    def reference_points(self) -> np.ndarray:
        """Cartesian points on the reference simplex (vertex 0 at origin)."""
        return self.points[:, 1:]


def _validate_dimension(dimension: int) -> None:
    if not isinstance(dimension, int):
        raise TypeError("Dimension must be an integer.")
    if not MIN_DIMENSION <= dimension <= MAX_DIMENSION:
        raise ValueError(
            f"Dimension must be between {MIN_DIMENSION} and {MAX_DIMENSION}.")


def rule_for(dimension: int, degree_q: int) -> QuadratureRule:
    """
    Returns the tabulated positive-weight rule on the reference simplex
    of the given dimension (2 = triangle, 3 = tetrahedron) that is exact
    for all polynomials of total degree at most `degree_q`.
    Identical inputs always produce identical rules.
    """
    _validate_dimension(dimension)
    if not isinstance(degree_q, int):
        raise TypeError("Degree must be an integer.")
    if (dimension, degree_q) not in _RULE_TABLE:
        degrees = sorted(d for n, d in _RULE_TABLE if n == dimension)
        raise NoTabulatedRuleError(
            f"No tabulated rule for dimension {dimension} and degree "
            f"{degree_q}. Available degrees: {degrees}.")
    points = []
    weights = []
    for generator, weight in _RULE_TABLE[(dimension, degree_q)]:
        orbit = _orbit(*generator)
        points.extend(orbit)
        weights.extend([weight] * len(orbit))
    points = np.array(points, dtype=float)
    weights = np.array(weights, dtype=float)
    weight_sum = math.fsum(weights)
    if abs(weight_sum - 1) > WEIGHT_SUM_TOLERANCE:
        raise RuntimeError(
            f"Rule for dimension {dimension} and degree {degree_q} has "
            f"weights summing to {weight_sum!r}.")
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(dimension, degree_q, points, weights)


def simplex_volume(vertices: np.ndarray) -> float:
    """Volume of the simplex with vertex coordinates of shape (n+1, n)."""
    vertices = np.asarray(vertices, dtype=float)
    edges = vertices[1:] - vertices[0]
    return abs(np.linalg.det(edges)) / math.factorial(len(edges))


def map_to_element(
    rule: QuadratureRule, simplex: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Maps a rule onto a physical simplex given by its vertex coordinates
    of shape (dimension + 1, dimension). Returns the physical points
    b_{i,T} and the scaled weights w_i * |T|, which sum to |T|.
    """
    simplex = np.asarray(simplex, dtype=float)
    if simplex.shape != (rule.dimension + 1, rule.dimension):
        raise ValueError(
            "Simplex must have shape "
            f"({rule.dimension + 1}, {rule.dimension}).")
    volume = simplex_volume(simplex)
    longest = max(
        np.linalg.norm(a - b) for a, b in itertools.combinations(simplex, 2))
    if volume <= DEGENERATE_VOLUME_RATIO * longest ** rule.dimension:
        raise DegenerateSimplexError(
            f"Simplex is degenerate (volume {volume:.3e}).")
    return rule.points @ simplex, rule.weights * volume


def monomial_integral(exponents: tuple[int, ...]) -> float:
    """
    Exact integral of x_1^a_1 * ... * x_n^a_n over the reference simplex
    with vertices 0, e_1, ..., e_n: a_1! ... a_n! / (a_1 + ... + a_n + n)!
    """
    numerator = math.prod(math.factorial(a) for a in exponents)
    return numerator / math.factorial(sum(exponents) + len(exponents))


def integrate_reference(rule: QuadratureRule, function) -> float:
    """
    Applies the rule on the reference simplex to a function of
    Cartesian points of shape (size, dimension).
    """
    volume = 1 / math.factorial(rule.dimension)
    values = np.asarray(function(rule.reference_points), dtype=float)
    return volume * float(rule.weights @ values)
