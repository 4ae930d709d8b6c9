"""
Quick checks that the installation computes correctly: quadrature
exactness, the constant-solution identity and the ρ lower bound on the
band.
"""
import itertools

import numpy as np

from assembly import SurfaceProblem, assemble
from console import ConsoleLogger
from geometry import PhaseFieldProfile, circle, rho, sphere
from mesh import BackgroundGrid, build_band_mesh
from quadrature import (
    SUPPORTED_RULES, integrate_reference, monomial_integral, rule_for)
from solver import solve_cg


EXACTNESS_TOLERANCE = 1e-12
SOLVER_TOLERANCE = 1e-12
# Coarse settings for the band checks: (geometry, h, q).
BAND_CASES = ((circle, 0.075, 2), (sphere, 0.1125, 1))
SELFTEST_GAMMA = 5.333
CONSTANT_TOLERANCE = 1e-6


def check_quadrature() -> list[str]:
    """Returns a failure message per rule that misses a monomial."""
    failures = []
    for dimension, degree in SUPPORTED_RULES:
        rule = rule_for(dimension, degree)
        if np.any(rule.weights <= 0):
            failures.append(f"Rule {dimension}D q={degree} has weight <= 0.")
        for exponents in itertools.product(
            range(degree + 1), repeat=dimension
        ):
            if sum(exponents) > degree:
                continue
            exact = monomial_integral(exponents)
            computed = integrate_reference(
                rule, lambda points: np.prod(points ** exponents, axis=1))
            if abs(computed - exact) > EXACTNESS_TOLERANCE * exact:
                failures.append(
                    f"Rule {dimension}D q={degree} misses monomial "
                    f"{exponents}: {computed!r} != {exact!r}.")
    return failures


def check_band(geometry_factory, h: float, degree_q: int) -> list[str]:
    """Constant solution and ρ lower bound on one coarse band."""
    geometry = geometry_factory()
    profile = PhaseFieldProfile.from_gamma(degree_q, SELFTEST_GAMMA, h)
    rule = rule_for(geometry.dimension, degree_q)
    grid = BackgroundGrid.covering(geometry.lower, geometry.upper, h)
    mesh = build_band_mesh(grid, geometry, profile, rule)
    failures = []

    points = np.einsum(
        "qj,kjd->kqd", rule.points, mesh.element_coordinates())
    floor = (h / profile.epsilon) ** (2 * (degree_q + 1))
    smallest = float(np.min(rho(
        profile, geometry, points.reshape(-1, geometry.dimension))))
    if smallest < floor - 1e-14:
        failures.append(
            f"{geometry.kind}: ρ={smallest:.3e} below bound {floor:.3e}.")

    problem = SurfaceProblem(source=lambda p: np.ones(len(p)))
    solution, report = solve_cg(assemble(mesh, problem), SOLVER_TOLERANCE)
    deviation = float(np.max(np.abs(solution - 1)))
    if not report.converged or deviation > CONSTANT_TOLERANCE:
        failures.append(
            f"{geometry.kind}: constant solution off by {deviation:.3e}.")
    return failures


def run_selftest(logger: ConsoleLogger) -> bool:
    """Runs all checks, logging each suite; True if everything passed."""
    suites = [("Quadrature exactness", check_quadrature)]
    for factory, h, degree_q in BAND_CASES:
        suites.append((
            f"Band checks ({factory.__name__}, h={h})",
            lambda factory=factory, h=h, q=degree_q: check_band(
                factory, h, q)))
    passed = True
    for name, suite in suites:
        failures = suite()
        if failures:
            passed = False
            logger.log_bad(f"{name}: FAILED")
            for failure in failures:
                logger.log_bad(f"  {failure}")
        else:
            logger.log_good(f"{name}: passed")
    return passed
