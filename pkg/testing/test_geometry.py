"""Unit Tests the geometry.py module."""
import math
import unittest

import numpy as np
from scipy import integrate

import __init__
from geometry import *


class Test_geometry(unittest.TestCase):

    def test_sigma(self) -> None:
        self.assertEqual(sigma(1, 0), 1)
        self.assertEqual(sigma(1, 2), 0)
        self.assertEqual(sigma(3, -math.pi / 2 - 1e-9), 0)
        self.assertAlmostEqual(sigma(1, math.pi / 3), 0.5 ** 4)
        values = sigma(2, np.array([-1.0, 0.0, 1.0]))
        self.assertEqual(values[0], values[2])
        self.assertEqual(sigma_derivative(1, 0), 0)
        self.assertEqual(sigma_derivative(1, 3), 0)
        # Central difference of σ.
        r = 0.4
        difference = (sigma(2, r + 1e-6) - sigma(2, r - 1e-6)) / 2e-6
        self.assertAlmostEqual(sigma_derivative(2, r), difference, places=6)

    def test_profile_mass(self) -> None:
        self.assertAlmostEqual(profile_mass(1), 3 * math.pi / 8)
        for degree_q in (1, 2, 6):
            numerical, _ = integrate.quad(
                lambda r: sigma(degree_q, r), -math.pi / 2, math.pi / 2)
            self.assertAlmostEqual(profile_mass(degree_q), numerical)
        self.assertRaises(ValueError, profile_mass, -1)

    def test_compute_r0(self) -> None:
        r0 = compute_r0(2)
        self.assertAlmostEqual(math.acos(r0), 2 * r0, places=12)
        self.assertAlmostEqual(r0, 0.515, places=2)
        self.assertGreater(compute_r0(1), compute_r0(2))
        self.assertGreater(compute_r0(2), compute_r0(5))
        self.assertRaises(ValueError, compute_r0, 0)

    def test_band_parameters(self) -> None:
        band = band_parameters(0.0375, 0.2, 2.4)
        self.assertAlmostEqual(band.half_width, 0.27644, places=5)
        self.assertAlmostEqual(band.hat_epsilon, 0.27644 - 0.09, places=5)
        self.assertAlmostEqual(band.c2, math.pi / 2 + 2.4)
        self.assertAlmostEqual(band.gamma, 0.2 / 0.0375)
        self.assertAlmostEqual(band.rho_floor(1), 0.1875 ** 4)
        self.assertRaises(ValueError, band_parameters, 0.2, 0.2, 1)
        self.assertRaises(ValueError, band_parameters, 0, 0.2, 1)
        self.assertTrue(band_parameters(0.01, 0.2, 1).satisfies_inclusion)
        self.assertFalse(band_parameters(0.1, 0.15, 5).satisfies_inclusion)

    def test_profile(self) -> None:
        profile = PhaseFieldProfile.from_gamma(2, 5.333, 0.0375)
        self.assertAlmostEqual(profile.epsilon, 5.333 * 0.0375)
        self.assertEqual(profile.gamma, 5.333)
        self.assertAlmostEqual(profile.mass, profile_mass(2))
        self.assertRaises(ValueError, PhaseFieldProfile, 0, 0.1)
        self.assertRaises(TypeError, PhaseFieldProfile, 1.0, 0.1)
        self.assertRaises(ValueError, PhaseFieldProfile, 1, -0.1)
        self.assertRaises(ValueError, PhaseFieldProfile, 1, 0.1, 0)
        self.assertRaises(
            ValueError, PhaseFieldProfile.from_gamma, 1, 5, 0)

    def test_built_in(self) -> None:
        self.assertEqual(circle().dimension, 2)
        self.assertEqual(sphere().dimension, 3)
        self.assertIs(level_set("circle"), circle())
        self.assertRaises(ValueError, level_set, "torus")
        self.assertAlmostEqual(circle().phi(np.array([0.6, 0.8])), 0)
        self.assertTrue(np.allclose(
            sphere().unit_normal(np.array([[0, 0, 2.0]])), [[0, 0, 1]]))
        self.assertAlmostEqual(pretzel().phi(np.array([1.0, 1.0, 0.0])), 0)

    def test_hessian(self) -> None:
        points = np.array([[1.1, 0.9, 0.2], [0.3, -1.2, 0.7]])
        analytic = pretzel().hessian(points)
        numerical = custom(
            pretzel().phi, pretzel().gradient, pretzel().lower,
            pretzel().upper, c0=1.0, c1=100.0).hessian(points)
        self.assertTrue(np.allclose(analytic, numerical, atol=1e-4))
        self.assertTrue(np.allclose(analytic, analytic.transpose(0, 2, 1)))

    def test_estimate_gradient_bounds(self) -> None:
        c0, c1 = estimate_gradient_bounds(
            circle().phi, circle().gradient, circle().lower, circle().upper)
        self.assertGreater(c0, 0)
        self.assertLessEqual(c0, 2)
        self.assertGreaterEqual(c1, 2 * math.sqrt(2) * 0.95)
        self.assertRaises(
            ValueError, estimate_gradient_bounds,
            lambda x: np.sum(x * x, axis=1) + 1,
            lambda x: 2 * x, np.full(2, -1.0), np.full(2, 1.0))

    def test_closest_point_circle(self) -> None:
        self.assertTrue(np.allclose(
            closest_point(circle(), np.array([3.0, 4.0])), [0.6, 0.8]))
        angles = np.linspace(0, 2 * math.pi, 50, endpoint=False)
        radii = np.linspace(0.8, 1.2, 50)
        points = radii[:, None] * np.column_stack(
            [np.cos(angles), np.sin(angles)])
        analytic = closest_point(circle(), points)
        newton = closest_point(circle(), points, newton=True)
        self.assertTrue(np.allclose(analytic, newton, atol=1e-10))
        self.assertRaises(
            ProjectionError, closest_point, circle(), np.zeros((1, 2)))
        self.assertRaises(
            ValueError, closest_point, circle(), np.zeros((1, 3)))

    def test_closest_point_sphere(self) -> None:
        rng = np.random.default_rng(1)
        directions = rng.normal(size=(40, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        points = directions * rng.uniform(0.85, 1.15, size=(40, 1))
        newton = closest_point(sphere(), points, newton=True)
        self.assertTrue(np.allclose(newton, directions, atol=1e-10))

    def test_closest_point_pretzel(self) -> None:
        rng = np.random.default_rng(2)
        base = np.array([1.0, 1.0, 0.0])
        points = base + rng.uniform(-0.05, 0.05, size=(30, 3))
        projected = closest_point(pretzel(), points)
        self.assertTrue(np.all(np.abs(pretzel().phi(projected)) < 1e-9))
        normals = pretzel().unit_normal(projected)
        offsets = points - projected
        self.assertTrue(np.allclose(
            np.cross(offsets, normals), 0, atol=1e-9))
        # The base point is on Γ, so it is never closer.
        self.assertTrue(np.all(
            np.linalg.norm(offsets, axis=1)
            <= np.linalg.norm(points - base, axis=1) + 1e-12))

    def test_projection_idempotent(self) -> None:
        rng = np.random.default_rng(3)
        cases = (
            (circle(), rng.uniform(-1.1, 1.1, size=(40, 2))),
            (pretzel(),
             np.array([1.0, 1.0, 0.0]) + rng.uniform(-0.05, 0.05, (30, 3))))
        for geometry, points in cases:
            points = points[np.linalg.norm(points, axis=1) > 0.3]
            once = closest_point(geometry, points)
            twice = closest_point(geometry, once)
            self.assertTrue(np.allclose(twice, once, atol=1e-10))

    def test_rho_derivative_bound(self) -> None:
        # |∇ρ| <= 2(q+1)/ε · ρ^((2q+1)/(2q+2)) · |∇φ| inside the band.
        q, epsilon = 2, 0.2
        profile = PhaseFieldProfile(q, epsilon)
        rng = np.random.default_rng(4)
        angles = rng.uniform(0, 2 * math.pi, 200)
        radii = rng.uniform(0.85, 1.13, 200)
        points = radii[:, None] * np.column_stack(
            [np.cos(angles), np.sin(angles)])
        step = 1e-7
        values = rho(profile, circle(), points)
        bound = (
            2 * (q + 1) / epsilon
            * values ** ((2 * q + 1) / (2 * q + 2))
            * np.linalg.norm(circle().gradient(points), axis=1))
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = step
            derivative = (
                rho(profile, circle(), points + shift)
                - rho(profile, circle(), points - shift)) / (2 * step)
            self.assertTrue(np.all(
                np.abs(derivative) <= bound * (1 + 1e-6) + 1e-6))
        self.assertTrue(np.all(bound <= 2 * (q + 1) / epsilon * circle().c1))

    def test_quadric_gradient_bounds(self) -> None:
        # Bands with ε up to 0.6 reach |φ| = 0.6·π/2.
        rng = np.random.default_rng(5)
        for geometry in (circle(), sphere()):
            points = rng.uniform(
                geometry.lower, geometry.upper,
                size=(20000, geometry.dimension))
            near = np.abs(geometry.phi(points)) <= 0.6 * math.pi / 2
            norms = np.linalg.norm(geometry.gradient(points[near]), axis=1)
            self.assertGreaterEqual(norms.min(), geometry.c0)
            self.assertLessEqual(norms.max(), geometry.c1)

    def test_rho(self) -> None:
        profile = PhaseFieldProfile(1, 0.1)
        self.assertEqual(rho(profile, circle(), np.array([1.0, 0.0])), 1)
        self.assertEqual(rho(profile, circle(), np.array([2.0, 0.0])), 0)


if __name__ == "__main__":
    unittest.main()
