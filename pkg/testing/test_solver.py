"""Unit Tests the solver.py module."""
import unittest

import numpy as np
from scipy import sparse

import __init__
from assembly import SurfaceProblem, assemble
from geometry import PhaseFieldProfile, circle, sphere
from mesh import BackgroundGrid, build_band_mesh
from quadrature import rule_for
from solver import *


def _spd_matrix(n: int, seed: int) -> sparse.csr_matrix:
    rng = np.random.default_rng(seed)
    factor = rng.normal(size=(n, n))
    return sparse.csr_matrix(
        factor @ factor.T / n + np.diag(rng.uniform(0.5, 2, n)))


class Test_solver(unittest.TestCase):

    def test_small_system(self) -> None:
        matrix = sparse.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        x, report = conjugate_gradient(matrix, np.array([1.0, 2.0]))
        self.assertTrue(np.allclose(x, [1 / 11, 7 / 11], atol=1e-12))
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 2)
        self.assertLessEqual(report.final_relative_residual, 1e-12)

    def test_identity(self) -> None:
        rhs = np.arange(1.0, 6.0)
        x, report = conjugate_gradient(sparse.identity(5, format="csr"), rhs)
        self.assertTrue(np.allclose(x, rhs))
        self.assertEqual(report.iterations, 1)

    def test_zero_rhs(self) -> None:
        x, report = conjugate_gradient(_spd_matrix(10, 0), np.zeros(10))
        self.assertTrue(np.array_equal(x, np.zeros(10)))
        self.assertEqual(report, SolveReport(0, 0.0, True))

    def test_preconditioner_invariance(self) -> None:
        matrix = _spd_matrix(40, 1)
        rhs = np.random.default_rng(2).normal(size=40)
        expected = np.linalg.solve(matrix.toarray(), rhs)
        for preconditioned in (True, False):
            x, report = conjugate_gradient(
                matrix, rhs, 1e-12, preconditioned=preconditioned)
            self.assertTrue(report.converged)
            self.assertTrue(np.allclose(x, expected, rtol=1e-8, atol=1e-10))

    def test_energy_error_decreases(self) -> None:
        matrix = _spd_matrix(30, 3)
        rhs = np.ones(30)
        exact = np.linalg.solve(matrix.toarray(), rhs)
        errors = []

        def record(iteration: int, x: np.ndarray) -> None:
            error = x - exact
            errors.append(error @ (matrix @ error))

        conjugate_gradient(matrix, rhs, 1e-10, callback=record)
        self.assertGreater(len(errors), 1)
        for before, after in zip(errors, errors[1:]):
            self.assertLessEqual(after, before * (1 + 1e-8) + 1e-20)

    def test_not_converged(self) -> None:
        matrix = _spd_matrix(50, 4)
        with self.assertLogs("solver", level="WARNING"):
            x, report = conjugate_gradient(matrix, np.ones(50), max_iter=2)
        self.assertFalse(report.converged)
        self.assertEqual(report.iterations, 2)
        self.assertGreater(report.final_relative_residual, 1e-12)
        self.assertEqual(report.final_relative_residual, 1.0)
        self.assertTrue(np.array_equal(x, np.zeros(50)))
        self.assertEqual(x.shape, (50,))

    def test_stops_at_rounding_floor(self) -> None:
        # 1e-20 is below what double precision can reach.
        matrix = _spd_matrix(40, 5)
        rhs = np.random.default_rng(6).normal(size=40)
        with self.assertLogs("solver", level="WARNING"):
            x, report = conjugate_gradient(matrix, rhs, 1e-20, 10 ** 6)
        self.assertFalse(report.converged)
        self.assertLess(report.iterations, 20000)
        true_residual = np.linalg.norm(rhs - matrix @ x) / np.linalg.norm(rhs)
        self.assertAlmostEqual(
            report.final_relative_residual, true_residual, delta=1e-15)
        self.assertLess(report.final_relative_residual, 1e-10)
        expected = np.linalg.solve(matrix.toarray(), rhs)
        self.assertTrue(np.allclose(x, expected, rtol=1e-8, atol=1e-10))

    def test_report_matches_returned_iterate(self) -> None:
        matrix = _spd_matrix(60, 7)
        rhs = np.ones(60)
        for max_iter in (2, 49, 50, 51, 120):
            x, report = conjugate_gradient(matrix, rhs, 1e-14, max_iter)
            true_residual = np.linalg.norm(rhs - matrix @ x) / np.sqrt(60)
            self.assertAlmostEqual(
                report.final_relative_residual, true_residual,
                delta=1e-12 * max(true_residual, 1e-3))

    def test_circle_system_iterations(self) -> None:
        geometry = circle()
        grid = BackgroundGrid.covering(
            geometry.lower, geometry.upper, 0.0375)
        mesh = build_band_mesh(
            grid, geometry, PhaseFieldProfile(6, 0.2), rule_for(2, 6))
        system = assemble(
            mesh, SurfaceProblem(source=lambda p: np.ones(len(p))))
        u_h, report = solve_cg(system, 1e-10)
        self.assertTrue(report.converged)
        self.assertLess(report.iterations, system.n_dofs)
        self.assertTrue(np.allclose(u_h, 1, atol=1e-6))

    def test_galerkin_residual(self) -> None:
        geometry = circle()
        grid = BackgroundGrid.covering(geometry.lower, geometry.upper, 0.075)
        mesh = build_band_mesh(
            grid, geometry, PhaseFieldProfile(2, 0.4), rule_for(2, 2))
        system = assemble(mesh, SurfaceProblem(
            source=lambda p: 1 + p[:, 0] * p[:, 1]))
        u_h, report = solve_cg(system, 1e-10)
        self.assertTrue(report.converged)
        # a_h(u_h, χ_k) - l_h(χ_k) for every basis function χ_k.
        residual = system.matrix @ u_h - system.rhs
        self.assertLessEqual(
            np.abs(residual).max(), 1e-10 * np.linalg.norm(system.rhs))

    def test_constant_solution_orders(self) -> None:
        geometry = circle()
        grid = BackgroundGrid.covering(geometry.lower, geometry.upper, 0.075)
        solutions = []
        for element_order in (1, 2):
            mesh = build_band_mesh(
                grid, geometry, PhaseFieldProfile(2, 0.4), rule_for(2, 2),
                element_order)
            u_h, report = solve_cg(assemble(
                mesh, SurfaceProblem(source=lambda p: np.ones(len(p)))))
            self.assertTrue(np.allclose(u_h, 1, atol=1e-6))
            solutions.append(u_h)
        # Both orders share the vertex DOFs.
        n_vertices = len(solutions[0])
        self.assertTrue(np.allclose(
            solutions[0], solutions[1][:n_vertices], atol=2e-6))

    def test_constant_solution_sphere(self) -> None:
        geometry = sphere()
        grid = BackgroundGrid.covering(
            geometry.lower, geometry.upper, 0.1125)
        mesh = build_band_mesh(
            grid, geometry, PhaseFieldProfile(1, 0.6), rule_for(3, 1))
        u_h, report = solve_cg(
            assemble(mesh, SurfaceProblem(source=lambda p: np.ones(len(p)))),
            1e-11)
        self.assertTrue(report.converged)
        self.assertTrue(np.allclose(u_h, 1, atol=1e-6))

    def test_invalid(self) -> None:
        self.assertRaises(
            ValueError, conjugate_gradient,
            sparse.csr_matrix(np.ones((2, 3))), np.ones(2))
        self.assertRaises(
            ValueError, conjugate_gradient,
            sparse.identity(3, format="csr"), np.ones(2))
        self.assertRaises(
            ValueError, conjugate_gradient,
            sparse.csr_matrix(np.diag([1.0, 0.0])), np.ones(2))
        self.assertRaises(
            ValueError, conjugate_gradient,
            sparse.identity(2, format="csr"), np.ones(2), 0)

    def test_solve_cg(self) -> None:
        geometry = circle()
        grid = BackgroundGrid.covering(geometry.lower, geometry.upper, 0.075)
        mesh = build_band_mesh(
            grid, geometry, PhaseFieldProfile(2, 0.4), rule_for(2, 2))
        system = assemble(
            mesh, SurfaceProblem(source=lambda p: np.ones(len(p))))
        u_h, report = solve_cg(system)
        self.assertTrue(report.converged)
        self.assertTrue(np.allclose(u_h, 1, atol=1e-9))


if __name__ == "__main__":
    unittest.main()
