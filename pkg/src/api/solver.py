"""
This module solves the assembled symmetric positive-definite systems
with the conjugate gradient method and diagonal (Jacobi)
preconditioning.

The iteration stops once ‖b - Mx‖₂ <= rel_tol * ‖b‖₂. Every 50
iterations the recursively updated residual is replaced by the true
residual to stop rounding drift. Only true residuals are compared
and reported. When the iteration limit is reached, or the true residual
stops improving at the rounding floor, the best checked iterate is
returned together with a report whose `converged` flag is False;
deciding what to do with it is left to the caller.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

try:
    from api.assembly import AssembledSystem
except ImportError:
    try:
        from assembly import AssembledSystem
    except ImportError:
        from .assembly import AssembledSystem


logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-12
# Iteration limit per degree of freedom when none is given.
DEFAULT_ITERATIONS_PER_DOF = 10
RESIDUAL_REFRESH_INTERVAL = 50
# True residual checks without a new best before giving up.
STAGNATION_CHECKS = 20


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one conjugate gradient solve."""
    iterations: int
    final_relative_residual: float
    converged: bool


def _validate_system(matrix: sparse.spmatrix, rhs: np.ndarray) -> None:
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("Matrix must be square.")
    if rhs.shape != (matrix.shape[0],):
        raise ValueError("Right-hand side does not match the matrix.")
    if not np.all(matrix.diagonal() > 0):
        raise ValueError("Matrix diagonal must be strictly positive.")


def conjugate_gradient(
    matrix: sparse.spmatrix, rhs: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL, max_iter: int | None = None,
    preconditioned: bool = True,
    callback: Callable[[int, np.ndarray], None] | None = None
) -> tuple[np.ndarray, SolveReport]:
    """
    Solves Mx = b from x = 0. `callback(iteration, x)` is called after
    every iteration with the current iterate.
    """
    rhs = np.asarray(rhs, dtype=float)
    _validate_system(matrix, rhs)
    if not rel_tol > 0:
        raise ValueError("Relative tolerance must be positive.")
    n = len(rhs)
    if max_iter is None:
        max_iter = DEFAULT_ITERATIONS_PER_DOF * n
    x = np.zeros(n)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return x, SolveReport(0, 0.0, True)
    inverse_diagonal = (
        1 / matrix.diagonal() if preconditioned else np.ones(n))

    residual = rhs.copy()
    z = inverse_diagonal * residual
    direction = z.copy()
    rz = residual @ z
    # Only true residuals are compared; x = 0 has relative residual 1.
    best_x, best_residual = x.copy(), 1.0
    stalled_checks = 0
    iteration = 0
    while iteration < max_iter:
        product = matrix @ direction
        curvature = direction @ product
        if not curvature > 0:
            logger.debug("CG breakdown at iteration %d", iteration)
            break
        alpha = rz / curvature
        x += alpha * direction
        iteration += 1
        checked = iteration % RESIDUAL_REFRESH_INTERVAL == 0
        if checked:
            residual = rhs - matrix @ x
        else:
            residual -= alpha * product
        relative = np.linalg.norm(residual) / rhs_norm
        if not checked and relative <= rel_tol:
            # Confirm with the true residual before stopping.
            residual = rhs - matrix @ x
            relative = np.linalg.norm(residual) / rhs_norm
            checked = True
        if checked:
            if relative < best_residual:
                best_x, best_residual = x.copy(), relative
                stalled_checks = 0
            else:
                stalled_checks += 1
        if callback is not None:
            callback(iteration, x)
        if checked and relative <= rel_tol:
            break
        if stalled_checks >= STAGNATION_CHECKS:
            logger.debug(
                "CG true residual has not improved in %d checks",
                STAGNATION_CHECKS)
            break
        z = inverse_diagonal * residual
        rz_next = residual @ z
        direction = z + (rz_next / rz) * direction
        rz = rz_next

    converged = best_residual <= rel_tol
    if converged:
        logger.info(
            "CG converged in %d iterations (relative residual %.3e)",
            iteration, best_residual)
    else:
        logger.warning(
            "CG stopped after %d iterations with relative residual %.3e "
            "above %.1e", iteration, best_residual, rel_tol)
    return best_x, SolveReport(iteration, float(best_residual), converged)


def solve_cg(
    system: AssembledSystem, rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int | None = None, preconditioned: bool = True,
    callback: Callable[[int, np.ndarray], None] | None = None
) -> tuple[np.ndarray, SolveReport]:
    """
    Solves an assembled system with Jacobi-preconditioned CG. The
    iteration limit defaults to 10 times the number of DOFs.
    """
    return conjugate_gradient(
        system.matrix, system.rhs, rel_tol, max_iter, preconditioned,
        callback)
