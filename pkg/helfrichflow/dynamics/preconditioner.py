"""Exact inverse of the implicit step operator on the reference surface.

The reference metric depends on ``u`` only, so ``I - s Delta + c Delta^2``
decouples over azimuthal Fourier modes. Each mode is a dense ``n_u x n_u``
block, factorised once per step size and reused by every Krylov iteration.
"""

import logging

import numpy as np
from scipy.linalg import lu_factor
from scipy.linalg import lu_solve
from scipy.sparse.linalg import LinearOperator

from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import SurfaceKind

logger = logging.getLogger(__name__)


def mode_laplacian(surface: ReferenceSurface, grid: Grid, m: int) -> np.ndarray:
    """Dense reference Laplace-Beltrami operator on ``f(u) exp(i m v)``."""
    u = grid.u
    if surface.kind is SurfaceKind.SPHERE:
        parity = -1 if m % 2 else 1
        d1 = grid.u_derivative_matrix(1, parity)
        d2 = grid.u_derivative_matrix(2, parity)
        cot = np.cos(u) / np.sin(u)
        return (
            d2 + cot[:, None] * d1 - np.diag(m**2 / np.sin(u) ** 2)
        ) / surface.radius**2

    rho = surface.major + surface.minor * np.cos(u)
    d1 = grid.u_derivative_matrix(1)
    flux = d1 @ (rho[:, None] * d1)
    return flux / (surface.minor**2 * rho)[:, None] - np.diag(m**2 / rho**2)


class ReferencePreconditioner:
    def __init__(
        self,
        surface: ReferenceSurface,
        grid: Grid,
        biharmonic: float,
        screening: float = 0.0,
    ):
        self.grid = grid
        self.biharmonic = biharmonic
        self.screening = screening
        identity = np.eye(grid.n_u)
        self.factors = []
        for m in range(grid.n_v // 2 + 1):
            lap = mode_laplacian(surface, grid, m)
            block = identity - screening * lap + biharmonic * (lap @ lap)
            self.factors.append(lu_factor(block))
        logger.debug(
            f"Preconditioner factorised {len(self.factors)} azimuthal blocks "
            f"(biharmonic={biharmonic:.3e}, screening={screening:.3e})"
        )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = self.grid.check_field(rhs)
        coefficients = np.fft.rfft(rhs, axis=-1)
        solution = np.empty_like(coefficients)
        for m, factor in enumerate(self.factors):
            column = coefficients[:, m]
            solution[:, m] = lu_solve(factor, column.real) + 1j * lu_solve(
                factor, column.imag
            )
        return np.fft.irfft(solution, n=self.grid.n_v, axis=-1)

    def as_linear_operator(self) -> LinearOperator:
        size = self.grid.n_u * self.grid.n_v

        def matvec(x):
            return self.solve(np.reshape(x, self.grid.shape)).ravel()

        return LinearOperator((size, size), matvec=matvec, dtype=float)
