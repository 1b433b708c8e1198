import logging

import numpy as np
from scipy.special import sph_harm_y

from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import SurfaceKind
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError

logger = logging.getLogger(__name__)


def real_spherical_harmonic(degree: int, order: int, u, v) -> np.ndarray:
    """Real, L2(unit sphere)-normalised spherical harmonic; ``u`` is polar."""
    if abs(order) > degree:
        raise ConfigError(f"|order| {order} exceeds degree {degree}")
    y = sph_harm_y(degree, abs(order), u, v)
    if order > 0:
        return np.sqrt(2.0) * y.real
    if order < 0:
        return np.sqrt(2.0) * y.imag
    return y.real


def fourier_mode(u_mode: int, v_mode: int, u, v, phase: float = 0.0) -> np.ndarray:
    return np.cos(u_mode * u + v_mode * v + phase)


def random_smooth_field(
    surface: ReferenceSurface,
    grid: Grid,
    seed: int = 0,
    max_mode: int = 3,
) -> np.ndarray:
    """Random band-limited field with unit sup norm on the grid."""
    rng = np.random.default_rng(seed)
    u, v = grid.mesh
    field = np.zeros(grid.shape)
    if surface.kind is SurfaceKind.SPHERE:
        for degree in range(1, max_mode + 1):
            orders = [0] if grid.axisymmetric else range(-degree, degree + 1)
            for order in orders:
                field += rng.normal() * real_spherical_harmonic(degree, order, u, v)
    else:
        v_modes = [0] if grid.axisymmetric else range(-max_mode, max_mode + 1)
        for j in range(max_mode + 1):
            for k in v_modes:
                if j == 0 and k < 0:
                    continue
                field += rng.normal() * fourier_mode(j, k, u, v, rng.uniform(0, 2 * np.pi))
    return field / np.max(np.abs(field))


def make_perturbation(
    surface: ReferenceSurface,
    grid: Grid,
    mode: str = "none",
    amplitude: float = 0.0,
    degree: int = 2,
    order: int = 0,
    seed: int = 0,
) -> np.ndarray:
    """Initial height values for a configured perturbation.

    ``harmonic`` (sphere) uses the real spherical harmonic of the given
    ``degree`` and ``order``; ``fourier`` (torus) uses ``cos(order u + degree v)``;
    ``random`` a seeded band-limited field. Shapes are scaled to sup norm
    ``amplitude`` on the grid; axisymmetric grids keep the azimuthal mean.
    """
    u, v = grid.mesh
    if mode == "none" or amplitude == 0.0:
        return np.zeros(grid.shape)
    if mode == "harmonic":
        if surface.kind is not SurfaceKind.SPHERE:
            raise ConfigError("harmonic perturbations need a sphere; use fourier")
        shape = real_spherical_harmonic(degree, order, u, v)
    elif mode == "fourier":
        if surface.kind is not SurfaceKind.TORUS:
            raise ConfigError("fourier perturbations need a torus; use harmonic")
        shape = fourier_mode(order, degree, u, v)
    elif mode == "random":
        shape = random_smooth_field(surface, grid, seed)
    else:
        raise ConfigError(f"Unknown perturbation mode: {mode}")

    if grid.axisymmetric:
        shape = grid.azimuthal_mean(shape)
    scale = np.max(np.abs(shape))
    if scale == 0.0:
        raise ConfigError(f"Perturbation {mode} vanishes on this grid")
    logger.debug(f"Perturbation {mode} degree={degree} order={order} amplitude={amplitude}")
    return amplitude * shape / scale
