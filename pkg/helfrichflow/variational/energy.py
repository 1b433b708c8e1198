import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from helfrichflow.const import ROUND_SPHERE_RTOL
from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicsParams:
    kappa: float = 1.0
    c0: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError(f"Bending rigidity must be positive, got {self.kappa}")


@dataclass(frozen=True)
class ComponentTargets:
    area: float
    volume: float

    def __post_init__(self):
        if not (self.area > 0 and self.volume > 0):
            raise ConfigError(
                f"Targets must be positive, got A={self.area}, V={self.volume}"
            )
        if self.area**3 < 36.0 * np.pi * self.volume**2 * (1.0 - ROUND_SPHERE_RTOL):
            raise ConfigError(
                f"Targets A={self.area}, V={self.volume} violate the "
                "isoperimetric inequality"
            )

    @property
    def round_sphere(self) -> bool:
        gap = self.area**3 - 36.0 * np.pi * self.volume**2
        return abs(gap) <= ROUND_SPHERE_RTOL * self.area**3


@dataclass(frozen=True)
class ConstraintTargets:
    components: tuple[ComponentTargets, ...]

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i: int) -> ComponentTargets:
        return self.components[i]

    @classmethod
    def measure(cls, heights: Sequence[HeightField]) -> "ConstraintTargets":
        return cls(
            tuple(ComponentTargets(*area_volume(height)) for height in heights)
        )


@dataclass(frozen=True)
class EnergySummary:
    components: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.components))


@dataclass(frozen=True, eq=False)
class MultiplierFit:
    """Least-squares Lagrange multipliers of the Helfrich equation.

    ``pressure`` is the pressure jump and ``tension`` the surface pressure ``q``
    minimising ``||grad F + pressure + tension H||``.
    """

    pressure: float
    tension: float
    residual: np.ndarray
    residual_norm: float
    rank: int


@dataclass(frozen=True, eq=False)
class ConstraintDifferentials:
    """Densities (against ``dA``) of the constraint differentials.

    ``dA(w) = int area w dA = -int w H dA`` and ``dV(w) = int volume w dA``.
    """

    area: np.ndarray
    volume: np.ndarray


def energy(geom: GeometryState, params: PhysicsParams) -> float:
    """Canham-Helfrich energy ``kappa/2 int (H - C0)^2 dA``."""
    return 0.5 * params.kappa * geom.integrate((geom.mean_curvature - params.c0) ** 2)


def total_energy(
    geoms: Sequence[GeometryState], params: PhysicsParams
) -> EnergySummary:
    return EnergySummary(tuple(energy(geom, params) for geom in geoms))


def l2_gradient(geom: GeometryState, params: PhysicsParams) -> np.ndarray:
    """``kappa (Delta H + H (H^2/2 - 2K) + C0 (2K - H C0/2))`` on the surface."""
    h = geom.mean_curvature
    k = geom.gauss_curvature
    c0 = params.c0
    return params.kappa * (
        geom.laplacian(h) + h * (0.5 * h**2 - 2.0 * k) + c0 * (2.0 * k - 0.5 * h * c0)
    )


def chart_differential_density(geom: GeometryState, field: np.ndarray) -> np.ndarray:
    """Density turning an ``L2(dA)`` gradient into a differential in ``h``.

    For a functional with gradient ``field`` the derivative in the chart
    direction ``dh`` is ``sum(weights * density * dh)``; the normal speed of
    ``dh`` is ``dh * tilt``.
    """
    return field * geom.tilt * geom.sqrt_g


def chart_differential(
    geom: GeometryState, field: np.ndarray, direction: np.ndarray
) -> float:
    density = chart_differential_density(geom, field)
    return float(geom.grid.integrate_density(density * geom.check_field(direction)))


def enclosed_volume(geom: GeometryState) -> float:
    """``1/3 int phi . nu_h dA`` (divergence theorem)."""
    support = np.sum(geom.positions * geom.normal, axis=0)
    return geom.integrate(support) / 3.0


def area(geom: GeometryState) -> float:
    return geom.integrate(np.ones(geom.grid.shape))


def area_volume(height: HeightField) -> tuple[float, float]:
    geom = pullback_geometry(height)
    return area(geom), enclosed_volume(geom)


def constraint_differentials(geom: GeometryState) -> ConstraintDifferentials:
    return ConstraintDifferentials(
        area=-geom.mean_curvature,
        volume=np.ones(geom.grid.shape),
    )


def helfrich_residual(
    geom: GeometryState,
    params: PhysicsParams,
    gradient: np.ndarray | None = None,
) -> MultiplierFit:
    """Fit ``grad F + pressure + tension H`` over ``span{1, H}`` in ``L2(dA)``.

    On round spheres ``1`` and ``H`` are parallel; the minimum-norm
    pseudo-inverse solution is returned and ``rank`` reports the deficiency.
    """
    if gradient is None:
        gradient = l2_gradient(geom, params)
    basis = [np.ones(geom.grid.shape), geom.mean_curvature]
    gram = np.array([[geom.inner(p, q) for q in basis] for p in basis])
    rhs = -np.array([geom.inner(gradient, p) for p in basis])
    scale = np.max(np.abs(gram))
    rank = int(np.linalg.matrix_rank(gram, tol=1e-10 * scale))
    pressure, tension = np.linalg.pinv(gram, rcond=1e-10) @ rhs
    residual = gradient + pressure + tension * geom.mean_curvature
    residual_norm = geom.norm(residual)
    logger.debug(
        f"Helfrich fit: pressure={pressure:.6g} tension={tension:.6g} "
        f"residual={residual_norm:.3e} rank={rank}"
    )
    return MultiplierFit(
        pressure=float(pressure),
        tension=float(tension),
        residual=residual,
        residual_norm=residual_norm,
        rank=rank,
    )
