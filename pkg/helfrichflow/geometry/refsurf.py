import enum
import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    SurfaceParameterError,
)

logger = logging.getLogger(__name__)


class SurfaceKind(enum.Enum):
    SPHERE = "sphere"
    TORUS = "torus"


@dataclass(frozen=True)
class ReferenceSurface:
    """Analytic closed reference surface.

    The first parameter ``u`` is the polar angle of the sphere (in ``(0, pi)``)
    or the poloidal angle of the torus; ``v`` is the azimuth about the z-axis
    in both cases.

    Curvature convention: ``k_ab = <d_ab X, nu>`` with the outer normal ``nu``,
    so the sphere of radius ``R`` has ``H = -2/R`` and ``K = 1/R^2``.
    """

    kind: SurfaceKind
    radius: float = 1.0
    major: float = 0.0
    minor: float = 0.0

    @property
    def reach(self) -> float:
        if self.kind is SurfaceKind.SPHERE:
            return self.radius
        # The inner equator bounds the tube once a < 2r.
        return min(self.minor, self.major - self.minor)

    @property
    def orientation(self) -> float:
        """Sign turning ``d_u X x d_v X`` into the outer normal."""
        return 1.0 if self.kind is SurfaceKind.SPHERE else -1.0

    @property
    def euler_characteristic(self) -> int:
        return 2 if self.kind is SurfaceKind.SPHERE else 0

    def _rho(self, u):
        return self.major + self.minor * np.cos(u)

    def position(self, u, v) -> np.ndarray:
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        if self.kind is SurfaceKind.SPHERE:
            return self.radius * np.stack(
                [np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)],
            )
        rho = self._rho(u)
        return np.stack(
            [rho * np.cos(v), rho * np.sin(v), self.minor * np.sin(u)],
        )

    def normal(self, u, v) -> np.ndarray:
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        if self.kind is SurfaceKind.SPHERE:
            return np.stack(
                [np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)],
            )
        return np.stack(
            [np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), np.sin(u)],
        )

    def metric(self, u, v) -> np.ndarray:
        u, _ = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        g = np.zeros((2, 2, *u.shape))
        if self.kind is SurfaceKind.SPHERE:
            g[0, 0] = self.radius**2
            g[1, 1] = (self.radius * np.sin(u)) ** 2
        else:
            g[0, 0] = self.minor**2
            g[1, 1] = self._rho(u) ** 2
        return g

    def second_fundamental_form(self, u, v) -> np.ndarray:
        u, _ = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        k = np.zeros((2, 2, *u.shape))
        if self.kind is SurfaceKind.SPHERE:
            k[0, 0] = -self.radius
            k[1, 1] = -self.radius * np.sin(u) ** 2
        else:
            k[0, 0] = -self.minor
            k[1, 1] = -self._rho(u) * np.cos(u)
        return k

    def mean_curvature(self, u, v) -> np.ndarray:
        u, _ = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        if self.kind is SurfaceKind.SPHERE:
            return np.full(u.shape, -2.0 / self.radius)
        return -1.0 / self.minor - np.cos(u) / self._rho(u)

    def gauss_curvature(self, u, v) -> np.ndarray:
        u, _ = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        if self.kind is SurfaceKind.SPHERE:
            return np.full(u.shape, 1.0 / self.radius**2)
        return np.cos(u) / (self.minor * self._rho(u))

    def area(self) -> float:
        if self.kind is SurfaceKind.SPHERE:
            return 4.0 * np.pi * self.radius**2
        return 4.0 * np.pi**2 * self.major * self.minor

    def enclosed_volume(self) -> float:
        if self.kind is SurfaceKind.SPHERE:
            return 4.0 * np.pi * self.radius**3 / 3.0
        return 2.0 * np.pi**2 * self.major * self.minor**2

    def describe(self) -> dict:
        if self.kind is SurfaceKind.SPHERE:
            return {"kind": self.kind.value, "radius": self.radius}
        return {"kind": self.kind.value, "major": self.major, "minor": self.minor}


def make_reference(
    kind: str | SurfaceKind,
    radius: float = 1.0,
    major: float = 2.0,
    minor: float = 0.5,
) -> ReferenceSurface:
    """Build a reference sphere (``radius``) or torus (``major``, ``minor``).

    Raises:
        SurfaceParameterError: non-positive radii or a self-intersecting torus.
    """
    try:
        kind = SurfaceKind(kind)
    except ValueError as e:
        raise SurfaceParameterError(f"Unknown surface kind: {kind}") from e

    if kind is SurfaceKind.SPHERE:
        if not radius > 0:
            raise SurfaceParameterError(
                f"Sphere radius must be positive, got {radius}"
            )
        surface = ReferenceSurface(kind=kind, radius=float(radius))
    else:
        if not (major > 0 and minor > 0):
            raise SurfaceParameterError(
                f"Torus radii must be positive, got a={major}, r={minor}"
            )
        if major <= minor:
            raise SurfaceParameterError(
                f"Torus with a={major} <= r={minor} self-intersects"
            )
        surface = ReferenceSurface(kind=kind, major=float(major), minor=float(minor))
    logger.debug(f"Reference surface {surface.describe()}, reach {surface.reach}")
    return surface
