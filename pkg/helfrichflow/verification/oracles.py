"""Finite-difference oracles with an epsilon sweep.

A derivative passes when the best relative error is within tolerance and the
median order over pairs of consecutive steps is at least second order (or
the difference quotient is exact to round-off).
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import geometry_from_embedding
from helfrichflow.geometry.graphgeom import reference_normal
from helfrichflow.geometry.refsurf import ReferenceSurface

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (4e-3, 2e-3, 1e-3, 5e-4)
MIN_ORDER = 1.9
EXACT_FLOOR = 1e-10


@dataclass(frozen=True)
class EpsilonSweep:
    epsilons: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    exact_scale: float

    @property
    def best_error(self) -> float:
        return min(self.errors)

    @property
    def observed_order(self) -> float:
        finite = [p for p in self.orders if np.isfinite(p)]
        return float(np.median(finite)) if finite else float("nan")

    def passes(self, tol: float, min_order: float = MIN_ORDER) -> bool:
        if self.best_error > tol:
            return False
        return self.best_error <= EXACT_FLOOR or self.observed_order >= min_order

    def describe(self) -> str:
        return (
            f"best={self.best_error:.2e} order={self.observed_order:.2f} "
            f"errors={[f'{e:.1e}' for e in self.errors]}"
        )


def central_difference(fn: Callable[[float], np.ndarray], eps: float):
    return (np.asarray(fn(eps)) - np.asarray(fn(-eps))) / (2.0 * eps)


def second_central_difference(fn: Callable[[float], np.ndarray], eps: float, center=None):
    if center is None:
        center = fn(0.0)
    return (np.asarray(fn(eps)) - 2.0 * np.asarray(center) + np.asarray(fn(-eps))) / eps**2


def epsilon_sweep(
    fn: Callable[[float], np.ndarray],
    exact,
    epsilons=DEFAULT_EPSILONS,
    second: bool = False,
    scale: float = 0.0,
) -> EpsilonSweep:
    """Compare difference quotients of ``fn`` at each epsilon with ``exact``.

    Errors are measured in the max norm relative to ``max(max|exact|, scale)``;
    ``scale`` keeps derivatives that vanish at critical points from being
    measured against round-off.
    """
    exact = np.asarray(exact, dtype=float)
    scale = max(float(np.max(np.abs(exact))), abs(scale))
    denominator = scale if scale > 0 else 1.0
    center = fn(0.0) if second else None
    errors = []
    for eps in epsilons:
        if second:
            approx = second_central_difference(fn, eps, center)
        else:
            approx = central_difference(fn, eps)
        errors.append(float(np.max(np.abs(approx - exact))) / denominator)
    orders = []
    for (e1, err1), (e2, err2) in zip(
        zip(epsilons, errors, strict=True),
        zip(epsilons[1:], errors[1:], strict=True),
        strict=False,
    ):
        if err1 > 0 and err2 > 0:
            orders.append(float(np.log(err1 / err2) / np.log(e1 / e2)))
        else:
            orders.append(float("inf"))
    return EpsilonSweep(tuple(epsilons), tuple(errors), tuple(orders), scale)


def normal_path_geometry(
    surface: ReferenceSurface,
    geom: GeometryState,
    w: np.ndarray,
    eps: float,
) -> GeometryState:
    """Geometry of ``phi_h + eps w nu_h`` on the grid of ``geom``.

    Moving every point along the fixed normal of ``Gamma_h`` gives normal
    speed ``w`` at ``eps = 0`` in convected coordinates, for any ``h``.
    """
    positions = geom.positions + eps * w * geom.normal
    return geometry_from_embedding(
        geom.grid,
        positions,
        reference_normal(surface, geom.grid),
        orientation=surface.orientation,
        component=geom.component,
    )


def torus_laplacian_stencil(
    surface: ReferenceSurface,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    u: np.ndarray,
    v: np.ndarray,
    delta: float = 1e-2,
) -> np.ndarray:
    """Coordinate-formula Laplacian of an analytic ``f`` on the reference torus.

    Evaluates ``(r^2 rho)^-1 d_u(rho d_u f) + rho^-2 d_v^2 f`` with nested
    second-order differences in flux form, extrapolated once in ``delta``.
    """

    def stencil(step: float) -> np.ndarray:
        def rho(x):
            return surface.major + surface.minor * np.cos(x)

        f0 = f(u, v)
        flux_plus = rho(u + 0.5 * step) * (f(u + step, v) - f0)
        flux_minus = rho(u - 0.5 * step) * (f0 - f(u - step, v))
        poloidal = (flux_plus - flux_minus) / (step**2 * surface.minor**2 * rho(u))
        toroidal = (f(u, v + step) - 2.0 * f0 + f(u, v - step)) / (step**2 * rho(u) ** 2)
        return poloidal + toroidal

    coarse = stencil(delta)
    fine = stencil(0.5 * delta)
    return (4.0 * fine - coarse) / 3.0
