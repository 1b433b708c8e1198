"""Tangent projection onto the constraint manifold and Newton restoration.

The constraint normals of a component are ``1`` (volume) and ``H`` (area).
When the targets of a component sit on the isoperimetric equality only the
area normal is kept; there ``1`` and ``H`` are parallel anyway.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from helfrichflow.const import CONSTRAINT_RTOL
from helfrichflow.const import NEWTON_MAX_ITERATIONS
from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    NewtonConvergenceError,
)
from helfrichflow.variational.energy import ComponentTargets
from helfrichflow.variational.energy import ConstraintTargets
from helfrichflow.variational.energy import area
from helfrichflow.variational.energy import chart_differential
from helfrichflow.variational.energy import enclosed_volume

logger = logging.getLogger(__name__)

GRAM_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class TangentProjection:
    field: np.ndarray
    multipliers: np.ndarray
    rank: int


def constraint_normals(geom: GeometryState, area_only: bool = False) -> list[np.ndarray]:
    if area_only:
        return [geom.mean_curvature]
    return [np.ones(geom.grid.shape), geom.mean_curvature]


def tangent_projection(
    geom: GeometryState, w, area_only: bool = False
) -> TangentProjection:
    """``L2(dA)``-orthogonal projection of ``w`` off the constraint normals.

    The Gram system is solved by a pseudo-inverse so that the parallel
    normals of a round sphere only remove one direction.
    """
    w = geom.check_field(w)
    normals = constraint_normals(geom, area_only)
    gram = np.array([[geom.inner(p, q) for q in normals] for p in normals])
    rhs = np.array([geom.inner(w, p) for p in normals])
    rank = int(np.linalg.matrix_rank(gram, tol=GRAM_RCOND * np.max(np.abs(gram))))
    multipliers = np.linalg.pinv(gram, rcond=GRAM_RCOND) @ rhs
    field = w - sum(c * n for c, n in zip(multipliers, normals, strict=True))
    return TangentProjection(field=field, multipliers=multipliers, rank=rank)


def project_tangent(geom: GeometryState, w, area_only: bool = False) -> np.ndarray:
    return tangent_projection(geom, w, area_only).field


def _constraint_residual(
    geom: GeometryState, targets: ComponentTargets, area_only: bool
) -> np.ndarray:
    residual = [(area(geom) - targets.area) / targets.area]
    if not area_only:
        residual.append((enclosed_volume(geom) - targets.volume) / targets.volume)
    return np.array(residual)


def _constraint_jacobian(
    geom: GeometryState,
    targets: ComponentTargets,
    directions: list[np.ndarray],
    area_only: bool,
) -> np.ndarray:
    rows = [(-geom.mean_curvature, targets.area)]
    if not area_only:
        rows.append((np.ones(geom.grid.shape), targets.volume))
    return np.array(
        [
            [chart_differential(geom, density, d) / scale for d in directions]
            for density, scale in rows
        ]
    )


def restore_constraints(
    height: HeightField,
    targets: ComponentTargets,
    tol: float = CONSTRAINT_RTOL,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
) -> HeightField:
    """Newton correction ``h + sum_j c_j b_j`` matching area and volume.

    The correction directions are the chart fields ``1/tilt`` and ``H/tilt``
    of the input height (normal speeds ``1`` and ``H``).

    Raises:
        NewtonConvergenceError: the residual stays above ``tol`` (relative).
        ReachViolationError: a Newton iterate leaves the admissible tube.
        DegenerateGeometryError: a Newton iterate degenerates.
    """
    area_only = targets.round_sphere
    geom = pullback_geometry(height)
    residual = _constraint_residual(geom, targets, area_only)
    if np.max(np.abs(residual)) <= tol:
        return height

    directions = [1.0 / geom.tilt]
    if not area_only:
        directions.append(geom.mean_curvature / geom.tilt)

    coefficients = np.zeros(len(directions))
    current = height
    for iteration in range(1, max_iterations + 1):
        jacobian = _constraint_jacobian(geom, targets, directions, area_only)
        try:
            coefficients -= np.linalg.solve(jacobian, residual)
        except np.linalg.LinAlgError as e:
            raise NewtonConvergenceError(
                f"Singular constraint Jacobian for component {height.component}",
                residual=float(np.max(np.abs(residual))),
            ) from e
        values = height.values + sum(
            c * d for c, d in zip(coefficients, directions, strict=True)
        )
        current = height.with_values(values)
        geom = pullback_geometry(current)
        residual = _constraint_residual(geom, targets, area_only)
        logger.debug(
            f"Restore component {height.component} iteration {iteration}: "
            f"residual {np.max(np.abs(residual)):.3e}"
        )
        if np.max(np.abs(residual)) <= tol:
            return current

    final = float(np.max(np.abs(residual)))
    raise NewtonConvergenceError(
        f"Constraint restoration for component {height.component} did not "
        f"converge in {max_iterations} iterations (residual {final:.3e})",
        residual=final,
    )


def restore_all(
    heights: Sequence[HeightField], targets: ConstraintTargets
) -> tuple[HeightField, ...]:
    return tuple(
        restore_constraints(h, targets[h.component]) for h in heights
    )
