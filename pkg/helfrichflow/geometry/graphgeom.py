"""Pulled-back geometry of normal graphs ``x + h(x) nu(x)`` over a reference.

Index conventions for the arrays of :class:`GeometryState` (leading axes, the
grid axes always come last):

* ``tangents[a, i]``: ``d_a phi`` with Cartesian component ``i``;
* ``metric[a, b]``, ``metric_inv[a, b]``, ``curvature[a, b]`` (``k_ab``);
* ``shape_operator[a, b]``: ``k^a_b = g^ac k_cb``;
* ``christoffel[c, a, b]``: ``Gamma^c_ab``;
* ``curvature_derivative[a, b, c]``: ``k_ab;c``.

Curvature signs follow ``k_ab = <d_ab phi, nu_h>`` with the outer normal, so
the normal velocity identities hold with ``w`` the outward speed (and the unit
sphere has ``H = -2``).
"""

import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    DegenerateGeometryError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridMismatchError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    ReachViolationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HeightField:
    surface: ReferenceSurface
    grid: Grid
    values: np.ndarray
    component: int = 0

    def __post_init__(self):
        values = self.grid.check_field(self.values, "height field")
        if values.ndim != 2:
            raise GridMismatchError(f"height field must be 2-D, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, surface: ReferenceSurface, grid: Grid, component: int = 0):
        return cls(surface, grid, np.zeros(grid.shape), component)

    def with_values(self, values: np.ndarray) -> "HeightField":
        return HeightField(self.surface, self.grid, values, self.component)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_admissible(self) -> bool:
        return bool(np.all(np.isfinite(self.values))) and (
            self.sup_norm <= 0.5 * self.surface.reach
        )

    def check_admissible(self):
        if not self.is_admissible():
            raise ReachViolationError(
                f"Component {self.component}: sup|h| = {self.sup_norm:.6g} exceeds "
                f"half the reach {0.5 * self.surface.reach:.6g}"
            )


def reference_normal(surface: ReferenceSurface, grid: Grid) -> np.ndarray:
    return surface.normal(*grid.mesh)


def embed(height: HeightField) -> np.ndarray:
    """Positions ``phi_h = x + h nu`` with shape ``(3, n_u, n_v)``.

    Raises:
        ReachViolationError: ``h`` leaves the admissible tube.
    """
    height.check_admissible()
    u, v = height.grid.mesh
    return height.surface.position(u, v) + height.values * height.surface.normal(u, v)


@dataclass(frozen=True, eq=False)
class GeometryState:
    grid: Grid
    positions: np.ndarray
    tangents: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    sqrt_g: np.ndarray
    normal: np.ndarray
    tilt: np.ndarray
    curvature: np.ndarray
    shape_operator: np.ndarray
    curvature_raised: np.ndarray
    mean_curvature: np.ndarray
    gauss_curvature: np.ndarray
    christoffel: np.ndarray
    curvature_derivative: np.ndarray
    component: int = 0

    @property
    def area_density(self) -> np.ndarray:
        return self.sqrt_g

    def check_field(self, f, name: str = "field") -> np.ndarray:
        f = self.grid.check_field(f, name)
        if f.ndim != 2:
            raise GridMismatchError(f"{name} must be a scalar grid field")
        return f

    def integrate(self, f) -> float:
        return float(self.grid.integrate_density(self.check_field(f) * self.sqrt_g))

    def inner(self, f, g) -> float:
        return self.integrate(np.asarray(f) * np.asarray(g))

    def norm(self, f) -> float:
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    def gradient(self, f) -> np.ndarray:
        """Covariant components ``f_,a``."""
        return self.grid.gradient(self.check_field(f))

    def raise_index(self, covector: np.ndarray) -> np.ndarray:
        return np.einsum("ab...,b...->a...", self.metric_inv, covector)

    def gradient_norm_sq(self, f) -> np.ndarray:
        df = self.gradient(f)
        return np.einsum("ab...,a...,b...->...", self.metric_inv, df, df)

    def covariant_hessian(self, f) -> np.ndarray:
        """``f_;ab = f_,ab - Gamma^c_ab f_,c``."""
        d = self.grid.derivatives(self.check_field(f), 2)
        first = np.stack([d[(1, 0)], d[(0, 1)]])
        second = np.stack(
            [
                np.stack([d[(2, 0)], d[(1, 1)]]),
                np.stack([d[(1, 1)], d[(0, 2)]]),
            ]
        )
        return second - np.einsum("cab...,c...->ab...", self.christoffel, first)

    def laplacian(self, f) -> np.ndarray:
        return np.einsum("ab...,ab...->...", self.metric_inv, self.covariant_hessian(f))

    def divergence(self, vector: np.ndarray) -> np.ndarray:
        """Surface divergence ``V^a_;a`` of a tangent field given by ``V^a``.

        The field is differentiated through its Cartesian form
        ``V^a d_a phi``, which stays smooth across the sphere poles.
        """
        cartesian = np.einsum("ai...,a...->i...", self.tangents, vector)
        d_cartesian = self.grid.gradient(cartesian)
        return np.einsum(
            "ab...,ai...,bi...->...", self.metric_inv, d_cartesian, self.tangents
        )


def _third_index(a: int, b: int, c: int) -> tuple[int, int]:
    dv = a + b + c
    return (3 - dv, dv)


def geometry_from_embedding(
    grid: Grid,
    positions: np.ndarray,
    reference_normal_field: np.ndarray,
    orientation: float = 1.0,
    component: int = 0,
) -> GeometryState:
    """Full pointwise geometry of the surface sampled by ``positions``.

    ``orientation`` turns ``d_u phi x d_v phi`` into the outer normal;
    ``reference_normal_field`` is only used for the tilt ``nu_h . nu``.

    Raises:
        DegenerateGeometryError: the metric is not positive definite or the
            normal flips against the reference normal at some node.
    """
    positions = grid.check_field(positions, "positions")
    d = grid.derivatives(positions, 3)
    tangents = np.stack([d[(1, 0)], d[(0, 1)]])
    second = np.stack(
        [
            np.stack([d[(2, 0)], d[(1, 1)]]),
            np.stack([d[(1, 1)], d[(0, 2)]]),
        ]
    )
    third = np.empty((2, 2, 2, *positions.shape))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                third[a, b, c] = d[_third_index(a, b, c)]

    metric = np.einsum("ai...,bi...->ab...", tangents, tangents)
    det = metric[0, 0] * metric[1, 1] - metric[0, 1] * metric[1, 0]
    bad = ~np.isfinite(det) | (det <= 0.0) | (metric[0, 0] <= 0.0)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DegenerateGeometryError(
            f"Metric is not positive definite at node {node}", node=node
        )
    metric_inv = np.stack(
        [
            np.stack([metric[1, 1], -metric[0, 1]]),
            np.stack([-metric[1, 0], metric[0, 0]]),
        ]
    ) / det

    cross = np.cross(tangents[0], tangents[1], axis=0)
    sqrt_g = np.linalg.norm(cross, axis=0)
    normal = orientation * cross / sqrt_g
    tilt = np.sum(normal * reference_normal_field, axis=0)
    if np.any(tilt <= 0.0):
        node = tuple(int(i) for i in np.argwhere(tilt <= 0.0)[0])
        raise DegenerateGeometryError(
            f"Normal is not transversal to the reference at node {node}", node=node
        )

    curvature = np.einsum("abi...,i...->ab...", second, normal)
    shape_operator = np.einsum("ac...,cb...->ab...", metric_inv, curvature)
    curvature_raised = np.einsum("ac...,cb...->ab...", shape_operator, metric_inv)
    mean_curvature = shape_operator[0, 0] + shape_operator[1, 1]
    gauss_curvature = (
        curvature[0, 0] * curvature[1, 1] - curvature[0, 1] * curvature[1, 0]
    ) / det

    christoffel_lower = np.einsum("abi...,ci...->cab...", second, tangents)
    christoffel = np.einsum("cd...,dab...->cab...", metric_inv, christoffel_lower)

    # Weingarten: d_c nu = -k^d_c d_d phi
    d_normal = -np.einsum("dc...,di...->ci...", shape_operator, tangents)
    partial_k = np.einsum("abci...,i...->abc...", third, normal) + np.einsum(
        "abi...,ci...->abc...", second, d_normal
    )
    curvature_derivative = (
        partial_k
        - np.einsum("dca...,db...->abc...", christoffel, curvature)
        - np.einsum("dcb...,ad...->abc...", christoffel, curvature)
    )

    return GeometryState(
        grid=grid,
        positions=positions,
        tangents=tangents,
        metric=metric,
        metric_inv=metric_inv,
        sqrt_g=sqrt_g,
        normal=normal,
        tilt=tilt,
        curvature=curvature,
        shape_operator=shape_operator,
        curvature_raised=curvature_raised,
        mean_curvature=mean_curvature,
        gauss_curvature=gauss_curvature,
        christoffel=christoffel,
        curvature_derivative=curvature_derivative,
        component=component,
    )


def pullback_geometry(height: HeightField) -> GeometryState:
    """Geometry of ``Gamma_h`` on the grid of ``height``.

    Raises:
        ReachViolationError: ``h`` is not admissible.
        DegenerateGeometryError: the pulled-back metric degenerates.
    """
    positions = embed(height)
    return geometry_from_embedding(
        height.grid,
        positions,
        reference_normal(height.surface, height.grid),
        orientation=height.surface.orientation,
        component=height.component,
    )


def reference_geometry(surface: ReferenceSurface, grid: Grid) -> GeometryState:
    return pullback_geometry(HeightField.zeros(surface, grid))


def laplace_beltrami(geom: GeometryState, f) -> np.ndarray:
    """``Delta_g f = g^ab (f_,ab - Gamma^c_ab f_,c)``.

    Raises:
        GridMismatchError: ``f`` is sampled on another grid.
    """
    return geom.laplacian(f)


def integrate(geom: GeometryState, f) -> float:
    """Quadrature of ``f dA`` over the component described by ``geom``."""
    return geom.integrate(f)


def integrate_components(geoms, fields) -> np.ndarray:
    """Per-component integrals for a multi-component configuration."""
    return np.array([integrate(g, f) for g, f in zip(geoms, fields, strict=True)])
