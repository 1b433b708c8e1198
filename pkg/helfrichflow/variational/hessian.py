"""Material derivatives, linearised gradient and second variation.

All formulas are for a normal velocity ``w`` (outward speed) in convected
coordinates. With ``q = H^2 - 2K`` and ``c^a = 2 k^ab H_b + 3 H H^a - 4 K^a``::

    D/Dt grad F / kappa = Delta^2 w + (a^ab w_a);b + b~ w
                        = Delta^2 w + a^ab w_;ab + c^a w_a + b~ w

    d^2F(w, w~) = kappa int (Delta w Delta w~ - a^ab w_a w~_b + b w w~) dA

where ``b = ((2k^ab - H g^ab) H_a);b + Delta q + H^4 - 5KH^2 + 4K^2 + C0^2 K``
equals ``b~ - H grad F / kappa``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.variational.energy import PhysicsParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MaterialDerivatives:
    metric: np.ndarray
    metric_inv: np.ndarray
    curvature: np.ndarray
    curvature_raised: np.ndarray
    area_density: np.ndarray
    mean_curvature: np.ndarray
    gauss_curvature: np.ndarray
    christoffel: np.ndarray
    laplacian_mean_curvature: np.ndarray

    FIELDS = (
        "metric",
        "metric_inv",
        "curvature",
        "curvature_raised",
        "area_density",
        "mean_curvature",
        "gauss_curvature",
        "christoffel",
        "laplacian_mean_curvature",
    )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass(frozen=True, eq=False)
class HessianCoefficients:
    a: np.ndarray
    first_order: np.ndarray
    b: np.ndarray
    b_tilde: np.ndarray
    kappa: float


@dataclass(frozen=True, eq=False)
class FieldJet:
    """A scalar field with the derivatives the quadratic forms need."""

    values: np.ndarray
    gradient: np.ndarray
    laplacian: np.ndarray

    @classmethod
    def of(cls, geom: GeometryState, w) -> "FieldJet":
        w = geom.check_field(w)
        return cls(w, geom.gradient(w), geom.laplacian(w))


def _mean_curvature_laplacian_derivative(
    geom: GeometryState, w, w_cov, w_hess, lap_w
) -> np.ndarray:
    h = geom.mean_curvature
    k = geom.gauss_curvature
    h_cov = geom.gradient(h)
    h_hess = geom.covariant_hessian(h)
    first_order = _first_order_field(geom, h, h_cov, geom.gradient(k))
    return (
        geom.laplacian(lap_w)
        + lap_w * (h**2 - 2.0 * k)
        + np.einsum("a...,a...->...", first_order, w_cov)
        + w
        * (
            2.0 * np.einsum("ab...,ab...->...", geom.curvature_raised, h_hess)
            + geom.gradient_norm_sq(h)
            + geom.laplacian(h**2 - 2.0 * k)
        )
    )


def _first_order_field(geom: GeometryState, h, h_cov, k_cov) -> np.ndarray:
    """``c^a = 2 k^ab H_b + 3 H H^a - 4 K^a``."""
    return (
        2.0 * np.einsum("ab...,b...->a...", geom.curvature_raised, h_cov)
        + 3.0 * h * geom.raise_index(h_cov)
        - 4.0 * geom.raise_index(k_cov)
    )


def material_derivatives(geom: GeometryState, w) -> MaterialDerivatives:
    """Evaluate every material-derivative identity for the normal speed ``w``.

    Raises:
        GridMismatchError: ``w`` lives on another grid.
    """
    w = geom.check_field(w)
    w_cov = geom.gradient(w)
    w_up = geom.raise_index(w_cov)
    w_hess = geom.covariant_hessian(w)
    lap_w = np.einsum("ab...,ab...->...", geom.metric_inv, w_hess)
    h = geom.mean_curvature
    k = geom.gauss_curvature
    shape = geom.shape_operator

    # k_ac k^c_b and k^ac k_c^b
    k_squared = np.einsum("ac...,cb...->ab...", geom.curvature, shape)
    k_squared_raised = np.einsum("ac...,bc...->ab...", geom.curvature_raised, shape)
    w_hess_raised = np.einsum(
        "ac...,bd...,cd...->ab...", geom.metric_inv, geom.metric_inv, w_hess
    )
    curvature_gradient_up = np.einsum(
        "cd...,abd...->cab...", geom.metric_inv, geom.curvature_derivative
    )

    christoffel = (
        -np.einsum("ca...,b...->cab...", shape, w_cov)
        - np.einsum("cb...,a...->cab...", shape, w_cov)
        + np.einsum("ab...,c...->cab...", geom.curvature, w_up)
        - w * curvature_gradient_up
    )

    return MaterialDerivatives(
        metric=-2.0 * w * geom.curvature,
        metric_inv=2.0 * w * geom.curvature_raised,
        curvature=w_hess - w * k_squared,
        curvature_raised=w_hess_raised + 3.0 * w * k_squared_raised,
        area_density=-w * h * geom.sqrt_g,
        mean_curvature=lap_w + w * (h**2 - 2.0 * k),
        gauss_curvature=w * k * h
        + h * lap_w
        - np.einsum("ab...,ab...->...", geom.curvature_raised, w_hess),
        christoffel=christoffel,
        laplacian_mean_curvature=_mean_curvature_laplacian_derivative(
            geom, w, w_cov, w_hess, lap_w
        ),
    )


def hessian_coefficients(
    geom: GeometryState,
    params: PhysicsParams,
    include_curvature_flux: bool = True,
) -> HessianCoefficients:
    """Coefficients ``a^ab``, ``c^a``, ``b`` and ``b~`` on ``geom``.

    ``include_curvature_flux=False`` drops ``((2k^ab - H g^ab) H_a);b`` from
    ``b``; it exists so that tests can show the term is required.
    """
    h = geom.mean_curvature
    k = geom.gauss_curvature
    c0 = params.c0
    h_cov = geom.gradient(h)
    k_cov = geom.gradient(k)
    h_hess = geom.covariant_hessian(h)
    lap_q = geom.laplacian(h**2 - 2.0 * k)

    scalar = 0.5 * h**2 - 4.0 * k + 2.0 * h * c0 - 0.5 * c0**2
    a = scalar * geom.metric_inv + 2.0 * (h - c0) * geom.curvature_raised
    a = 0.5 * (a + np.swapaxes(a, 0, 1))

    b_tilde = (
        2.0 * np.einsum("ab...,ab...->...", geom.curvature_raised, h_hess)
        + lap_q
        + geom.gradient_norm_sq(h)
        + 1.5 * h**4
        - 7.0 * k * h**2
        + 4.0 * k**2
        + 2.0 * c0 * k * h
        - 0.5 * c0**2 * h**2
        + c0**2 * k
    )

    b = lap_q + h**4 - 5.0 * k * h**2 + 4.0 * k**2 + c0**2 * k
    if include_curvature_flux:
        flux = np.einsum(
            "ab...,a...->b...",
            2.0 * geom.curvature_raised - h * geom.metric_inv,
            h_cov,
        )
        b = b + geom.divergence(flux)

    return HessianCoefficients(
        a=a,
        first_order=_first_order_field(geom, h, h_cov, k_cov),
        b=b,
        b_tilde=b_tilde,
        kappa=params.kappa,
    )


def linearized_gradient(
    geom: GeometryState,
    params: PhysicsParams,
    w,
    coefficients: HessianCoefficients | None = None,
) -> np.ndarray:
    """``kappa (Delta^2 w + (a^ab w_a);b + b~ w)``."""
    if coefficients is None:
        coefficients = hessian_coefficients(geom, params)
    w = geom.check_field(w)
    w_hess = geom.covariant_hessian(w)
    lap_w = np.einsum("ab...,ab...->...", geom.metric_inv, w_hess)
    return coefficients.kappa * (
        geom.laplacian(lap_w)
        + np.einsum("ab...,ab...->...", coefficients.a, w_hess)
        + np.einsum("a...,a...->...", coefficients.first_order, geom.gradient(w))
        + coefficients.b_tilde * w
    )


def bilinear_density(
    coefficients: HessianCoefficients, first: FieldJet, second: FieldJet
) -> np.ndarray:
    """Integrand of the second variation; symmetric in its two arguments."""
    a = coefficients.a
    g1 = first.gradient
    g2 = second.gradient
    gradient_term = (
        a[0, 0] * (g1[0] * g2[0])
        + a[1, 1] * (g1[1] * g2[1])
        + a[0, 1] * (g1[0] * g2[1] + g1[1] * g2[0])
    )
    return coefficients.kappa * (
        first.laplacian * second.laplacian
        - gradient_term
        + coefficients.b * (first.values * second.values)
    )


def second_variation(
    geom: GeometryState,
    params: PhysicsParams,
    w,
    w_tilde,
    coefficients: HessianCoefficients | None = None,
) -> float:
    """``kappa int (Delta w Delta w~ - a^ab w_a w~_b + b w w~) dA``."""
    if coefficients is None:
        coefficients = hessian_coefficients(geom, params)
    density = bilinear_density(
        coefficients, FieldJet.of(geom, w), FieldJet.of(geom, w_tilde)
    )
    return geom.integrate(density)


def second_variation_matrix(
    geom: GeometryState,
    coefficients: HessianCoefficients,
    fields: list[np.ndarray],
) -> np.ndarray:
    """Gram matrix of the second variation over ``fields`` (both triangles)."""
    jets = [FieldJet.of(geom, f) for f in fields]
    size = len(jets)
    matrix = np.empty((size, size))
    for p in range(size):
        for q in range(size):
            matrix[p, q] = geom.integrate(bilinear_density(coefficients, jets[p], jets[q]))
    return matrix
