"""Normal components of the infinitesimal symmetries of the energy.

Translations ``nu_h . c`` and rotations ``nu_h . (omega x phi)`` move a surface
along the orbit of the Euclidean group. The conformal family (dilation
``nu_h . phi`` and special conformal fields ``nu_h . (2 (b . phi) phi - |phi|^2 b)``)
is taken about the origin of the embedding.
"""

import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")


@dataclass(frozen=True, eq=False)
class SymmetryField:
    name: str
    family: str
    values: np.ndarray
    norm: float
    vanishing: bool


def _normal_component(geom: GeometryState, vector_field: np.ndarray) -> np.ndarray:
    return np.sum(geom.normal * vector_field, axis=0)


def _make(geom, name, family, values, scale, tol) -> SymmetryField:
    norm = geom.norm(values)
    return SymmetryField(
        name=name,
        family=family,
        values=values,
        norm=norm,
        vanishing=bool(norm <= tol * scale),
    )


def symmetry_fields(
    height: HeightField | GeometryState,
    include_conformal: bool = False,
    vanish_tol: float = 1e-8,
) -> list[SymmetryField]:
    """Translation and rotation fields on ``Gamma_h``, optionally the conformal ones.

    A field is flagged ``vanishing`` when its ``L2(dA)`` norm is below
    ``vanish_tol`` times the norm the same generator would have at unit
    normal speed, e.g. rotations of a round sphere about its centre.
    """
    geom = height if isinstance(height, GeometryState) else pullback_geometry(height)
    phi = geom.positions
    area = geom.integrate(np.ones(geom.grid.shape))
    radius = np.sqrt(area / (4.0 * np.pi))
    unit = np.sqrt(area)

    fields = []
    for i, axis in enumerate(AXES):
        fields.append(
            _make(
                geom,
                f"translation-{axis}",
                "translation",
                geom.normal[i].copy(),
                unit,
                vanish_tol,
            )
        )
    for i, axis in enumerate(AXES):
        omega = np.zeros(3)
        omega[i] = 1.0
        velocity = np.cross(omega[:, None, None], phi, axis=0)
        fields.append(
            _make(
                geom,
                f"rotation-{axis}",
                "rotation",
                _normal_component(geom, velocity),
                unit * radius,
                vanish_tol,
            )
        )

    if include_conformal:
        fields.append(
            _make(
                geom,
                "dilation",
                "conformal",
                _normal_component(geom, phi),
                unit * radius,
                vanish_tol,
            )
        )
        squared = np.sum(phi**2, axis=0)
        for i, axis in enumerate(AXES):
            b = np.zeros(3)
            b[i] = 1.0
            velocity = 2.0 * phi[i] * phi - squared * b[:, None, None]
            fields.append(
                _make(
                    geom,
                    f"special-conformal-{axis}",
                    "conformal",
                    _normal_component(geom, velocity),
                    unit * radius**2,
                    vanish_tol,
                )
            )

    vanishing = [f.name for f in fields if f.vanishing]
    if vanishing:
        logger.debug(f"Vanishing symmetry fields: {vanishing}")
    return fields
