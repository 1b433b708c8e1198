import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.perturbation import fourier_mode
from helfrichflow.geometry.perturbation import real_spherical_harmonic
from helfrichflow.geometry.refsurf import SurfaceKind
from helfrichflow.variational.constraints import project_tangent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasisSpec:
    """Low-order trial fields: harmonics on the sphere, Fourier modes on the torus.

    ``max_degree`` bounds the spherical-harmonic degree, or the largest
    wavenumber in either direction on the torus.
    """

    max_degree: int = 4
    min_degree: int = 1
    drop_tol: float = 1e-8


@dataclass(frozen=True, eq=False)
class ConstrainedBasis:
    fields: list[np.ndarray]
    labels: list[str]
    dropped: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.fields)


def trial_fields(grid: Grid, spec: BasisSpec) -> tuple[list[np.ndarray], list[str]]:
    u, v = grid.mesh
    fields = []
    labels = []
    if grid.kind is SurfaceKind.SPHERE:
        for degree in range(spec.min_degree, spec.max_degree + 1):
            orders = [0] if grid.axisymmetric else range(-degree, degree + 1)
            for order in orders:
                fields.append(real_spherical_harmonic(degree, order, u, v))
                labels.append(f"Y({degree},{order})")
        return fields, labels

    top = spec.max_degree
    v_modes = [0] if grid.axisymmetric else range(-top, top + 1)
    for j in range(top + 1):
        for k in v_modes:
            if (j, k) == (0, 0) or (j == 0 and k < 0):
                continue
            if max(j, abs(k)) < spec.min_degree:
                continue
            fields.append(fourier_mode(j, k, u, v))
            labels.append(f"cos({j}u{k:+d}v)")
            fields.append(fourier_mode(j, k, u, v, -0.5 * np.pi))
            labels.append(f"sin({j}u{k:+d}v)")
    return fields, labels


def orthonormalize(
    geom: GeometryState,
    fields: list[np.ndarray],
    labels: list[str],
    drop_tol: float = 1e-8,
    reference_norms: list[float] | None = None,
) -> ConstrainedBasis:
    """Modified Gram-Schmidt in ``L2(dA)``, two passes, dropping dependent fields.

    A field is dropped when what survives of it is below ``drop_tol`` times
    its reference norm (its own norm unless ``reference_norms`` is given).
    """
    if reference_norms is None:
        reference_norms = [geom.norm(f) for f in fields]
    kept = []
    kept_labels = []
    dropped = []
    for f, label, original in zip(fields, labels, reference_norms, strict=True):
        vector = np.array(f, dtype=float)
        for _ in range(2):
            for e in kept:
                vector = vector - geom.inner(vector, e) * e
        norm = geom.norm(vector)
        if original == 0.0 or norm <= drop_tol * original:
            dropped.append(label)
            continue
        kept.append(vector / norm)
        kept_labels.append(label)
    if dropped:
        logger.info(f"Dropped {len(dropped)} dependent basis directions: {dropped}")
    return ConstrainedBasis(kept, kept_labels, dropped)


def constrained_basis(
    geom: GeometryState, spec: BasisSpec, area_only: bool = False
) -> ConstrainedBasis:
    fields, labels = trial_fields(geom.grid, spec)
    projected = [project_tangent(geom, f, area_only) for f in fields]
    return orthonormalize(
        geom, projected, labels, spec.drop_tol, [geom.norm(f) for f in fields]
    )
