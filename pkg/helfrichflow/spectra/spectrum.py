import logging
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np
import scipy.linalg

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.spectra.basis import BasisSpec
from helfrichflow.spectra.basis import ConstrainedBasis
from helfrichflow.spectra.basis import constrained_basis
from helfrichflow.spectra.symmetry import SymmetryField
from helfrichflow.spectra.symmetry import symmetry_fields
from helfrichflow.variational.energy import PhysicsParams
from helfrichflow.variational.energy import helfrich_residual
from helfrichflow.variational.hessian import hessian_coefficients
from helfrichflow.variational.hessian import second_variation_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AssembledHessian:
    matrix: np.ndarray
    max_asymmetry: float
    basis: ConstrainedBasis
    helfrich_residual: float
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SymmetryCoefficients:
    names: list[str]
    coefficients: np.ndarray
    projection_errors: list[float]
    vanishing: list[str]


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tol: float
    near_kernel: np.ndarray
    principal_angles: np.ndarray
    smallest_transverse_eigenvalue: float | None
    negative_transverse: int
    symmetry_rayleigh_quotients: dict[str, float]
    symmetry: SymmetryCoefficients | None = None
    basis_labels: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def near_kernel_dimension(self) -> int:
        return int(self.near_kernel.size)

    @property
    def max_principal_angle(self) -> float | None:
        if self.principal_angles.size == 0:
            return None
        return float(np.max(self.principal_angles))

    def to_dict(self) -> dict:
        report = {
            "eigenvalues": self.eigenvalues,
            "tol": self.tol,
            "near_kernel_dimension": self.near_kernel_dimension,
            "near_kernel_eigenvalues": self.eigenvalues[self.near_kernel],
            "principal_angles": self.principal_angles,
            "max_principal_angle": self.max_principal_angle,
            "smallest_transverse_eigenvalue": self.smallest_transverse_eigenvalue,
            "negative_transverse": self.negative_transverse,
            "symmetry_rayleigh_quotients": self.symmetry_rayleigh_quotients,
            "basis_labels": self.basis_labels,
        }
        if self.symmetry is not None:
            report["symmetry_fields"] = self.symmetry.names
            report["vanishing_symmetry_fields"] = self.symmetry.vanishing
            report["symmetry_projection_errors"] = self.symmetry.projection_errors
        report.update(self.extra)
        return report


def assemble_hessian(
    geom: GeometryState,
    params: PhysicsParams,
    basis_spec: BasisSpec | ConstrainedBasis | Sequence[np.ndarray],
    area_only: bool = False,
    stationarity_tol: float = 1e-6,
) -> AssembledHessian:
    """Matrix of the second variation over a finite family of fields.

    A :class:`BasisSpec` is expanded into trial fields, projected onto the
    linearised constraints and orthonormalised; plain field sequences are
    used as they are.
    """
    if isinstance(basis_spec, BasisSpec):
        basis = constrained_basis(geom, basis_spec, area_only)
    elif isinstance(basis_spec, ConstrainedBasis):
        basis = basis_spec
    else:
        fields = [np.asarray(f, dtype=float) for f in basis_spec]
        basis = ConstrainedBasis(fields, [f"field-{i}" for i in range(len(fields))])

    warnings = []
    fit = helfrich_residual(geom, params)
    if fit.residual_norm > stationarity_tol:
        message = (
            f"Geometry is not Helfrich-stationary: residual {fit.residual_norm:.3e} "
            f"exceeds {stationarity_tol:.1e}"
        )
        logger.warning(message)
        warnings.append(message)
    if basis.dropped:
        warnings.append(f"Dropped dependent directions: {', '.join(basis.dropped)}")

    coefficients = hessian_coefficients(geom, params)
    matrix = second_variation_matrix(geom, coefficients, basis.fields)
    max_asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    matrix = 0.5 * (matrix + matrix.T)
    logger.debug(
        f"Assembled {matrix.shape[0]}x{matrix.shape[0]} Hessian, "
        f"asymmetry {max_asymmetry:.3e}"
    )
    return AssembledHessian(
        matrix=matrix,
        max_asymmetry=max_asymmetry,
        basis=basis,
        helfrich_residual=fit.residual_norm,
        warnings=warnings,
    )


def symmetry_coefficients(
    geom: GeometryState,
    basis: ConstrainedBasis,
    fields: Sequence[SymmetryField],
) -> SymmetryCoefficients:
    """Coordinates of the non-vanishing symmetry fields in ``basis``."""
    kept = [f for f in fields if not f.vanishing]
    coefficients = np.zeros((len(basis), len(kept)))
    errors = []
    for j, sym in enumerate(kept):
        coefficients[:, j] = [geom.inner(sym.values, e) for e in basis.fields]
        remainder = sym.values - sum(
            c * e for c, e in zip(coefficients[:, j], basis.fields, strict=True)
        )
        errors.append(geom.norm(remainder) / sym.norm)
    return SymmetryCoefficients(
        names=[f.name for f in kept],
        coefficients=coefficients,
        projection_errors=errors,
        vanishing=[f.name for f in fields if f.vanishing],
    )


def spectrum_report(
    matrix: np.ndarray,
    symmetry: SymmetryCoefficients | None = None,
    basis_labels: list[str] | None = None,
    tol: float = 1e-6,
) -> SpectrumReport:
    """Eigen-decomposition with near-kernel detection and symmetry comparison.

    The near-kernel collects eigenvalues with ``|lambda| <= tol max|lambda|``.
    Principal angles compare the span of the symmetry coefficients with the
    near-kernel eigenvectors; a missing kernel gives right angles.
    """
    matrix = np.asarray(matrix, dtype=float)
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    near_kernel = np.flatnonzero(np.abs(eigenvalues) <= tol * scale)
    transverse = np.setdiff1d(np.arange(eigenvalues.size), near_kernel)

    smallest = float(eigenvalues[transverse].min()) if transverse.size else None
    negative = int(np.count_nonzero(eigenvalues[transverse] < 0.0))

    angles = np.zeros(0)
    quotients = {}
    if symmetry is not None and symmetry.coefficients.shape[1]:
        span = symmetry.coefficients
        if near_kernel.size:
            angles = scipy.linalg.subspace_angles(span, eigenvectors[:, near_kernel])
        else:
            angles = np.full(span.shape[1], 0.5 * np.pi)
        for name, c in zip(symmetry.names, span.T, strict=True):
            norm_sq = float(c @ c)
            quotients[name] = float(c @ matrix @ c) / norm_sq if norm_sq else 0.0

    report = SpectrumReport(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        tol=tol,
        near_kernel=near_kernel,
        principal_angles=np.sort(np.asarray(angles)),
        smallest_transverse_eigenvalue=smallest,
        negative_transverse=negative,
        symmetry_rayleigh_quotients=quotients,
        symmetry=symmetry,
        basis_labels=list(basis_labels or []),
    )
    logger.info(
        f"Spectrum: {eigenvalues.size} eigenvalues, near-kernel dimension "
        f"{report.near_kernel_dimension}, smallest transverse {smallest}"
    )
    return report


def analyze_spectrum(
    geom: GeometryState,
    params: PhysicsParams,
    basis_spec: BasisSpec,
    tol: float = 1e-6,
    area_only: bool = False,
    include_conformal: bool = False,
) -> SpectrumReport:
    """Assemble, decompose and compare with the Euclidean symmetry fields."""
    hessian = assemble_hessian(geom, params, basis_spec, area_only)
    fields = symmetry_fields(geom, include_conformal=False)
    symmetry = symmetry_coefficients(geom, hessian.basis, fields)
    report = spectrum_report(hessian.matrix, symmetry, hessian.basis.labels, tol)
    extra = {
        "max_asymmetry": hessian.max_asymmetry,
        "helfrich_residual": hessian.helfrich_residual,
        "dropped_directions": hessian.basis.dropped,
        "warnings": hessian.warnings,
    }
    if include_conformal:
        conformal = [
            f for f in symmetry_fields(geom, include_conformal=True) if f.family == "conformal"
        ]
        extended = symmetry_coefficients(geom, hessian.basis, conformal)
        extra["conformal_rayleigh_quotients"] = {
            name: float(c @ hessian.matrix @ c) / float(c @ c) if c @ c else 0.0
            for name, c in zip(extended.names, extended.coefficients.T, strict=True)
        }
        extra["conformal_projection_errors"] = dict(
            zip(extended.names, extended.projection_errors, strict=True)
        )
    report.extra.update(extra)
    return report
