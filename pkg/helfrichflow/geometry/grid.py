"""Structured parametric grids with spectral differentiation and quadrature.

Torus grids are doubly periodic: both directions use uniform nodes, FFT
differentiation and the trapezoidal rule.

Sphere grids use offset polar nodes ``u_j = (j + 1/2) pi / n_u`` so that no
node sits on a pole. A scalar field (or a Cartesian component of a vector
field) is continued across the poles by the double Fourier sphere reflection
``f(2 pi - u, v + pi) = f(u, v)``, which makes it smooth and periodic on a
``2 n_u x n_v`` grid, where it is differentiated by FFT. Quadrature in ``u`` is
Fejér's first rule divided by ``sin u``; integrands always carry the area
density, which contains that factor.
"""

import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from helfrichflow.const import AXISYMMETRIC_N_V
from helfrichflow.const import MIN_RESOLUTION
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import SurfaceKind
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridMismatchError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridResolutionError,
)

logger = logging.getLogger(__name__)


def fejer_weights(n: int) -> np.ndarray:
    """Fejér first-rule weights for ``int_{-1}^{1} f(x) dx`` at ``x = cos u_j``."""
    theta = (np.arange(n) + 0.5) * np.pi / n
    k = np.arange(1, n // 2 + 1)
    series = np.cos(2.0 * np.outer(theta, k)) / (4.0 * k**2 - 1.0)
    return 2.0 / n * (1.0 - 2.0 * series.sum(axis=1))


def _spectral_factor(k: np.ndarray, order: int, n: int) -> np.ndarray:
    factor = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        factor = factor.copy()
        factor[np.abs(k) == n // 2] = 0.0
    return factor


@dataclass(frozen=True, eq=False)
class Grid:
    kind: SurfaceKind
    n_u: int
    n_v: int
    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    axisymmetric: bool = False
    periodic: tuple[bool, bool] = (True, True)
    pole_handling: str | None = None
    _ku: np.ndarray = field(init=False, repr=False)
    _kv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n_ext = self.n_u_extended
        object.__setattr__(self, "_ku", np.fft.fftfreq(n_ext, 1.0 / n_ext))
        object.__setattr__(self, "_kv", np.fft.rfftfreq(self.n_v, 1.0 / self.n_v))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_u, self.n_v)

    @property
    def n_u_extended(self) -> int:
        return 2 * self.n_u if self.pole_handling else self.n_u

    @property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u, self.v, indexing="ij")

    def same_as(self, other: "Grid") -> bool:
        return (
            self.kind is other.kind
            and self.shape == other.shape
            and self.axisymmetric == other.axisymmetric
        )

    def check_field(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-2:] != self.shape:
            raise GridMismatchError(
                f"{name} has trailing shape {f.shape[-2:]}, grid is {self.shape}"
            )
        return f

    def _extend(self, f: np.ndarray) -> np.ndarray:
        if not self.pole_handling:
            return f
        mirrored = np.roll(f[..., ::-1, :], self.n_v // 2, axis=-1)
        return np.concatenate([f, mirrored], axis=-2)

    def spectrum(self, f: np.ndarray) -> np.ndarray:
        """Forward transform of a smooth scalar field (after pole reflection)."""
        return np.fft.rfft2(self._extend(self.check_field(f)), axes=(-2, -1))

    def from_spectrum(self, coefficients: np.ndarray, du: int = 0, dv: int = 0):
        factor = np.outer(
            _spectral_factor(self._ku, du, self.n_u_extended),
            _spectral_factor(self._kv, dv, self.n_v),
        )
        values = np.fft.irfft2(
            coefficients * factor,
            s=(self.n_u_extended, self.n_v),
            axes=(-2, -1),
        )
        return values[..., : self.n_u, :]

    def derivative(self, f: np.ndarray, du: int = 0, dv: int = 0) -> np.ndarray:
        return self.from_spectrum(self.spectrum(f), du, dv)

    def derivatives(self, f: np.ndarray, max_order: int) -> dict:
        """All partial derivatives ``(du, dv)`` with ``du + dv <= max_order``."""
        coefficients = self.spectrum(f)
        return {
            (du, order - du): self.from_spectrum(coefficients, du, order - du)
            for order in range(1, max_order + 1)
            for du in range(order, -1, -1)
        }

    def gradient(self, f: np.ndarray) -> np.ndarray:
        coefficients = self.spectrum(f)
        return np.stack(
            [self.from_spectrum(coefficients, 1, 0), self.from_spectrum(coefficients, 0, 1)]
        )

    def integrate_density(self, density: np.ndarray) -> np.ndarray:
        """Quadrature of ``density du dv`` over the parameter domain."""
        density = self.check_field(density)
        return np.sum(density * self.weights, axis=(-2, -1))

    def azimuthal_mean(self, f: np.ndarray) -> np.ndarray:
        f = self.check_field(f)
        return np.broadcast_to(f.mean(axis=-1, keepdims=True), f.shape).copy()

    def u_derivative_matrix(self, order: int, parity: int = 1) -> np.ndarray:
        """Dense ``u``-differentiation matrix for one azimuthal Fourier mode.

        On the sphere ``parity`` is ``(-1)^m`` for azimuthal wavenumber ``m``:
        the pole reflection shifts ``v`` by ``pi``.
        """
        n_ext = self.n_u_extended
        identity = np.eye(self.n_u)
        if self.pole_handling:
            columns = np.concatenate([identity, parity * identity[::-1]], axis=0)
        else:
            columns = identity
        factor = _spectral_factor(self._ku, order, n_ext)
        derived = np.fft.ifft(factor[:, None] * np.fft.fft(columns, axis=0), axis=0)
        return derived.real[: self.n_u]

    def pole_values(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Trigonometric interpolation of ``f`` to ``u = 0`` and ``u = pi``."""
        if not self.pole_handling:
            raise GridMismatchError("Pole values exist only on sphere grids")
        extended = self._extend(self.check_field(f))
        n_ext = self.n_u_extended
        coefficients = np.fft.fft(extended, axis=-2) / n_ext
        k = self._ku.reshape(-1, 1)
        u0 = self.u[0]
        north = np.real(np.sum(coefficients * np.exp(-1j * k * u0), axis=-2))
        south = np.real(np.sum(coefficients * np.exp(1j * k * (np.pi - u0)), axis=-2))
        return north.mean(axis=-1), south.mean(axis=-1)


def sample_grid(
    surface: ReferenceSurface,
    n_u: int,
    n_v: int,
    axisymmetric: bool = False,
) -> Grid:
    """Sample a quadrature-equipped parametric grid on ``surface``.

    Axisymmetric grids ignore ``n_v`` and keep ``AXISYMMETRIC_N_V`` azimuthal
    nodes; fields on them are expected to be independent of ``v``.

    Raises:
        GridResolutionError: resolution below the stencil minimum or an odd
            resolution where the pole reflection or Nyquist handling needs an
            even one.
    """
    if axisymmetric and n_v != AXISYMMETRIC_N_V:
        logger.debug(f"Axisymmetric grid: using n_v={AXISYMMETRIC_N_V} instead of {n_v}")
        n_v = AXISYMMETRIC_N_V
    if n_u < MIN_RESOLUTION or n_v < MIN_RESOLUTION:
        raise GridResolutionError(
            f"Grid {n_u}x{n_v} is below the minimum resolution {MIN_RESOLUTION}"
        )
    if n_v % 2 or n_u % 2:
        raise GridResolutionError(f"Grid {n_u}x{n_v} must have even resolutions")

    v = 2.0 * np.pi * np.arange(n_v) / n_v
    if surface.kind is SurfaceKind.SPHERE:
        u = (np.arange(n_u) + 0.5) * np.pi / n_u
        u_weights = fejer_weights(n_u) / np.sin(u)
        periodic = (False, True)
        pole_handling = "double-fourier"
    else:
        u = 2.0 * np.pi * np.arange(n_u) / n_u
        u_weights = np.full(n_u, 2.0 * np.pi / n_u)
        periodic = (True, True)
        pole_handling = None
    weights = np.outer(u_weights, np.full(n_v, 2.0 * np.pi / n_v))

    return Grid(
        kind=surface.kind,
        n_u=n_u,
        n_v=n_v,
        u=u,
        v=v,
        weights=weights,
        axisymmetric=axisymmetric,
        periodic=periodic,
        pole_handling=pole_handling,
    )
