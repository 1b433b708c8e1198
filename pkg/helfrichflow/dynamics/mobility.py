import enum
import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError

logger = logging.getLogger(__name__)


class MobilityKind(enum.Enum):
    L2 = "l2"
    H_MINUS_ONE = "h-1"


@dataclass(frozen=True)
class MobilitySpec:
    """Dissipation metric standing in for the hydrodynamic one.

    ``L2`` takes ``M^-1 = I``. The ``h-1`` proxy is a screened Laplacian of
    order one, ``M^-1 = I - length^2 Delta_g``, so that velocities solve
    ``(I - length^2 Delta_g) w = -grad F``.
    """

    kind: MobilityKind = MobilityKind.L2
    length: float = 0.0
    order: int = 1

    def __post_init__(self):
        if self.kind is MobilityKind.H_MINUS_ONE and not self.length > 0:
            raise ConfigError(
                f"h-1 mobility needs a positive length scale, got {self.length}"
            )
        if self.order != 1:
            raise ConfigError(f"Only smoothing order 1 is supported, got {self.order}")

    @classmethod
    def from_name(cls, name: str, length: float = 0.0) -> "MobilitySpec":
        try:
            kind = MobilityKind(name)
        except ValueError as e:
            raise ConfigError(f"Unknown mobility: {name}") from e
        if kind is MobilityKind.L2:
            return cls(kind)
        return cls(kind, float(length))

    @property
    def screening(self) -> float:
        """Coefficient ``length^2`` of ``-Delta_g`` in ``M^-1``."""
        if self.kind is MobilityKind.L2:
            return 0.0
        return self.length**2

    def apply_inverse(self, geom: GeometryState, w) -> np.ndarray:
        w = geom.check_field(w)
        if self.kind is MobilityKind.L2:
            return w.copy()
        return w - self.screening * geom.laplacian(w)

    def dissipation(self, geom: GeometryState, w) -> float:
        """``<w, M^-1 w>`` written as ``int w^2 + length^2 |grad w|^2 dA``."""
        w = geom.check_field(w)
        density = w**2
        if self.screening:
            density = density + self.screening * geom.gradient_norm_sq(w)
        return geom.integrate(density)

    def rayleigh_quotient(self, geom: GeometryState, w) -> float:
        return self.dissipation(geom, w) / geom.inner(w, w)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "length": self.length, "order": self.order}
