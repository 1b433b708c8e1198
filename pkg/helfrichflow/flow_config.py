"""Validated run configuration and the TOML reader behind ``--config``."""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Literal

import configargparse
import toml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeFloat
from pydantic import NonNegativeInt
from pydantic import PositiveFloat
from pydantic import PositiveInt
from pydantic import model_validator

from helfrichflow.const import DEFAULT_OUTPUT_DIR
from helfrichflow.const import MIN_RESOLUTION
from helfrichflow.dynamics.flow import FlowSettings
from helfrichflow.dynamics.mobility import MobilitySpec
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.perturbation import make_perturbation
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.spectra.basis import BasisSpec
from helfrichflow.variational.energy import PhysicsParams

logger = logging.getLogger(__name__)


def _merge(base: dict, override: dict):
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


class NestedTomlConfigParser(configargparse.ConfigFileParser):
    """Flatten TOML tables and dotted keys into ``section.key`` settings.

    ``[surface]\\nkind = "torus"`` and ``surface.kind = "torus"`` both become
    the ``surface.kind`` setting. Keys of the optional root tables are merged
    over the top level.
    """

    def __init__(self, root_tables: list[str] | None = None):
        super().__init__()
        self.root_tables = root_tables or ["helfrichflow"]

    def __call__(self):
        # configargparse instantiates the parser class it is given
        return self

    def get_syntax_description(self):
        return (
            "Config files are TOML. Settings may be grouped in tables such as "
            "[surface] or written as dotted keys such as surface.kind."
        )

    def parse(self, stream):
        try:
            data = toml.load(stream)
        except toml.TomlDecodeError as e:
            raise configargparse.ConfigFileParserException(
                f"Couldn't parse TOML config file: {e}"
            ) from e
        for table in self.root_tables:
            root = data.pop(table, None)
            if isinstance(root, dict):
                _merge(data, root)

        result = OrderedDict()
        self._flatten(data, "", result)
        return result

    def _flatten(self, data: dict, prefix: str, result: OrderedDict):
        for key, value in data.items():
            name = f"{prefix}{key}"
            if isinstance(value, dict):
                self._flatten(value, f"{name}.", result)
            elif value is None:
                continue
            elif isinstance(value, bool):
                result[name] = "true" if value else "false"
            elif isinstance(value, list):
                result[name] = [str(x) for x in value]
            else:
                result[name] = str(value)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SurfaceSection(_Section):
    kind: Literal["sphere", "torus"] = "sphere"
    radius: PositiveFloat = 1.0
    major: PositiveFloat = 2.0
    minor: PositiveFloat = 0.5


class GridSection(_Section):
    n_u: PositiveInt = 32
    n_v: PositiveInt = 32
    axisymmetric: bool = False


class PhysicsSection(_Section):
    kappa: PositiveFloat = 1.0
    c0: float = 0.0


class PerturbationSection(_Section):
    mode: Literal["none", "harmonic", "fourier", "random"] = "none"
    amplitude: NonNegativeFloat = 0.0
    degree: NonNegativeInt = 2
    order: int = 0
    seed: int = 0


class ConstraintsSection(_Section):
    targets: Literal["reference", "initial"] = "reference"


class FlowSection(_Section):
    mobility: Literal["l2", "h-1"] = "l2"
    mobility_length: PositiveFloat = 1.0
    dt0: PositiveFloat = 1e-3
    dt_max: PositiveFloat | None = None
    dt_growth: float = Field(default=1.0, ge=1.0)
    t_end: PositiveFloat = 1.0
    grad_tol: PositiveFloat = 1e-6
    max_steps: PositiveInt = 1000
    max_halvings: NonNegativeInt = 8
    checkpoint_every: NonNegativeInt = 0
    snapshot_every: NonNegativeInt = 0


class SpectrumSection(_Section):
    max_degree: PositiveInt = 4
    tol: PositiveFloat = 1e-6
    include_conformal: bool = False


class FitSection(_Section):
    f_inf: float | None = None
    min_records: PositiveInt = 20


class VerifySection(_Section):
    samples: PositiveInt = 3
    seed: int = 0
    suites: list[str] = Field(
        default_factory=lambda: ["geometry", "energy", "hessian", "constraints"]
    )


class InputSection(_Section):
    checkpoint: Path | None = None
    ledger: Path | None = None


class OutputSection(_Section):
    dir: Path = DEFAULT_OUTPUT_DIR
    obj: bool = False
    vtk: bool = False
    rich_progress: bool = True


class FlowConfig(BaseModel):
    """Everything one ``helfrichflow`` command needs, validated up front."""

    model_config = ConfigDict(extra="forbid")

    surface: SurfaceSection = Field(default_factory=SurfaceSection)
    grid: GridSection = Field(default_factory=GridSection)
    physics: PhysicsSection = Field(default_factory=PhysicsSection)
    perturbation: PerturbationSection = Field(default_factory=PerturbationSection)
    constraints: ConstraintsSection = Field(default_factory=ConstraintsSection)
    flow: FlowSection = Field(default_factory=FlowSection)
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    fit: FitSection = Field(default_factory=FitSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    input: InputSection = Field(default_factory=InputSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def check_geometry(self):
        if self.surface.kind == "torus" and self.surface.major <= self.surface.minor:
            raise ValueError(
                f"torus major radius {self.surface.major} must exceed the minor "
                f"radius {self.surface.minor}"
            )
        for name in ("n_u", "n_v"):
            n = getattr(self.grid, name)
            if name == "n_v" and self.grid.axisymmetric:
                continue
            if n < MIN_RESOLUTION or n % 2:
                raise ValueError(
                    f"grid.{name} = {n} must be even and at least {MIN_RESOLUTION}"
                )
        if self.flow.dt_max is not None and self.flow.dt_max < self.flow.dt0:
            raise ValueError(
                f"flow.dt_max {self.flow.dt_max} is below flow.dt0 {self.flow.dt0}"
            )
        return self

    @classmethod
    def from_flat(cls, settings: dict) -> "FlowConfig":
        """Build from ``section.key`` settings, e.g. a parsed argument namespace.

        Keys without a dot and ``None`` values are ignored so that section
        defaults apply.
        """
        nested = {}
        for key, value in settings.items():
            if "." not in key or value is None:
                continue
            section, name = key.split(".", 1)
            nested.setdefault(section, {})[name] = value
        return cls.model_validate(nested)

    def reference_surface(self) -> ReferenceSurface:
        return make_reference(
            self.surface.kind,
            radius=self.surface.radius,
            major=self.surface.major,
            minor=self.surface.minor,
        )

    def sample_grid(self, surface: ReferenceSurface | None = None) -> Grid:
        return sample_grid(
            surface or self.reference_surface(),
            self.grid.n_u,
            self.grid.n_v,
            axisymmetric=self.grid.axisymmetric,
        )

    def physics_params(self) -> PhysicsParams:
        return PhysicsParams(kappa=self.physics.kappa, c0=self.physics.c0)

    def mobility_spec(self) -> MobilitySpec:
        return MobilitySpec.from_name(self.flow.mobility, self.flow.mobility_length)

    def flow_settings(self) -> FlowSettings:
        flow = self.flow
        return FlowSettings(
            params=self.physics_params(),
            mobility=self.mobility_spec(),
            dt0=flow.dt0,
            dt_max=flow.dt_max if flow.dt_max is not None else flow.dt0,
            dt_growth=flow.dt_growth,
            t_end=flow.t_end,
            grad_tol=flow.grad_tol,
            max_steps=flow.max_steps,
            max_halvings=flow.max_halvings,
            checkpoint_every=flow.checkpoint_every,
            snapshot_every=flow.snapshot_every,
            targets_from=self.constraints.targets,
        )

    def basis_spec(self) -> BasisSpec:
        return BasisSpec(max_degree=self.spectrum.max_degree)

    def initial_heights(self) -> tuple[HeightField, ...]:
        """Perturbed single-component start; checked for admissibility."""
        surface = self.reference_surface()
        grid = self.sample_grid(surface)
        p = self.perturbation
        values = make_perturbation(
            surface,
            grid,
            mode=p.mode,
            amplitude=p.amplitude,
            degree=p.degree,
            order=p.order,
            seed=p.seed,
        )
        height = HeightField(surface, grid, values)
        height.check_admissible()
        return (height,)

    def get_output_file_path(self, name: str) -> Path:
        self.output.dir.mkdir(parents=True, exist_ok=True)
        return self.output.dir / name
