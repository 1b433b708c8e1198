"""Identity and oracle suites for the geometry, energy, Hessian and constraints.

Every check returns a :class:`CheckResult`; a suite never raises on a failed
comparison, only on configuration problems.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.perturbation import random_smooth_field
from helfrichflow.geometry.perturbation import real_spherical_harmonic
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import SurfaceKind
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError
from helfrichflow.progress_monitor import DummyRunStage
from helfrichflow.variational.constraints import constraint_normals
from helfrichflow.variational.constraints import project_tangent
from helfrichflow.variational.constraints import restore_constraints
from helfrichflow.variational.energy import ComponentTargets
from helfrichflow.variational.energy import PhysicsParams
from helfrichflow.variational.energy import area
from helfrichflow.variational.energy import chart_differential
from helfrichflow.variational.energy import enclosed_volume
from helfrichflow.variational.energy import energy
from helfrichflow.variational.energy import helfrich_residual
from helfrichflow.variational.energy import l2_gradient
from helfrichflow.variational.hessian import hessian_coefficients
from helfrichflow.variational.hessian import linearized_gradient
from helfrichflow.variational.hessian import material_derivatives
from helfrichflow.variational.hessian import second_variation
from helfrichflow.verification.oracles import epsilon_sweep
from helfrichflow.verification.oracles import normal_path_geometry
from helfrichflow.verification.oracles import torus_laplacian_stencil

logger = logging.getLogger(__name__)

SUITES = ("geometry", "energy", "hessian", "constraints")

# Perturbed checks run at this fraction of the reach.
PERTURBED_AMPLITUDE = 0.1

FIRST_DERIVATIVE_RTOL = 1e-5
LINEARIZED_GRADIENT_RTOL = 1e-4
SECOND_VARIATION_RTOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass(frozen=True, eq=False)
class VerificationContext:
    surface: ReferenceSurface
    grid: Grid
    params: PhysicsParams
    samples: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError(f"verify.samples must be at least 1, got {self.samples}")

    @property
    def is_sphere(self) -> bool:
        return self.surface.kind is SurfaceKind.SPHERE

    def directions(self) -> list[np.ndarray]:
        return [
            random_smooth_field(self.surface, self.grid, seed=self.seed + 1 + i)
            for i in range(self.samples)
        ]

    def reference_height(self) -> HeightField:
        return HeightField.zeros(self.surface, self.grid)

    def perturbed_height(self) -> HeightField:
        shape = random_smooth_field(self.surface, self.grid, seed=self.seed)
        return HeightField(
            self.surface,
            self.grid,
            PERTURBED_AMPLITUDE * self.surface.reach * shape,
        )

    def base_points(self) -> list[tuple[str, HeightField]]:
        return [("h=0", self.reference_height()), ("h!=0", self.perturbed_height())]


class _PathCache:
    """Memoised geometries along the straight normal path of ``geom``."""

    def __init__(self, surface: ReferenceSurface, geom: GeometryState, w: np.ndarray):
        self.surface = surface
        self.geom = geom
        self.w = w
        self.cache = {}

    def __call__(self, eps: float) -> GeometryState:
        if eps == 0.0:
            return self.geom
        if eps not in self.cache:
            self.cache[eps] = normal_path_geometry(self.surface, self.geom, self.w, eps)
        return self.cache[eps]

    def of(self, extract: Callable[[GeometryState], np.ndarray]):
        return lambda eps: extract(self(eps))


def _relative_max(actual, expected) -> float:
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = float(np.max(np.abs(expected)))
    return float(np.max(np.abs(actual - expected))) / (scale if scale > 0 else 1.0)


def _compare(suite, name, value, tol, detail="") -> CheckResult:
    passed = bool(np.isfinite(value) and value <= tol)
    return CheckResult(suite, name, passed, float(value), tol, detail)


def _sweep_check(suite, name, sweep, tol) -> CheckResult:
    return CheckResult(
        suite, name, sweep.passes(tol), sweep.best_error, tol, sweep.describe()
    )


def geometry_suite(ctx: VerificationContext) -> list[CheckResult]:
    suite = "geometry"
    surface, grid = ctx.surface, ctx.grid
    u, v = grid.mesh
    results = []

    reference = pullback_geometry(ctx.reference_height())
    analytic = {
        "metric": (reference.metric, surface.metric(u, v)),
        "curvature": (reference.curvature, surface.second_fundamental_form(u, v)),
        "mean-curvature": (reference.mean_curvature, surface.mean_curvature(u, v)),
        "gauss-curvature": (reference.gauss_curvature, surface.gauss_curvature(u, v)),
    }
    for name, (computed, expected) in analytic.items():
        results.append(
            _compare(suite, f"reference-{name}", _relative_max(computed, expected), 1e-10)
        )

    perturbed = pullback_geometry(ctx.perturbed_height())
    gauss_bonnet = 2.0 * np.pi * surface.euler_characteristic
    total_curvature = perturbed.integrate(perturbed.gauss_curvature)
    results.append(
        _compare(
            suite,
            "gauss-bonnet",
            abs(total_curvature - gauss_bonnet) / (4.0 * np.pi),
            1e-7,
            f"int K dA = {total_curvature:.12g}",
        )
    )

    balance = np.array(
        [perturbed.integrate(perturbed.mean_curvature * n) for n in perturbed.normal]
    )
    results.append(
        _compare(
            suite,
            "mean-curvature-balance",
            float(np.max(np.abs(balance))) / area(perturbed),
            1e-8,
        )
    )

    results.append(
        _compare(
            suite,
            "laplacian-constant",
            float(np.max(np.abs(perturbed.laplacian(np.ones(grid.shape))))),
            1e-8,
        )
    )

    if ctx.is_sphere:
        f = np.cos(u)
        expected = -2.0 * f / surface.radius**2
        results.append(
            _compare(
                suite,
                "laplacian-eigenfunction",
                _relative_max(reference.laplacian(f), expected),
                1e-10,
            )
        )
        offset = 0.2 * surface.radius
        shell = pullback_geometry(ctx.reference_height().with_values(np.full(grid.shape, offset)))
        radius = surface.radius + offset
        results.append(
            _compare(
                suite,
                "offset-sphere-area-volume",
                max(
                    abs(area(shell) / (4.0 * np.pi * radius**2) - 1.0),
                    abs(enclosed_volume(shell) / (4.0 * np.pi * radius**3 / 3.0) - 1.0),
                ),
                1e-10,
            )
        )
    else:

        def f(x, y):
            return np.sin(2.0 * x) + 0.5 * np.cos(x - y)

        expected = torus_laplacian_stencil(surface, f, u, v)
        results.append(
            _compare(
                suite,
                "laplacian-stencil",
                _relative_max(reference.laplacian(f(u, v)), expected),
                1e-6,
            )
        )
        results.append(
            _compare(
                suite,
                "reference-gauss-bonnet",
                abs(reference.integrate(reference.gauss_curvature)),
                1e-10,
            )
        )
    return results


def energy_suite(ctx: VerificationContext) -> list[CheckResult]:
    suite = "energy"
    surface, params = ctx.surface, ctx.params
    results = []

    reference = pullback_geometry(ctx.reference_height())
    kappa, c0 = params.kappa, params.c0
    if ctx.is_sphere:
        expected = 2.0 * np.pi * kappa * surface.radius**2 * (2.0 / surface.radius + c0) ** 2
    else:
        a, r = surface.major, surface.minor
        expected = 0.5 * kappa * (
            4.0 * np.pi**2 * a**2 / (r * np.sqrt(a**2 - r**2))
            + 8.0 * np.pi**2 * a * c0
            + 4.0 * np.pi**2 * a * r * c0**2
        )
    computed = energy(reference, params)
    results.append(
        _compare(
            suite,
            "reference-energy",
            abs(computed - expected) / abs(expected) if expected else abs(computed),
            1e-9,
            f"F = {computed:.12g}, analytic {expected:.12g}",
        )
    )

    if ctx.is_sphere:
        fit = helfrich_residual(reference, params)
        results.append(_compare(suite, "sphere-helfrich-residual", fit.residual_norm, 1e-10))

    directions = ctx.directions()
    for label, height in ctx.base_points():
        geom = pullback_geometry(height)
        gradient = l2_gradient(geom, params)
        f0 = energy(geom, params)
        for i, w in enumerate(directions):
            path = _PathCache(surface, geom, w)
            exact = geom.inner(gradient, w)
            sweep = epsilon_sweep(path.of(lambda g: energy(g, params)), exact, scale=f0)
            results.append(
                _sweep_check(suite, f"gradient-fd[{label}, w{i}]", sweep, FIRST_DERIVATIVE_RTOL)
            )

        w = directions[0]
        path = _PathCache(surface, geom, w)
        exact_area = geom.inner(-geom.mean_curvature, w)
        exact_volume = geom.integrate(w)
        area_sweep = epsilon_sweep(path.of(area), exact_area, scale=area(geom))
        volume_sweep = epsilon_sweep(
            path.of(enclosed_volume), exact_volume, scale=enclosed_volume(geom)
        )
        results.append(_sweep_check(suite, f"area-differential[{label}]", area_sweep, 1e-6))
        results.append(
            _sweep_check(suite, f"volume-differential[{label}]", volume_sweep, 1e-6)
        )

        def chart_energy(eps, height=height, w=w):
            return energy(pullback_geometry(height.with_values(height.values + eps * w)), params)

        sweep = epsilon_sweep(chart_energy, chart_differential(geom, gradient, w), scale=f0)
        results.append(
            _sweep_check(suite, f"chart-differential[{label}]", sweep, FIRST_DERIVATIVE_RTOL)
        )
    return results


def _material_fields(geom: GeometryState) -> dict[str, np.ndarray]:
    return {
        "metric": geom.metric,
        "metric_inv": geom.metric_inv,
        "curvature": geom.curvature,
        "curvature_raised": geom.curvature_raised,
        "area_density": geom.sqrt_g,
        "mean_curvature": geom.mean_curvature,
        "gauss_curvature": geom.gauss_curvature,
        "christoffel": geom.christoffel,
        "laplacian_mean_curvature": geom.laplacian(geom.mean_curvature),
    }


def hessian_suite(ctx: VerificationContext) -> list[CheckResult]:
    suite = "hessian"
    surface, params = ctx.surface, ctx.params
    results = []
    directions = ctx.directions()
    w = directions[0]
    w_other = directions[1] if len(directions) > 1 else np.roll(w, 1, axis=0)

    for label, height in ctx.base_points():
        geom = pullback_geometry(height)
        path = _PathCache(surface, geom, w)
        exact = material_derivatives(geom, w).as_dict()
        for name, expected in exact.items():
            sweep = epsilon_sweep(path.of(lambda g, name=name: _material_fields(g)[name]), expected)
            results.append(
                _sweep_check(suite, f"material-{name}[{label}]", sweep, FIRST_DERIVATIVE_RTOL)
            )

        coefficients = hessian_coefficients(geom, params)
        sweep = epsilon_sweep(
            path.of(lambda g: l2_gradient(g, params)),
            linearized_gradient(geom, params, w, coefficients),
        )
        results.append(
            _sweep_check(suite, f"linearized-gradient[{label}]", sweep, LINEARIZED_GRADIENT_RTOL)
        )

        sweep = epsilon_sweep(
            path.of(lambda g: energy(g, params)),
            second_variation(geom, params, w, w, coefficients),
            second=True,
        )
        results.append(
            _sweep_check(suite, f"second-variation[{label}]", sweep, SECOND_VARIATION_RTOL)
        )

        forward = second_variation(geom, params, w, w_other, coefficients)
        backward = second_variation(geom, params, w_other, w, coefficients)
        results.append(
            _compare(
                suite,
                f"second-variation-symmetry[{label}]",
                abs(forward - backward) / max(abs(forward), abs(backward), 1e-300),
                1e-12,
            )
        )

        expected_b = coefficients.b_tilde - geom.mean_curvature * l2_gradient(geom, params) / params.kappa
        results.append(
            _compare(
                suite,
                f"curvature-flux-identity[{label}]",
                _relative_max(coefficients.b, expected_b),
                1e-6,
            )
        )

    if ctx.is_sphere and params.c0 == 0.0:
        geom = pullback_geometry(ctx.reference_height())
        u, v = ctx.grid.mesh
        translation = np.cos(u)
        reference_mode = real_spherical_harmonic(2, 0, u, v)
        scale = abs(second_variation(geom, params, reference_mode, reference_mode))
        value = abs(second_variation(geom, params, translation, translation)) / scale
        results.append(_compare(suite, "translation-null-direction", value, 1e-8))
        drift = linearized_gradient(geom, params, translation)
        results.append(
            _compare(
                suite,
                "translation-linearized-gradient",
                geom.norm(drift) / geom.norm(linearized_gradient(geom, params, reference_mode)),
                1e-8,
            )
        )
    return results


def constraints_suite(ctx: VerificationContext) -> list[CheckResult]:
    suite = "constraints"
    surface, grid = ctx.surface, ctx.grid
    results = []
    reference_targets = ComponentTargets(surface.area(), surface.enclosed_volume())
    area_only = reference_targets.round_sphere

    for label, height in ctx.base_points():
        geom = pullback_geometry(height)
        normals = constraint_normals(geom, area_only)
        worst_idempotence = 0.0
        worst_orthogonality = 0.0
        for w in ctx.directions():
            projected = project_tangent(geom, w, area_only)
            twice = project_tangent(geom, projected, area_only)
            norm_w = geom.norm(w)
            worst_idempotence = max(worst_idempotence, geom.norm(twice - projected) / norm_w)
            for n in normals:
                worst_orthogonality = max(
                    worst_orthogonality,
                    abs(geom.inner(projected, n)) / (norm_w * geom.norm(n)),
                )
        results.append(
            _compare(suite, f"projection-idempotent[{label}]", worst_idempotence, 1e-12)
        )
        results.append(
            _compare(suite, f"projection-integrals[{label}]", worst_orthogonality, 1e-10)
        )

    restored = restore_constraints(ctx.perturbed_height(), reference_targets)
    restored_geom = pullback_geometry(restored)
    area_error = abs(area(restored_geom) / reference_targets.area - 1.0)
    volume_error = abs(enclosed_volume(restored_geom) / reference_targets.volume - 1.0)
    results.append(
        _compare(
            suite,
            "restore-perturbed",
            area_error if area_only else max(area_error, volume_error),
            1e-10,
            f"area error {area_error:.2e}, volume error {volume_error:.2e}",
        )
    )

    fixed = restore_constraints(restored, reference_targets)
    results.append(
        _compare(
            suite,
            "restore-fixed-point",
            float(np.max(np.abs(fixed.values - restored.values))),
            0.0,
        )
    )

    if ctx.is_sphere:
        offset = ctx.reference_height().with_values(np.full(grid.shape, 0.1 * surface.radius))
        back = restore_constraints(offset, reference_targets)
        results.append(
            _compare(
                suite,
                "restore-offset-sphere",
                float(np.max(np.abs(back.values))) / surface.radius,
                1e-9,
            )
        )
    return results


SUITE_RUNNERS = {
    "geometry": geometry_suite,
    "energy": energy_suite,
    "hessian": hessian_suite,
    "constraints": constraints_suite,
}


def run_suites(
    ctx: VerificationContext,
    names: list[str] | None = None,
    stage=None,
) -> list[CheckResult]:
    """Run the named suites in order; ``stage`` advances once per suite."""
    names = list(names or SUITES)
    unknown = [name for name in names if name not in SUITE_RUNNERS]
    if unknown:
        raise ConfigError(f"Unknown verification suites: {', '.join(unknown)}")
    if stage is None:
        stage = DummyRunStage("verify", len(names))
    results = []
    for name in names:
        logger.info(f"Running {name} suite")
        suite_results = SUITE_RUNNERS[name](ctx)
        failed = [r.name for r in suite_results if not r.passed]
        if failed:
            logger.warning(f"{name}: {len(failed)} failed checks: {', '.join(failed)}")
        results.extend(suite_results)
        stage.advance()
    return results
