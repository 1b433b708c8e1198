import numpy as np
import pytest

from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.geometry.graphgeom import reference_geometry
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.perturbation import random_smooth_field
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError
from helfrichflow.variational.energy import ComponentTargets
from helfrichflow.variational.energy import ConstraintTargets
from helfrichflow.variational.energy import PhysicsParams
from helfrichflow.variational.energy import area
from helfrichflow.variational.energy import area_volume
from helfrichflow.variational.energy import chart_differential
from helfrichflow.variational.energy import constraint_differentials
from helfrichflow.variational.energy import enclosed_volume
from helfrichflow.variational.energy import energy
from helfrichflow.variational.energy import helfrich_residual
from helfrichflow.variational.energy import l2_gradient
from helfrichflow.variational.energy import total_energy
from helfrichflow.verification.oracles import epsilon_sweep


@pytest.fixture(scope="module")
def sphere():
    return make_reference("sphere", radius=1.0)


@pytest.fixture(scope="module")
def sphere_grid(sphere):
    return sample_grid(sphere, 16, 16)


class TestEnergy:
    def test_unit_sphere(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        assert energy(geom, PhysicsParams()) == pytest.approx(8 * np.pi, rel=1e-10)

    def test_spontaneous_curvature_matching_sphere(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        assert energy(geom, PhysicsParams(c0=-2.0)) == pytest.approx(0.0, abs=1e-9)

    def test_sphere_energy_formula(self):
        surface = make_reference("sphere", radius=2.0)
        geom = reference_geometry(surface, sample_grid(surface, 16, 16))
        params = PhysicsParams(kappa=0.5, c0=0.3)
        expected = 2 * np.pi * params.kappa * 4.0 * (2.0 / 2.0 + params.c0) ** 2
        assert energy(geom, params) == pytest.approx(expected, rel=1e-10)

    def test_scale_invariance_without_spontaneous_curvature(self):
        surface = make_reference("sphere", radius=3.0)
        geom = reference_geometry(surface, sample_grid(surface, 16, 16))
        assert energy(geom, PhysicsParams()) == pytest.approx(8 * np.pi, rel=1e-10)

    def test_clifford_torus(self):
        surface = make_reference("torus", major=np.sqrt(2.0), minor=1.0)
        geom = reference_geometry(surface, sample_grid(surface, 32, 16))
        assert energy(geom, PhysicsParams()) == pytest.approx(4 * np.pi**2, rel=1e-9)

    def test_torus_formula_with_spontaneous_curvature(self):
        a, r, c0 = 2.0, 0.5, 0.4
        surface = make_reference("torus", major=a, minor=r)
        geom = reference_geometry(surface, sample_grid(surface, 32, 16))
        expected = 0.5 * (
            4 * np.pi**2 * a**2 / (r * np.sqrt(a**2 - r**2))
            + 8 * np.pi**2 * a * c0
            + 4 * np.pi**2 * a * r * c0**2
        )
        assert energy(geom, PhysicsParams(c0=c0)) == pytest.approx(expected, rel=1e-9)

    def test_total_energy_sums_components(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        summary = total_energy([geom, geom], PhysicsParams())
        assert summary.total == pytest.approx(16 * np.pi, rel=1e-10)

    def test_rejects_non_positive_rigidity(self):
        with pytest.raises(ConfigError):
            PhysicsParams(kappa=0.0)


class TestGradient:
    def test_sphere_is_critical(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        np.testing.assert_allclose(l2_gradient(geom, PhysicsParams()), 0.0, atol=1e-9)

    def test_sphere_with_spontaneous_curvature(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        np.testing.assert_allclose(l2_gradient(geom, PhysicsParams(c0=0.5)), 1.25, atol=1e-9)

    def test_matches_finite_differences_on_torus(self):
        surface = make_reference("torus", major=2.0, minor=0.5)
        grid = sample_grid(surface, 24, 24)
        params = PhysicsParams(c0=0.2)
        height = HeightField(surface, grid, 0.05 * random_smooth_field(surface, grid, seed=3))
        direction = random_smooth_field(surface, grid, seed=4)
        geom = pullback_geometry(height)
        exact = chart_differential(geom, l2_gradient(geom, params), direction)

        def path(eps):
            return energy(pullback_geometry(height.with_values(height.values + eps * direction)), params)

        sweep = epsilon_sweep(path, exact, scale=energy(geom, params))
        assert sweep.passes(1e-5), sweep.describe()


class TestConstraints:
    def test_offset_sphere_area_volume(self, sphere, sphere_grid):
        height = HeightField(sphere, sphere_grid, np.full(sphere_grid.shape, 0.5))
        a, v = area_volume(height)
        assert a == pytest.approx(9 * np.pi, rel=1e-10)
        assert v == pytest.approx(4.5 * np.pi, rel=1e-10)

    def test_torus_area_volume(self):
        surface = make_reference("torus", major=2.0, minor=0.5)
        geom = reference_geometry(surface, sample_grid(surface, 16, 16))
        assert area(geom) == pytest.approx(surface.area(), rel=1e-12)
        assert enclosed_volume(geom) == pytest.approx(surface.enclosed_volume(), rel=1e-12)

    def test_sphere_differentials(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        differentials = constraint_differentials(geom)
        u, _ = sphere_grid.mesh
        assert geom.integrate(differentials.area) == pytest.approx(8 * np.pi, rel=1e-10)
        assert geom.integrate(differentials.volume) == pytest.approx(4 * np.pi, rel=1e-10)
        assert geom.inner(differentials.area, np.cos(u)) == pytest.approx(0.0, abs=1e-10)
        assert geom.inner(differentials.volume, np.cos(u)) == pytest.approx(0.0, abs=1e-10)

    def test_helfrich_residual_on_sphere(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        fit = helfrich_residual(geom, PhysicsParams(c0=0.5))
        assert fit.rank == 1
        assert fit.residual_norm == pytest.approx(0.0, abs=1e-8)

    def test_helfrich_residual_on_perturbed_torus(self):
        surface = make_reference("torus", major=2.0, minor=0.5)
        grid = sample_grid(surface, 24, 24)
        geom = pullback_geometry(
            HeightField(surface, grid, 0.05 * random_smooth_field(surface, grid, seed=1))
        )
        fit = helfrich_residual(geom, PhysicsParams())
        assert fit.rank == 2
        # residual is L2-orthogonal to span{1, H}
        assert geom.inner(fit.residual, np.ones(grid.shape)) == pytest.approx(0.0, abs=1e-8)
        assert geom.inner(fit.residual, geom.mean_curvature) == pytest.approx(0.0, abs=1e-8)


class TestTargets:
    def test_round_sphere_targets(self):
        assert ComponentTargets(4 * np.pi, 4 * np.pi / 3).round_sphere
        assert not ComponentTargets(4 * np.pi**2, np.pi**2).round_sphere

    @pytest.mark.parametrize("a, v", [(0.0, 1.0), (1.0, -1.0), (1.0, 1.0)])
    def test_rejects_invalid_targets(self, a, v):
        with pytest.raises(ConfigError):
            ComponentTargets(a, v)

    def test_measure(self, sphere, sphere_grid):
        targets = ConstraintTargets.measure([HeightField.zeros(sphere, sphere_grid)])
        assert len(targets) == 1
        assert targets[0].area == pytest.approx(4 * np.pi, rel=1e-12)
        assert targets[0].round_sphere
