import numpy as np
import pytest

from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import embed
from helfrichflow.geometry.graphgeom import integrate
from helfrichflow.geometry.graphgeom import integrate_components
from helfrichflow.geometry.graphgeom import laplace_beltrami
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.geometry.graphgeom import reference_geometry
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.perturbation import random_smooth_field
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridMismatchError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    ReachViolationError,
)
from helfrichflow.verification.oracles import torus_laplacian_stencil


@pytest.fixture(scope="module")
def sphere():
    return make_reference("sphere", radius=1.0)


@pytest.fixture(scope="module")
def sphere_grid(sphere):
    return sample_grid(sphere, 24, 24)


@pytest.fixture(scope="module")
def torus():
    return make_reference("torus", major=2.0, minor=0.5)


@pytest.fixture(scope="module")
def torus_grid(torus):
    return sample_grid(torus, 32, 32)


def perturbed(surface, grid, amplitude=0.1, seed=7):
    values = amplitude * surface.reach * random_smooth_field(surface, grid, seed)
    return HeightField(surface, grid, values)


class TestHeightField:
    def test_zero_height_embeds_reference(self, sphere, sphere_grid):
        positions = embed(HeightField.zeros(sphere, sphere_grid))
        np.testing.assert_allclose(positions, sphere.position(*sphere_grid.mesh))

    def test_constant_height_scales_sphere(self, sphere, sphere_grid):
        height = HeightField(sphere, sphere_grid, np.full(sphere_grid.shape, 0.3))
        radii = np.linalg.norm(embed(height), axis=0)
        np.testing.assert_allclose(radii, 1.3)

    def test_height_beyond_half_reach_is_rejected(self, sphere, sphere_grid):
        height = HeightField(sphere, sphere_grid, np.full(sphere_grid.shape, 0.6))
        assert not height.is_admissible()
        with pytest.raises(ReachViolationError):
            embed(height)

    def test_non_finite_height_is_not_admissible(self, sphere, sphere_grid):
        values = np.zeros(sphere_grid.shape)
        values[3, 4] = np.nan
        assert not HeightField(sphere, sphere_grid, values).is_admissible()

    def test_shape_mismatch(self, sphere, sphere_grid):
        with pytest.raises(GridMismatchError):
            HeightField(sphere, sphere_grid, np.zeros((8, 8)))


class TestSphereGeometry:
    def test_reference_matches_analytic(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        u, v = sphere_grid.mesh
        np.testing.assert_allclose(geom.metric, sphere.metric(u, v), atol=1e-12)
        np.testing.assert_allclose(geom.curvature, sphere.second_fundamental_form(u, v), atol=1e-12)
        np.testing.assert_allclose(geom.mean_curvature, -2.0, atol=1e-10)
        np.testing.assert_allclose(geom.gauss_curvature, 1.0, atol=1e-10)
        np.testing.assert_allclose(geom.tilt, 1.0, atol=1e-10)

    def test_offset_sphere(self, sphere, sphere_grid):
        geom = pullback_geometry(
            HeightField(sphere, sphere_grid, np.full(sphere_grid.shape, 0.5))
        )
        assert integrate(geom, np.ones(sphere_grid.shape)) == pytest.approx(9 * np.pi, rel=1e-11)
        np.testing.assert_allclose(geom.mean_curvature, -2.0 / 1.5, atol=1e-10)

    def test_laplacian_eigenfunction(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        u, _ = sphere_grid.mesh
        np.testing.assert_allclose(laplace_beltrami(geom, np.cos(u)), -2 * np.cos(u), atol=1e-9)
        np.testing.assert_allclose(laplace_beltrami(geom, np.ones(sphere_grid.shape)), 0.0, atol=1e-9)

    def test_gauss_bonnet_on_perturbed_sphere(self, sphere, sphere_grid):
        geom = pullback_geometry(perturbed(sphere, sphere_grid))
        assert integrate(geom, geom.gauss_curvature) == pytest.approx(4 * np.pi, rel=1e-7)

    def test_mean_curvature_balance(self, sphere, sphere_grid):
        geom = pullback_geometry(perturbed(sphere, sphere_grid))
        balance = [integrate(geom, geom.mean_curvature * geom.normal[i]) for i in range(3)]
        np.testing.assert_allclose(balance, 0.0, atol=1e-8)

    def test_laplacian_integrates_to_zero(self, sphere, sphere_grid):
        geom = pullback_geometry(perturbed(sphere, sphere_grid))
        u, v = sphere_grid.mesh
        f = np.sin(u) * np.cos(v) + np.cos(u) ** 2
        assert integrate(geom, laplace_beltrami(geom, f)) == pytest.approx(0.0, abs=1e-8)

    def test_divergence_of_gradient_is_laplacian(self, sphere, sphere_grid):
        geom = pullback_geometry(perturbed(sphere, sphere_grid))
        u, _ = sphere_grid.mesh
        f = np.cos(u)
        divergence = geom.divergence(geom.raise_index(geom.gradient(f)))
        np.testing.assert_allclose(divergence, geom.laplacian(f), atol=1e-8)


class TestTorusGeometry:
    def test_reference_matches_analytic(self, torus, torus_grid):
        geom = reference_geometry(torus, torus_grid)
        u, v = torus_grid.mesh
        np.testing.assert_allclose(geom.mean_curvature, torus.mean_curvature(u, v), atol=1e-11)
        np.testing.assert_allclose(geom.gauss_curvature, torus.gauss_curvature(u, v), atol=1e-11)
        np.testing.assert_allclose(geom.normal, torus.normal(u, v), atol=1e-11)

    def test_laplacian_of_cos_u(self, torus, torus_grid):
        geom = reference_geometry(torus, torus_grid)
        u, _ = torus_grid.mesh
        r = torus.minor
        rho = torus.major + r * np.cos(u)
        expected = (r * np.sin(u) ** 2 - rho * np.cos(u)) / (r**2 * rho)
        np.testing.assert_allclose(laplace_beltrami(geom, np.cos(u)), expected, atol=1e-10)

    def test_laplacian_matches_stencil(self, torus, torus_grid):
        geom = reference_geometry(torus, torus_grid)
        u, v = torus_grid.mesh

        def f(x, y):
            return np.sin(2 * x) + 0.5 * np.cos(x - y)

        stencil = torus_laplacian_stencil(torus, f, u, v)
        np.testing.assert_allclose(laplace_beltrami(geom, f(u, v)), stencil, atol=1e-6)

    def test_gauss_bonnet_on_perturbed_torus(self, torus, torus_grid):
        geom = pullback_geometry(perturbed(torus, torus_grid))
        assert integrate(geom, geom.gauss_curvature) == pytest.approx(0.0, abs=1e-7)

    def test_integrate_components(self, sphere, sphere_grid, torus, torus_grid):
        geoms = [reference_geometry(sphere, sphere_grid), reference_geometry(torus, torus_grid)]
        areas = integrate_components(geoms, [np.ones(sphere_grid.shape), np.ones(torus_grid.shape)])
        np.testing.assert_allclose(areas, [4 * np.pi, torus.area()], rtol=1e-12)
