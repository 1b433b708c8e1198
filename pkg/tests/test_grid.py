import numpy as np
import pytest

from helfrichflow.const import AXISYMMETRIC_N_V
from helfrichflow.geometry.grid import fejer_weights
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridMismatchError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    GridResolutionError,
)


@pytest.fixture(scope="module")
def sphere():
    return make_reference("sphere", radius=1.0)


@pytest.fixture(scope="module")
def torus():
    return make_reference("torus", major=2.0, minor=0.5)


class TestSampleGrid:
    @pytest.mark.parametrize("shape", [(6, 16), (16, 6), (15, 16), (16, 17)])
    def test_rejects_bad_resolution(self, sphere, shape):
        with pytest.raises(GridResolutionError):
            sample_grid(sphere, *shape)

    def test_sphere_nodes_avoid_poles(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        assert grid.u.min() > 0
        assert grid.u.max() < np.pi
        assert grid.pole_handling == "double-fourier"
        assert grid.periodic == (False, True)

    def test_axisymmetric_keeps_fixed_azimuth(self, sphere):
        grid = sample_grid(sphere, 16, 64, axisymmetric=True)
        assert grid.shape == (16, AXISYMMETRIC_N_V)
        assert grid.axisymmetric

    def test_same_as(self, sphere, torus):
        assert sample_grid(sphere, 16, 16).same_as(sample_grid(sphere, 16, 16))
        assert not sample_grid(sphere, 16, 16).same_as(sample_grid(torus, 16, 16))


class TestQuadrature:
    @pytest.mark.parametrize("n", [8, 16, 33])
    def test_fejer_weights_integrate_constants(self, n):
        assert fejer_weights(n).sum() == pytest.approx(2.0)

    def test_fejer_weights_integrate_polynomials(self):
        n = 16
        x = np.cos((np.arange(n) + 0.5) * np.pi / n)
        assert np.dot(fejer_weights(n), x**2) == pytest.approx(2.0 / 3.0)
        assert np.dot(fejer_weights(n), x**3) == pytest.approx(0.0, abs=1e-14)

    def test_sphere_area(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        u, _ = grid.mesh
        assert grid.integrate_density(np.sin(u)) == pytest.approx(4 * np.pi)

    def test_torus_area(self, torus):
        grid = sample_grid(torus, 16, 16)
        u, _ = grid.mesh
        density = torus.minor * (torus.major + torus.minor * np.cos(u))
        assert grid.integrate_density(density) == pytest.approx(torus.area())

    def test_integrate_batched_fields(self, torus):
        grid = sample_grid(torus, 8, 8)
        densities = np.stack([np.ones(grid.shape), 2 * np.ones(grid.shape)])
        np.testing.assert_allclose(
            grid.integrate_density(densities), [4 * np.pi**2, 8 * np.pi**2]
        )


class TestSpectralDerivatives:
    def test_torus_derivatives_are_exact(self, torus):
        grid = sample_grid(torus, 16, 16)
        u, v = grid.mesh
        f = np.sin(2 * u) * np.cos(v)
        np.testing.assert_allclose(grid.derivative(f, du=1), 2 * np.cos(2 * u) * np.cos(v), atol=1e-12)
        np.testing.assert_allclose(grid.derivative(f, dv=2), -f, atol=1e-12)
        np.testing.assert_allclose(
            grid.derivative(f, du=1, dv=1), -2 * np.cos(2 * u) * np.sin(v), atol=1e-12
        )

    def test_sphere_derivatives_across_poles(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        u, v = grid.mesh
        # Cartesian x = sin u cos v continues smoothly through the poles
        x = np.sin(u) * np.cos(v)
        derivatives = grid.derivatives(x, 2)
        np.testing.assert_allclose(derivatives[(1, 0)], np.cos(u) * np.cos(v), atol=1e-12)
        np.testing.assert_allclose(derivatives[(2, 0)], -x, atol=1e-12)
        np.testing.assert_allclose(derivatives[(0, 1)], -np.sin(u) * np.sin(v), atol=1e-12)

    def test_gradient_stacks_partials(self, torus):
        grid = sample_grid(torus, 8, 8)
        u, v = grid.mesh
        gradient = grid.gradient(np.cos(u) + np.sin(v))
        np.testing.assert_allclose(gradient[0], -np.sin(u), atol=1e-12)
        np.testing.assert_allclose(gradient[1], np.cos(v), atol=1e-12)

    def test_u_derivative_matrix_matches_fft(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        column = np.cos(grid.u)
        matrix = grid.u_derivative_matrix(1, parity=1)
        np.testing.assert_allclose(matrix @ column, -np.sin(grid.u), atol=1e-12)


class TestFieldUtilities:
    def test_check_field_rejects_other_grid(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        with pytest.raises(GridMismatchError):
            grid.check_field(np.zeros((8, 16)))

    def test_azimuthal_mean(self, torus):
        grid = sample_grid(torus, 8, 8)
        u, v = grid.mesh
        np.testing.assert_allclose(grid.azimuthal_mean(np.cos(u) + np.cos(v)), np.cos(u), atol=1e-14)

    def test_pole_values(self, sphere):
        grid = sample_grid(sphere, 16, 16)
        u, _ = grid.mesh
        north, south = grid.pole_values(np.cos(u))
        assert north == pytest.approx(1.0)
        assert south == pytest.approx(-1.0)

    def test_pole_values_need_sphere(self, torus):
        grid = sample_grid(torus, 8, 8)
        with pytest.raises(GridMismatchError):
            grid.pole_values(np.zeros(grid.shape))
