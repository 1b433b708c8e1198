import numpy as np
import pytest

from helfrichflow.const import ENERGY_INCREASE_RTOL
from helfrichflow.dynamics.flow import FlowSettings
from helfrichflow.dynamics.flow import FlowState
from helfrichflow.dynamics.flow import Trajectory
from helfrichflow.dynamics.flow import TrajectoryRecord
from helfrichflow.dynamics.flow import evaluate
from helfrichflow.dynamics.flow import resolve_targets
from helfrichflow.dynamics.flow import run_flow
from helfrichflow.dynamics.flow import step
from helfrichflow.dynamics.mobility import MobilityKind
from helfrichflow.dynamics.mobility import MobilitySpec
from helfrichflow.dynamics.preconditioner import ReferencePreconditioner
from helfrichflow.dynamics.preconditioner import mode_laplacian
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import reference_geometry
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.perturbation import make_perturbation
from helfrichflow.geometry.perturbation import random_smooth_field
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError
from helfrichflow.variational.constraints import restore_all
from helfrichflow.variational.energy import PhysicsParams


@pytest.fixture(scope="module")
def sphere():
    return make_reference("sphere", radius=1.0)


@pytest.fixture(scope="module")
def sphere_grid(sphere):
    return sample_grid(sphere, 16, 16)


@pytest.fixture(scope="module")
def torus():
    return make_reference("torus", major=2.0, minor=0.5)


@pytest.fixture(scope="module")
def torus_grid(torus):
    return sample_grid(torus, 16, 16)


def record(t, energy=1.0):
    return TrajectoryRecord(t, energy, 0.0, 0.0, (1.0,), (1.0,), 0.0, 0.0)


class TestFlowSettings:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt0": 0.0},
            {"dt0": 1e-2, "dt_max": 1e-3},
            {"dt_growth": 0.5},
            {"targets_from": "final"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            FlowSettings(**kwargs)


class TestTrajectory:
    def test_times_must_increase(self, sphere, sphere_grid):
        targets = resolve_targets([HeightField.zeros(sphere, sphere_grid)], "reference")
        trajectory = Trajectory(targets)
        trajectory.append(record(0.0))
        trajectory.append(record(0.5))
        with pytest.raises(ValueError):
            trajectory.append(record(0.5))
        np.testing.assert_allclose(trajectory.times, [0.0, 0.5])

    def test_ledger_row_layout(self):
        row = TrajectoryRecord(1.0, 2.0, 3.0, 4.0, (5.0, 7.0), (6.0, 8.0), 9.0, 0.1).ledger_row()
        assert row == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 0.1]


class TestMobility:
    def test_from_name(self):
        assert MobilitySpec.from_name("l2").kind is MobilityKind.L2
        spec = MobilitySpec.from_name("h-1", 0.5)
        assert spec.screening == pytest.approx(0.25)

    @pytest.mark.parametrize("name, length", [("stokes", 1.0), ("h-1", 0.0)])
    def test_rejects_invalid(self, name, length):
        with pytest.raises(ConfigError):
            MobilitySpec.from_name(name, length)

    def test_dissipation_on_sphere(self, sphere, sphere_grid):
        geom = reference_geometry(sphere, sphere_grid)
        u, _ = sphere_grid.mesh
        assert MobilitySpec().dissipation(geom, np.ones(sphere_grid.shape)) == pytest.approx(4 * np.pi)
        h_minus_one = MobilitySpec.from_name("h-1", 1.0)
        # |grad cos u|^2 integrates to 2 ||cos u||^2 on the unit sphere
        assert h_minus_one.rayleigh_quotient(geom, np.cos(u)) == pytest.approx(3.0, rel=1e-10)
        np.testing.assert_allclose(h_minus_one.apply_inverse(geom, np.cos(u)), 3 * np.cos(u), atol=1e-9)


class TestPreconditioner:
    def test_mode_laplacian_on_sphere(self, sphere, sphere_grid):
        lap = mode_laplacian(sphere, sphere_grid, 0)
        np.testing.assert_allclose(lap @ np.cos(sphere_grid.u), -2 * np.cos(sphere_grid.u), atol=1e-9)

    def test_inverts_reference_operator_on_torus(self, torus):
        grid = sample_grid(torus, 24, 24)
        geom = reference_geometry(torus, grid)
        u, v = grid.mesh
        rhs = np.cos(u) + np.sin(2 * v) * np.cos(u)
        biharmonic, screening = 1e-2, 0.1
        solution = ReferencePreconditioner(torus, grid, biharmonic, screening).solve(rhs)
        lap = geom.laplacian(solution)
        applied = solution - screening * lap + biharmonic * geom.laplacian(lap)
        np.testing.assert_allclose(applied, rhs, atol=1e-8)


class TestStep:
    def test_zero_step_is_identity(self, sphere, sphere_grid):
        heights = (HeightField.zeros(sphere, sphere_grid),)
        targets = resolve_targets(heights, "reference")
        state = FlowState(0.0, heights, 1e-3)
        result = step(state, FlowSettings(), targets, tau=0.0)
        assert result.state is state
        assert result.accepted_dt == 0.0

    def test_negative_step_rejected(self, sphere, sphere_grid):
        heights = (HeightField.zeros(sphere, sphere_grid),)
        targets = resolve_targets(heights, "reference")
        with pytest.raises(ConfigError):
            step(FlowState(0.0, heights, 1e-3), FlowSettings(), targets, tau=-1e-3)

    def test_round_sphere_is_stationary(self, sphere, sphere_grid):
        heights = (HeightField.zeros(sphere, sphere_grid),)
        targets = resolve_targets(heights, "reference")
        result = step(FlowState(0.0, heights, 1e-2), FlowSettings(), targets)
        np.testing.assert_allclose(result.state.heights[0].values, 0.0, atol=1e-10)

    def test_perturbed_torus_step_decreases_energy(self, torus, torus_grid):
        values = 0.1 * torus.reach * random_smooth_field(torus, torus_grid, seed=4)
        heights = (HeightField(torus, torus_grid, values),)
        targets = resolve_targets(heights, "reference")
        heights = restore_all(heights, targets)
        settings = FlowSettings(dt0=1e-3, dt_max=1e-3)
        current = evaluate(heights, settings.params, targets)
        result = step(FlowState(0.0, heights, 1e-3), settings, targets, current=current)
        assert result.evaluation.energies.total < current.energies.total
        assert result.evaluation.areas[0] == pytest.approx(targets[0].area, rel=1e-10)
        assert result.evaluation.volumes[0] == pytest.approx(targets[0].volume, rel=1e-10)
        assert result.dissipation > 0


class TestRunFlow:
    def test_round_sphere_stops_immediately(self, sphere, sphere_grid):
        trajectory = run_flow([HeightField.zeros(sphere, sphere_grid)], FlowSettings())
        assert trajectory.converged
        assert len(trajectory) == 1
        assert trajectory.final_state.step_index == 0

    def test_stops_at_max_steps(self, sphere):
        grid = sample_grid(sphere, 16, 8, axisymmetric=True)
        values = make_perturbation(sphere, grid, "harmonic", 0.05, degree=2)
        records = []
        checkpoints = []
        settings = FlowSettings(
            dt0=1e-3, dt_max=1e-2, dt_growth=2.0, max_steps=3, checkpoint_every=2, snapshot_every=2
        )
        trajectory = run_flow(
            [HeightField(sphere, grid, values)],
            settings,
            record_callback=records.append,
            checkpoint_callback=checkpoints.append,
        )
        assert trajectory.stop_reason == "max_steps"
        assert len(trajectory) == 4
        assert len(records) == len(trajectory)
        assert [state.step_index for state in checkpoints] == [2]
        assert np.all(np.diff(trajectory.energies) <= 1e-12 * trajectory.energies[0])
        times, snapshots = trajectory.snapshots()
        assert times[0] == 0.0
        assert times[-1] == trajectory.times[-1]
        assert len(snapshots) == 3

    @pytest.mark.slow
    def test_sphere_relaxes_to_round(self, sphere):
        grid = sample_grid(sphere, 16, 8, axisymmetric=True)
        values = make_perturbation(sphere, grid, "harmonic", 0.1, degree=2)
        settings = FlowSettings(
            params=PhysicsParams(),
            dt0=1e-3,
            dt_max=5e-2,
            dt_growth=1.5,
            t_end=20.0,
            grad_tol=1e-8,
            max_steps=2000,
        )
        trajectory = run_flow([HeightField(sphere, grid, values)], settings)
        assert trajectory.converged
        assert trajectory.energies[-1] == pytest.approx(8 * np.pi, rel=1e-8)
        final = trajectory.final_state.heights[0].values
        np.testing.assert_allclose(final, final.mean(), atol=1e-6)

    @pytest.mark.slow
    def test_perturbed_torus_conserves_constraints(self, torus, torus_grid):
        values = 0.1 * torus.reach * random_smooth_field(torus, torus_grid, seed=4)
        settings = FlowSettings(
            dt0=1e-3, dt_max=1e-3, t_end=10.0, grad_tol=1e-14, max_steps=500
        )
        trajectory = run_flow([HeightField(torus, torus_grid, values)], settings)
        assert trajectory.stop_reason == "max_steps"
        assert len(trajectory) == 501
        target = trajectory.targets.components[0]
        for entry in trajectory.records:
            assert entry.areas[0] == pytest.approx(target.area, rel=1e-9)
            assert entry.volumes[0] == pytest.approx(target.volume, rel=1e-9)
        energies = trajectory.energies
        assert np.all(np.diff(energies) <= ENERGY_INCREASE_RTOL * energies[0])
        assert energies[-1] < energies[0]
