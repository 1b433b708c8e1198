import numpy as np
import pytest

from helfrichflow.dynamics.decay import ALGEBRAIC
from helfrichflow.dynamics.decay import EXPONENTIAL
from helfrichflow.dynamics.decay import convergence_exponent
from helfrichflow.dynamics.decay import fit_decay
from helfrichflow.dynamics.decay import fit_trajectory
from helfrichflow.dynamics.flow import Trajectory
from helfrichflow.dynamics.flow import TrajectoryRecord
from helfrichflow.helfrichflow_exception.HelfrichFlowException import DecayFitError
from helfrichflow.variational.energy import ComponentTargets
from helfrichflow.variational.energy import ConstraintTargets


def exponential_tail():
    t = np.linspace(0.0, 5.0, 200)
    gap = np.exp(-2.0 * t)
    return t, 1.0 + gap, np.sqrt(gap)


def algebraic_tail(theta=0.375):
    t = np.linspace(1.0, 50.0, 200)
    gap = t ** (-1.0 / (1.0 - 2.0 * theta))
    return t, 1.0 + gap, gap ** (1.0 - theta)


def planted_tail(theta):
    return exponential_tail() if theta == 0.5 else algebraic_tail(theta)


class TestFitDecay:
    def test_exponential(self):
        fit = fit_decay(*exponential_tail(), f_inf=1.0)
        assert fit.theta == pytest.approx(0.5, abs=1e-8)
        assert fit.decay_type == EXPONENTIAL
        assert fit.c0 == pytest.approx(2.0, rel=1e-8)
        assert fit.algebraic_exponent is None
        assert fit.consistent
        assert fit.window == (0, 200)

    def test_algebraic(self):
        fit = fit_decay(*algebraic_tail(), f_inf=1.0)
        assert fit.theta == pytest.approx(0.375, abs=1e-8)
        assert fit.decay_type == ALGEBRAIC
        assert fit.algebraic_exponent == pytest.approx(4.0, rel=1e-6)
        assert fit.theta_from_decay == pytest.approx(0.375, abs=1e-8)
        assert fit.c0 is None
        assert fit.consistent

    @pytest.mark.parametrize(
        "theta, decay_type", [(0.3, ALGEBRAIC), (0.375, ALGEBRAIC), (0.5, EXPONENTIAL)]
    )
    def test_planted_exponent(self, theta, decay_type):
        fit = fit_decay(*planted_tail(theta), f_inf=1.0)
        assert fit.theta == pytest.approx(theta, abs=0.01)
        assert fit.decay_type == decay_type
        assert fit.theta_from_decay == pytest.approx(theta, abs=0.01)
        assert fit.consistent

    def test_slow_algebraic_rate(self):
        fit = fit_decay(*algebraic_tail(0.3), f_inf=1.0)
        assert fit.algebraic_exponent == pytest.approx(2.5, rel=1e-6)

    def test_to_dict(self):
        fit = fit_decay(*exponential_tail(), f_inf=1.0)
        payload = fit.to_dict()
        assert payload["type"] == EXPONENTIAL
        assert payload["window"] == [0, 200]
        assert set(payload["residuals"]) == {"lojasiewicz", "exponential", "algebraic"}

    def test_too_few_records(self):
        t, f, g = exponential_tail()
        with pytest.raises(DecayFitError):
            fit_decay(t[:10], f[:10], g[:10], f_inf=1.0)

    def test_length_mismatch(self):
        t, f, g = exponential_tail()
        with pytest.raises(DecayFitError):
            fit_decay(t, f, g[:-1], f_inf=1.0)

    def test_non_monotone_tail(self):
        t, f, g = exponential_tail()
        f = f.copy()
        f[100] += 0.1
        with pytest.raises(DecayFitError):
            fit_decay(t, f, g, f_inf=1.0)

    def test_limit_reached_immediately(self):
        t = np.linspace(0.0, 1.0, 50)
        with pytest.raises(DecayFitError):
            fit_decay(t, np.ones_like(t), np.zeros_like(t), f_inf=1.0)


class TestConvergenceExponent:
    def test_power_law_distance(self):
        times = np.array([1.0, 2.0, 4.0, 8.0, 1e12])
        snapshots = [(np.full((4, 4), t**-1.5),) for t in times[:-1]] + [(np.zeros((4, 4)),)]
        assert convergence_exponent(times, snapshots) == pytest.approx(1.5, rel=1e-10)

    def test_needs_enough_snapshots(self):
        assert convergence_exponent(np.array([1.0, 2.0]), [(np.zeros(2),), (np.zeros(2),)]) is None


class TestFitTrajectory:
    def test_uses_projected_gradient(self):
        trajectory = Trajectory(ConstraintTargets((ComponentTargets(4 * np.pi, 4 * np.pi / 3),)))
        for t, f, g in zip(*exponential_tail(), strict=True):
            trajectory.append(TrajectoryRecord(t, f, 10.0 * g, g, (1.0,), (1.0,), 0.0, 0.0))
        fit = fit_trajectory(trajectory, f_inf=1.0)
        assert fit.theta == pytest.approx(0.5, abs=1e-8)
        assert fit.beta is None
