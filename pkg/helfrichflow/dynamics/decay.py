"""Empirical Lojasiewicz exponent and decay law of a converging flow.

Near a critical point ``|F - F_inf|^(1 - theta) <= c ||grad F||``. When the
inequality is sharp, ``F - F_inf`` decays like ``exp(-c0 t)`` for
``theta = 1/2`` and like ``t^(-1/(1 - 2 theta))`` for ``theta < 1/2``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from helfrichflow.const import ENERGY_INCREASE_RTOL
from helfrichflow.dynamics.flow import Trajectory
from helfrichflow.helfrichflow_exception.HelfrichFlowException import DecayFitError

logger = logging.getLogger(__name__)

EXPONENTIAL = "exponential"
ALGEBRAIC = "algebraic"

# Records closer to the limit than this many ulps of the energy scale are
# quadrature noise.
NOISE_ULPS = 1e3


@dataclass(frozen=True)
class DecayFit:
    theta: float
    decay_type: str
    algebraic_exponent: float | None
    c0: float | None
    beta: float | None
    f_inf: float
    window: tuple[int, int]
    window_times: tuple[float, float]
    residuals: dict
    theta_from_decay: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "type": self.decay_type,
            "algebraic_exponent": self.algebraic_exponent,
            "c0": self.c0,
            "beta": self.beta,
            "f_inf": self.f_inf,
            "window": list(self.window),
            "window_times": list(self.window_times),
            "residuals": dict(self.residuals),
            "theta_from_decay": self.theta_from_decay,
            "consistent": self.consistent,
        }


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line ``y = intercept + slope x`` and its RMS residual."""
    design = np.stack([np.ones_like(x), x], axis=1)
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((design @ np.array([intercept, slope]) - y) ** 2)))
    return float(intercept), float(slope), rms


def _select_window(
    energies: np.ndarray, f_inf: float, floor: float, min_records: int
) -> tuple[int, int]:
    gap = energies - f_inf
    above = np.flatnonzero(gap > floor)
    if above.size == 0:
        raise DecayFitError("No record lies above the noise floor of the limit energy")
    stop = int(above[-1]) + 1
    start = stop
    while start > 0 and gap[start - 1] > floor:
        start -= 1
    if stop - start < min_records:
        raise DecayFitError(
            f"Decay window holds {stop - start} records, need at least {min_records}"
        )
    tail = energies[start:stop]
    scale = max(abs(f_inf), float(np.max(np.abs(tail))))
    if np.any(np.diff(tail) > ENERGY_INCREASE_RTOL * scale):
        raise DecayFitError("Energy tail is not monotone")
    return start, stop


def convergence_exponent(
    times: np.ndarray, snapshots: list, floor: float = 0.0
) -> float | None:
    """``beta`` from ``||h(t) - h_inf|| ~ t^-beta`` with ``h_inf`` the last snapshot."""
    if len(snapshots) < 4:
        return None
    final = snapshots[-1]
    distances = np.array(
        [
            np.sqrt(sum(np.mean((a - b) ** 2) for a, b in zip(snap, final, strict=True)))
            for snap in snapshots[:-1]
        ]
    )
    times = np.asarray(times[:-1], dtype=float)
    keep = (times > 0) & (distances > floor)
    if np.count_nonzero(keep) < 3:
        return None
    _, slope, _ = _linear_fit(np.log(times[keep]), np.log(distances[keep]))
    return -slope


def fit_decay(
    times,
    energies,
    grad_norms,
    f_inf: float | None = None,
    min_records: int = 20,
    snapshot_times=None,
    snapshots=None,
    theta_tol: float = 0.05,
) -> DecayFit:
    """Fit the Lojasiewicz exponent and the decay law of a converged tail.

    Without ``f_inf`` the last energy is taken as the limit and records
    within a thousand final increments of it are left out of the window.

    Raises:
        DecayFitError: the window is shorter than ``min_records`` or the
            energy tail is not monotone.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    grad_norms = np.asarray(grad_norms, dtype=float)
    if not (times.shape == energies.shape == grad_norms.shape):
        raise DecayFitError("times, energies and gradient norms differ in length")
    if times.size < min_records:
        raise DecayFitError(f"Trajectory holds {times.size} records, need {min_records}")

    eps = np.finfo(float).eps
    if f_inf is None:
        f_inf = float(energies[-1])
        floor = NOISE_ULPS * abs(float(energies[-2] - energies[-1]))
    else:
        floor = 0.0
    floor = max(floor, NOISE_ULPS * eps * max(abs(f_inf), float(np.max(np.abs(energies)))))
    start, stop = _select_window(energies, f_inf, floor, min_records)

    t = times[start:stop]
    gap = energies[start:stop] - f_inf
    grad = grad_norms[start:stop]
    usable = grad > 0
    if np.count_nonzero(usable) < min_records:
        raise DecayFitError("Too few records with a nonzero gradient in the window")
    _, slope, loj_rms = _linear_fit(np.log(gap[usable]), np.log(grad[usable]))
    theta = 1.0 - slope

    positive = t > 0
    if np.count_nonzero(positive) < 3:
        raise DecayFitError("Decay window needs at least three records with t > 0")
    log_gap = np.log(gap[positive])
    _, exp_slope, exp_rms = _linear_fit(t[positive], log_gap)
    _, alg_slope, alg_rms = _linear_fit(np.log(t[positive]), log_gap)

    if exp_rms <= alg_rms:
        decay_type = EXPONENTIAL
        c0 = -exp_slope
        theta_from_decay = 0.5
    else:
        decay_type = ALGEBRAIC
        c0 = None
        power = -alg_slope
        theta_from_decay = (power - 1.0) / (2.0 * power)
    algebraic_exponent = 1.0 / (1.0 - 2.0 * theta) if theta < 0.5 - theta_tol else None
    consistent = (decay_type == EXPONENTIAL) == (abs(theta - 0.5) <= theta_tol)

    beta = None
    if snapshots is not None and snapshot_times is not None:
        beta = convergence_exponent(snapshot_times, snapshots)

    fit = DecayFit(
        theta=float(theta),
        decay_type=decay_type,
        algebraic_exponent=algebraic_exponent,
        c0=None if c0 is None else float(c0),
        beta=beta,
        f_inf=float(f_inf),
        window=(start, stop),
        window_times=(float(t[0]), float(t[-1])),
        residuals={
            "lojasiewicz": loj_rms,
            "exponential": exp_rms,
            "algebraic": alg_rms,
        },
        theta_from_decay=float(theta_from_decay),
        consistent=consistent,
    )
    if not consistent:
        logger.warning(
            f"Lojasiewicz slope gives theta={theta:.4f} but the decay law looks "
            f"{decay_type}"
        )
    logger.info(f"Decay fit: theta={theta:.4f}, {decay_type}, window {start}:{stop}")
    return fit


def fit_trajectory(
    trajectory: Trajectory,
    f_inf: float | None = None,
    min_records: int = 20,
) -> DecayFit:
    """Fit a flow trajectory using its projected-gradient norms."""
    snapshot_times, snapshots = trajectory.snapshots()
    return fit_decay(
        trajectory.times,
        trajectory.energies,
        np.array([r.grad_proxy for r in trajectory.records]),
        f_inf=f_inf,
        min_records=min_records,
        snapshot_times=snapshot_times,
        snapshots=snapshots,
    )
