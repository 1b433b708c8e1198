"""Constrained Canham-Helfrich gradient flow on normal graphs.

One step solves the linearly implicit system

    (M^-1 + tau kappa Delta_g^2) w + sum_j lambda_j n_j = -grad F,
    <w, n_j> = 0,

for the normal velocity ``w`` of every component (``n_j`` are the constraint
normals ``1`` and ``H``), moves ``h <- h + tau w / tilt`` and restores area
and volume by Newton. Steps that raise the energy or leave the admissible
tube are retried with half the step size.
"""

import logging
from collections.abc import Callable
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy.sparse.linalg import LinearOperator
from scipy.sparse.linalg import gmres
from tenacity import Retrying
from tenacity import before_sleep_log
from tenacity import retry_if_exception_type
from tenacity import stop_after_attempt

from helfrichflow.const import ENERGY_INCREASE_RTOL
from helfrichflow.dynamics.mobility import MobilitySpec
from helfrichflow.dynamics.preconditioner import ReferencePreconditioner
from helfrichflow.geometry.graphgeom import GeometryState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    DegenerateGeometryError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    HelfrichFlowError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    LinearSolveError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    NewtonConvergenceError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    ReachViolationError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    StepRejectedError,
)
from helfrichflow.progress_monitor import ProgressMonitor
from helfrichflow.variational.constraints import GRAM_RCOND
from helfrichflow.variational.constraints import constraint_normals
from helfrichflow.variational.constraints import project_tangent
from helfrichflow.variational.constraints import restore_all
from helfrichflow.variational.energy import ConstraintTargets
from helfrichflow.variational.energy import EnergySummary
from helfrichflow.variational.energy import PhysicsParams
from helfrichflow.variational.energy import area
from helfrichflow.variational.energy import enclosed_volume
from helfrichflow.variational.energy import energy
from helfrichflow.variational.energy import l2_gradient

logger = logging.getLogger(__name__)

FLOW_STAGES = [
    ("Restore initial constraints", 1.0),
    ("Integrate flow", 97.0),
    ("Finalize trajectory", 2.0),
]

STEP_FAILURES = (
    StepRejectedError,
    ReachViolationError,
    DegenerateGeometryError,
    NewtonConvergenceError,
)

LINEAR_SOLVE_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    heights: tuple[HeightField, ...]
    dt: float
    step_index: int = 0

    def with_heights(self, heights, t: float, dt: float) -> "FlowState":
        return FlowState(t, tuple(heights), dt, self.step_index + 1)


@dataclass(frozen=True, eq=False)
class Evaluation:
    geoms: tuple[GeometryState, ...]
    energies: EnergySummary
    gradients: tuple[np.ndarray, ...]
    projected: tuple[np.ndarray, ...]
    areas: tuple[float, ...]
    volumes: tuple[float, ...]

    @property
    def grad_l2(self) -> float:
        return float(
            np.sqrt(sum(g.inner(f, f) for g, f in zip(self.geoms, self.gradients, strict=True)))
        )

    @property
    def grad_proxy(self) -> float:
        return float(
            np.sqrt(sum(g.inner(f, f) for g, f in zip(self.geoms, self.projected, strict=True)))
        )


@dataclass(frozen=True, eq=False)
class StepResult:
    state: FlowState
    evaluation: Evaluation
    velocities: tuple[np.ndarray, ...]
    dissipation: float
    accepted_dt: float
    halvings: int


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    t: float
    energy: float
    grad_l2: float
    grad_proxy: float
    areas: tuple[float, ...]
    volumes: tuple[float, ...]
    dissipation: float
    dt: float
    snapshot: tuple[np.ndarray, ...] | None = None

    def ledger_row(self) -> list[float]:
        row = [self.t, self.energy, self.grad_l2, self.grad_proxy]
        for a, v in zip(self.areas, self.volumes, strict=True):
            row.extend([a, v])
        row.extend([self.dissipation, self.dt])
        return row


@dataclass
class Trajectory:
    targets: ConstraintTargets
    records: list[TrajectoryRecord] = field(default_factory=list)
    stop_reason: str = ""
    failure: str | None = None
    final_state: FlowState | None = None

    def __len__(self):
        return len(self.records)

    def append(self, record: TrajectoryRecord):
        if self.records and not record.t > self.records[-1].t:
            raise ValueError(
                f"Trajectory times must increase: {record.t} after {self.records[-1].t}"
            )
        self.records.append(record)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_l2 for r in self.records])

    @property
    def converged(self) -> bool:
        return self.stop_reason == "stationary"

    def snapshots(self) -> tuple[np.ndarray, list[tuple[np.ndarray, ...]]]:
        kept = [r for r in self.records if r.snapshot is not None]
        return np.array([r.t for r in kept]), [r.snapshot for r in kept]


@dataclass(frozen=True)
class FlowSettings:
    params: PhysicsParams = PhysicsParams()
    mobility: MobilitySpec = MobilitySpec()
    dt0: float = 1e-3
    dt_max: float = 1e-3
    dt_growth: float = 1.0
    t_end: float = 1.0
    grad_tol: float = 1e-6
    max_steps: int = 1000
    max_halvings: int = 8
    checkpoint_every: int = 0
    snapshot_every: int = 0
    targets_from: str = "reference"
    gmres_rtol: float = 1e-10

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ConfigError(f"dt0 must be positive, got {self.dt0}")
        if self.dt_max < self.dt0:
            raise ConfigError(f"dt_max {self.dt_max} is below dt0 {self.dt0}")
        if self.dt_growth < 1.0:
            raise ConfigError(f"dt_growth must be >= 1, got {self.dt_growth}")
        if self.targets_from not in ("reference", "initial"):
            raise ConfigError(f"Unknown constraint targets: {self.targets_from}")


def evaluate(
    heights: Sequence[HeightField],
    params: PhysicsParams,
    targets: ConstraintTargets,
    geoms: Sequence[GeometryState] | None = None,
) -> Evaluation:
    if geoms is None:
        geoms = [pullback_geometry(h) for h in heights]
    gradients = tuple(l2_gradient(g, params) for g in geoms)
    projected = tuple(
        project_tangent(g, f, area_only=targets[h.component].round_sphere)
        for h, g, f in zip(heights, geoms, gradients, strict=True)
    )
    return Evaluation(
        geoms=tuple(geoms),
        energies=EnergySummary(tuple(energy(g, params) for g in geoms)),
        gradients=gradients,
        projected=projected,
        areas=tuple(area(g) for g in geoms),
        volumes=tuple(enclosed_volume(g) for g in geoms),
    )


def _krylov_solve(operator, preconditioner, rhs, shape, rtol: float) -> np.ndarray:
    b = np.ravel(rhs)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(shape)
    x, info = gmres(
        operator, b, rtol=rtol, atol=0.0, restart=50, maxiter=100, M=preconditioner
    )
    if info != 0:
        residual = np.linalg.norm(operator.matvec(x) - b)
        if info < 0 or residual > LINEAR_SOLVE_ATOL * b_norm:
            raise LinearSolveError(
                f"GMRES failed (info={info}, relative residual {residual / b_norm:.3e})"
            )
        logger.debug(f"GMRES stopped early with relative residual {residual / b_norm:.3e}")
    return np.reshape(x, shape)


def solve_velocity(
    height: HeightField,
    geom: GeometryState,
    gradient: np.ndarray,
    tau: float,
    params: PhysicsParams,
    mobility: MobilitySpec,
    area_only: bool = False,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Constrained velocity of one component for the step size ``tau``.

    Raises:
        LinearSolveError: the Krylov solver does not reach the tolerance.
    """
    grid = geom.grid
    shape = grid.shape
    stiffness = tau * params.kappa

    def matvec(x):
        w = np.reshape(x, shape)
        lap = geom.laplacian(w)
        return (mobility.apply_inverse(geom, w) + stiffness * geom.laplacian(lap)).ravel()

    size = grid.n_u * grid.n_v
    operator = LinearOperator((size, size), matvec=matvec, dtype=float)
    preconditioner = ReferencePreconditioner(
        height.surface, grid, stiffness, mobility.screening
    ).as_linear_operator()

    w0 = _krylov_solve(operator, preconditioner, -gradient, shape, rtol)
    normals = constraint_normals(geom, area_only)
    responses = [_krylov_solve(operator, preconditioner, n, shape, rtol) for n in normals]
    gram = np.array([[geom.inner(z, n) for z in responses] for n in normals])
    rhs = np.array([geom.inner(w0, n) for n in normals])
    multipliers = np.linalg.pinv(gram, rcond=GRAM_RCOND) @ rhs
    w = w0 - sum(c * z for c, z in zip(multipliers, responses, strict=True))
    return project_tangent(geom, w, area_only)


def _attempt_step(
    state: FlowState,
    current: Evaluation,
    settings: FlowSettings,
    targets: ConstraintTargets,
    tau: float,
) -> StepResult:
    params = settings.params
    velocities = []
    moved = []
    dissipation = 0.0
    for height, geom, gradient in zip(
        state.heights, current.geoms, current.gradients, strict=True
    ):
        area_only = targets[height.component].round_sphere
        w = solve_velocity(
            height,
            geom,
            gradient,
            tau,
            params,
            settings.mobility,
            area_only,
            settings.gmres_rtol,
        )
        velocities.append(w)
        dissipation += settings.mobility.dissipation(geom, w)
        values = height.values + tau * w / geom.tilt
        if height.grid.axisymmetric:
            values = height.grid.azimuthal_mean(values)
        moved.append(height.with_values(values))

    restored = restore_all(moved, targets)
    evaluation = evaluate(restored, params, targets)
    old_energy = current.energies.total
    new_energy = evaluation.energies.total
    if new_energy > old_energy + ENERGY_INCREASE_RTOL * abs(old_energy):
        raise StepRejectedError(
            f"Energy increased from {old_energy:.15g} to {new_energy:.15g} "
            f"with dt={tau:.3e}"
        )
    return StepResult(
        state=state.with_heights(restored, state.t + tau, tau),
        evaluation=evaluation,
        velocities=tuple(velocities),
        dissipation=dissipation,
        accepted_dt=tau,
        halvings=0,
    )


def step(
    state: FlowState,
    settings: FlowSettings,
    targets: ConstraintTargets,
    tau: float | None = None,
    current: Evaluation | None = None,
) -> StepResult:
    """Advance ``state`` by one accepted step, halving ``tau`` on failure.

    Raises:
        StepRejectedError: the energy still increases after the last halving.
        ReachViolationError: every attempt leaves the admissible tube.
        LinearSolveError: the implicit system cannot be solved.
    """
    tau = state.dt if tau is None else tau
    if tau < 0:
        raise ConfigError(f"Step size must be non-negative, got {tau}")
    if current is None:
        current = evaluate(state.heights, settings.params, targets)
    if tau == 0.0:
        return StepResult(state, current, (), 0.0, 0.0, 0)

    retrying = Retrying(
        stop=stop_after_attempt(settings.max_halvings + 1),
        retry=retry_if_exception_type(STEP_FAILURES),
        before_sleep=before_sleep_log(logger, logging.DEBUG),
        reraise=True,
    )
    result = None
    for attempt in retrying:
        with attempt:
            halvings = attempt.retry_state.attempt_number - 1
            result = _attempt_step(
                state, current, settings, targets, tau / 2**halvings
            )
    if halvings:
        logger.debug(f"Step {state.step_index} accepted after {halvings} halvings")
    return StepResult(
        state=result.state,
        evaluation=result.evaluation,
        velocities=result.velocities,
        dissipation=result.dissipation,
        accepted_dt=result.accepted_dt,
        halvings=halvings,
    )


def _record(
    t: float,
    evaluation: Evaluation,
    dissipation: float,
    dt: float,
    heights: Sequence[HeightField] | None,
) -> TrajectoryRecord:
    return TrajectoryRecord(
        t=t,
        energy=evaluation.energies.total,
        grad_l2=evaluation.grad_l2,
        grad_proxy=evaluation.grad_proxy,
        areas=evaluation.areas,
        volumes=evaluation.volumes,
        dissipation=dissipation,
        dt=dt,
        snapshot=None if heights is None else tuple(h.values.copy() for h in heights),
    )


def resolve_targets(
    heights: Sequence[HeightField], targets_from: str
) -> ConstraintTargets:
    if targets_from == "reference":
        return ConstraintTargets.measure(
            [HeightField.zeros(h.surface, h.grid, h.component) for h in heights]
        )
    return ConstraintTargets.measure(heights)


def run_flow(
    heights: Sequence[HeightField],
    settings: FlowSettings,
    targets: ConstraintTargets | None = None,
    record_callback: Callable[[TrajectoryRecord], None] | None = None,
    checkpoint_callback: Callable[[FlowState], None] | None = None,
    progress_monitor: ProgressMonitor | None = None,
) -> Trajectory:
    """Integrate the flow until stationarity, ``t_end`` or ``max_steps``.

    A step failure ends the run; the trajectory up to the failure is
    returned with ``stop_reason == "step-failure"`` and the error text in
    ``failure``.

    Raises:
        NewtonConvergenceError: the initial state cannot be restored.
    """
    heights = tuple(heights)
    if targets is None:
        targets = resolve_targets(heights, settings.targets_from)
    monitor = progress_monitor or ProgressMonitor(FLOW_STAGES, disable=True)

    with monitor.stage_start(FLOW_STAGES[0][0], len(heights)) as stage:
        heights = restore_all(heights, targets)
        stage.advance(len(heights))

    trajectory = Trajectory(targets=targets)
    state = FlowState(0.0, heights, settings.dt0)
    current = evaluate(state.heights, settings.params, targets)

    def keep(record):
        trajectory.append(record)
        if record_callback:
            record_callback(record)

    keep(_record(0.0, current, 0.0, 0.0, heights if settings.snapshot_every else None))
    logger.info(
        f"Flow start: F={current.energies.total:.12g}, "
        f"|P grad|={current.grad_proxy:.3e}"
    )

    with monitor.stage_start(FLOW_STAGES[1][0], settings.max_steps) as stage:
        while True:
            if current.grad_proxy <= settings.grad_tol:
                trajectory.stop_reason = "stationary"
                break
            if state.t >= settings.t_end * (1.0 - 1e-12):
                trajectory.stop_reason = "t_end"
                break
            if state.step_index >= settings.max_steps:
                trajectory.stop_reason = "max_steps"
                break

            tau = min(state.dt, settings.t_end - state.t)
            try:
                result = step(state, settings, targets, tau, current)
            except HelfrichFlowError as e:
                logger.error(f"Flow stopped at t={state.t:.6g}: {e}")
                trajectory.stop_reason = "step-failure"
                trajectory.failure = str(e)
                break

            current = result.evaluation
            next_dt = min(result.accepted_dt * settings.dt_growth, settings.dt_max)
            state = FlowState(
                result.state.t, result.state.heights, next_dt, result.state.step_index
            )
            snapshot = (
                settings.snapshot_every
                and state.step_index % settings.snapshot_every == 0
            )
            keep(
                _record(
                    state.t,
                    current,
                    result.dissipation,
                    result.accepted_dt,
                    state.heights if snapshot else None,
                )
            )
            if (
                checkpoint_callback
                and settings.checkpoint_every
                and state.step_index % settings.checkpoint_every == 0
            ):
                checkpoint_callback(state)
            stage.advance()

    with monitor.stage_start(FLOW_STAGES[2][0], 1) as stage:
        trajectory.final_state = state
        last = trajectory.records[-1]
        if settings.snapshot_every and last.snapshot is None:
            trajectory.records[-1] = _record(
                last.t, current, last.dissipation, last.dt, state.heights
            )
        stage.advance()

    logger.info(
        f"Flow finished ({trajectory.stop_reason}) after {state.step_index} steps: "
        f"t={state.t:.6g}, F={current.energies.total:.12g}, "
        f"|P grad|={current.grad_proxy:.3e}"
    )
    return trajectory
