import argparse
import logging
import sys
from typing import Any

import configargparse
import tqdm
from pydantic import ValidationError
from rich.console import Console
from rich.progress import BarColumn
from rich.progress import MofNCompleteColumn
from rich.progress import Progress
from rich.progress import TextColumn
from rich.progress import TimeElapsedColumn
from rich.progress import TimeRemainingColumn
from rich.table import Table

from helfrichflow.const import OUTPUT_DIR_ENV
from helfrichflow.dynamics.decay import fit_decay
from helfrichflow.dynamics.flow import FLOW_STAGES
from helfrichflow.dynamics.flow import run_flow
from helfrichflow.fileio.checkpoint import read_checkpoint
from helfrichflow.fileio.checkpoint import write_checkpoint
from helfrichflow.fileio.export import LedgerWriter
from helfrichflow.fileio.export import read_ledger
from helfrichflow.fileio.export import surface_mesh
from helfrichflow.fileio.export import write_json
from helfrichflow.fileio.export import write_obj
from helfrichflow.fileio.export import write_vtk
from helfrichflow.flow_config import FlowConfig
from helfrichflow.flow_config import NestedTomlConfigParser
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.graphgeom import pullback_geometry
from helfrichflow.helfrichflow_exception.HelfrichFlowException import ConfigError
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    HelfrichFlowError,
)
from helfrichflow.progress_monitor import ProgressMonitor
from helfrichflow.spectra.spectrum import analyze_spectrum
from helfrichflow.utils.memory_monitor import MemoryMonitor
from helfrichflow.variational.energy import ComponentTargets
from helfrichflow.variational.energy import area
from helfrichflow.variational.energy import enclosed_volume
from helfrichflow.variational.energy import energy
from helfrichflow.variational.energy import helfrich_residual
from helfrichflow.verification.report import all_passed
from helfrichflow.verification.report import print_results
from helfrichflow.verification.report import summary
from helfrichflow.verification.suites import SUITES
from helfrichflow.verification.suites import VerificationContext
from helfrichflow.verification.suites import run_suites

logger = logging.getLogger(__name__)
__version__ = "0.1.0"

COMMANDS = ("verify", "energy", "flow", "spectrum", "fit-decay")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _str_to_bool(value: str) -> bool:
    if isinstance(value, bool):
        return value
    lowered = value.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def create_parser():
    parser = configargparse.ArgParser(
        prog="helfrichflow",
        description="Constrained Canham-Helfrich gradient flow of closed surfaces.",
        config_file_parser_class=NestedTomlConfigParser(["helfrichflow"]),
    )
    parser.add_argument(
        "command",
        choices=COMMANDS,
        help="verify: run the oracle suites; energy: evaluate F, A and V; "
        "flow: integrate the constrained flow; spectrum: constrained Hessian "
        "spectrum; fit-decay: fit the decay law of a flow ledger.",
    )
    parser.add_argument(
        "-c",
        "--config",
        is_config_file=True,
        help="config file path (TOML)",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Use debug logging level.",
    )

    surface_group = parser.add_argument_group(
        "Surface",
        description="Reference surface and sampling grid",
    )
    surface_group.add_argument(
        "--surface.kind",
        choices=["sphere", "torus"],
        help="Reference surface kind (default: sphere)",
    )
    surface_group.add_argument(
        "--surface.radius",
        type=float,
        help="Sphere radius (default: 1.0)",
    )
    surface_group.add_argument(
        "--surface.major",
        type=float,
        help="Torus major radius a (default: 2.0)",
    )
    surface_group.add_argument(
        "--surface.minor",
        type=float,
        help="Torus minor radius r, must be below a (default: 0.5)",
    )
    surface_group.add_argument(
        "--grid.n_u",
        type=int,
        help="Nodes in the polar/poloidal direction, even (default: 32)",
    )
    surface_group.add_argument(
        "--grid.n_v",
        type=int,
        help="Nodes in the azimuthal direction, even (default: 32)",
    )
    surface_group.add_argument(
        "--grid.axisymmetric",
        type=_str_to_bool,
        help="Restrict fields to their azimuthal mean (default: false)",
    )

    physics_group = parser.add_argument_group(
        "Physics",
        description="Energy parameters and the initial perturbation",
    )
    physics_group.add_argument(
        "--physics.kappa",
        type=float,
        help="Bending rigidity (default: 1.0)",
    )
    physics_group.add_argument(
        "--physics.c0",
        type=float,
        help="Spontaneous curvature in the H = -2/R convention (default: 0.0)",
    )
    physics_group.add_argument(
        "--perturbation.mode",
        choices=["none", "harmonic", "fourier", "random"],
        help="Initial height shape (default: none)",
    )
    physics_group.add_argument(
        "--perturbation.amplitude",
        type=float,
        help="Sup norm of the initial height (default: 0.0)",
    )
    physics_group.add_argument(
        "--perturbation.degree",
        type=int,
        help="Harmonic degree, or azimuthal wavenumber of a torus mode (default: 2)",
    )
    physics_group.add_argument(
        "--perturbation.order",
        type=int,
        help="Harmonic order, or poloidal wavenumber of a torus mode (default: 0)",
    )
    physics_group.add_argument(
        "--perturbation.seed",
        type=int,
        help="Seed of the random perturbation (default: 0)",
    )
    physics_group.add_argument(
        "--constraints.targets",
        choices=["reference", "initial"],
        help="Area and volume targets: the reference surface or the initial state",
    )

    flow_group = parser.add_argument_group(
        "Flow",
        description="Time stepping and stopping criteria",
    )
    flow_group.add_argument(
        "--flow.mobility",
        choices=["l2", "h-1"],
        help="Mobility of the gradient flow (default: l2)",
    )
    flow_group.add_argument(
        "--flow.mobility_length",
        type=float,
        help="Screening length of the h-1 mobility (default: 1.0)",
    )
    flow_group.add_argument("--flow.dt0", type=float, help="Initial step (default: 1e-3)")
    flow_group.add_argument(
        "--flow.dt_max",
        type=float,
        help="Largest step after growth (default: dt0)",
    )
    flow_group.add_argument(
        "--flow.dt_growth",
        type=float,
        help="Step growth factor after an accepted step (default: 1.0)",
    )
    flow_group.add_argument("--flow.t_end", type=float, help="Final time (default: 1.0)")
    flow_group.add_argument(
        "--flow.grad_tol",
        type=float,
        help="Stationarity tolerance on the projected gradient (default: 1e-6)",
    )
    flow_group.add_argument("--flow.max_steps", type=int, help="Step limit (default: 1000)")
    flow_group.add_argument(
        "--flow.max_halvings",
        type=int,
        help="Step halvings before a step fails (default: 8)",
    )
    flow_group.add_argument(
        "--flow.checkpoint_every",
        type=int,
        help="Write a checkpoint every N steps, 0 disables (default: 0)",
    )
    flow_group.add_argument(
        "--flow.snapshot_every",
        type=int,
        help="Keep heights every N steps for the convergence exponent (default: 0)",
    )

    analysis_group = parser.add_argument_group(
        "Analysis",
        description="Spectrum, decay fit and verification",
    )
    analysis_group.add_argument(
        "--spectrum.max_degree",
        type=int,
        help="Largest harmonic degree or wavenumber of the trial basis (default: 4)",
    )
    analysis_group.add_argument(
        "--spectrum.tol",
        type=float,
        help="Relative near-kernel threshold (default: 1e-6)",
    )
    analysis_group.add_argument(
        "--spectrum.include_conformal",
        type=_str_to_bool,
        help="Also report the conformal symmetry fields (default: false)",
    )
    analysis_group.add_argument(
        "--fit.f_inf",
        type=float,
        help="Known limit energy; the last ledger energy when unset",
    )
    analysis_group.add_argument(
        "--fit.min_records",
        type=int,
        help="Shortest usable decay window (default: 20)",
    )
    analysis_group.add_argument(
        "--verify.samples",
        type=int,
        help="Random directions per finite-difference check (default: 3)",
    )
    analysis_group.add_argument("--verify.seed", type=int, help="Random seed (default: 0)")
    analysis_group.add_argument(
        "--verify.suites",
        nargs="+",
        choices=list(SUITES),
        help="Suites to run (default: all)",
    )

    io_group = parser.add_argument_group(
        "Input/Output",
        description="Checkpoints, ledgers and exported surfaces",
    )
    io_group.add_argument(
        "--input.checkpoint",
        help="Start energy, flow or spectrum from this checkpoint",
    )
    io_group.add_argument("--input.ledger", help="Ledger CSV read by fit-decay")
    io_group.add_argument(
        "--output.dir",
        env_var=OUTPUT_DIR_ENV,
        help="Output directory (default: helfrichflow-output)",
    )
    io_group.add_argument(
        "--output.obj",
        type=_str_to_bool,
        help="Export the final flow surface as OBJ (default: false)",
    )
    io_group.add_argument(
        "--output.vtk",
        type=_str_to_bool,
        help="Export the final flow surface as legacy VTK (default: false)",
    )
    io_group.add_argument(
        "--output.rich_progress",
        type=_str_to_bool,
        help="Draw progress with rich instead of tqdm (default: true)",
    )
    return parser


def create_progress_handler(config: FlowConfig, total: int = 100):
    """Create a progress handler function based on the configuration.

    Returns:
        A tuple of (progress_context, progress_handler); the handler receives
        the keyword events of a ProgressMonitor.
    """
    if config.output.rich_progress:
        progress = Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
        )
        overall_task_id = progress.add_task("overall", total=total)
        stage_tasks = {}

        def progress_handler(**event):
            if event["type"] == "progress_start":
                if event["stage"] not in stage_tasks:
                    stage_tasks[event["stage"]] = progress.add_task(
                        event["stage"],
                        total=event.get("stage_total", 100),
                    )
            elif event["type"] in ("progress_update", "progress_end"):
                stage = event["stage"]
                if stage in stage_tasks:
                    progress.update(
                        stage_tasks[stage],
                        completed=event["stage_current"],
                        total=event["stage_total"],
                        refresh=True,
                    )
                progress.update(
                    overall_task_id,
                    completed=event["overall_progress"],
                    refresh=True,
                )

        return progress, progress_handler
    else:
        pbar = tqdm.tqdm(total=total, desc="overall")

        def progress_handler(**event):
            if event["type"] == "progress_update":
                pbar.update(event["overall_progress"] - pbar.n)
                pbar.set_description(
                    f"{event['stage']} ({event['stage_current']}/{event['stage_total']})",
                )
            elif event["type"] == "progress_end":
                pbar.update(event["overall_progress"] - pbar.n)
                pbar.set_description(f"{event['stage']} (Complete)")
                pbar.refresh()

        return pbar, progress_handler


def load_heights(config: FlowConfig) -> tuple[tuple[HeightField, ...], dict]:
    """Heights from ``input.checkpoint`` if given, else the configured start."""
    if config.input.checkpoint is not None:
        checkpoint = read_checkpoint(config.input.checkpoint)
        logger.info(
            f"Loaded checkpoint {config.input.checkpoint} "
            f"(t={checkpoint.state.t:.6g}, {len(checkpoint.state.heights)} components)"
        )
        return checkpoint.state.heights, checkpoint.metadata
    return config.initial_heights(), {}


def run_verify(config: FlowConfig, console: Console) -> int:
    surface = config.reference_surface()
    ctx = VerificationContext(
        surface=surface,
        grid=config.sample_grid(surface),
        params=config.physics_params(),
        samples=config.verify.samples,
        seed=config.verify.seed,
    )
    stage_name = "Run verification suites"
    progress_context, progress_handler = create_progress_handler(config)
    with progress_context:
        monitor = ProgressMonitor(
            [(stage_name, 1.0)], progress_change_callback=progress_handler
        )
        with monitor.stage_start(stage_name, len(config.verify.suites)) as stage:
            results = run_suites(ctx, config.verify.suites, stage)
    print_results(results, console)
    report = summary(results)
    report["surface"] = surface.describe()
    write_json(report, config.get_output_file_path("verify.json"))
    return EXIT_OK if all_passed(results) else EXIT_FAILURE


def run_energy(config: FlowConfig, console: Console) -> int:
    heights, _ = load_heights(config)
    params = config.physics_params()
    table = Table(title="Canham-Helfrich Energy")
    table.add_column("Component", justify="center", style="cyan")
    table.add_column("F", justify="right")
    table.add_column("A", justify="right")
    table.add_column("V", justify="right")
    table.add_column("Helfrich residual", justify="right")
    components = []
    for height in heights:
        geom = pullback_geometry(height)
        fit = helfrich_residual(geom, params)
        row = {
            "component": height.component,
            "energy": energy(geom, params),
            "area": area(geom),
            "volume": enclosed_volume(geom),
            "pressure": fit.pressure,
            "tension": fit.tension,
            "helfrich_residual": fit.residual_norm,
        }
        components.append(row)
        table.add_row(
            str(height.component),
            f"{row['energy']:.12g}",
            f"{row['area']:.12g}",
            f"{row['volume']:.12g}",
            f"{row['helfrich_residual']:.3e}",
        )
    console.print(table)
    total = sum(row["energy"] for row in components)
    console.print(f"Total energy F = {total:.15g}")
    write_json(
        {"total_energy": total, "components": components},
        config.get_output_file_path("energy.json"),
    )
    return EXIT_OK


def export_surfaces(config: FlowConfig, heights, prefix: str):
    if not (config.output.obj or config.output.vtk):
        return
    for height in heights:
        geom = pullback_geometry(height)
        mesh = surface_mesh(
            height.grid,
            geom.positions,
            height.surface.orientation,
            {"height": height.values, "mean_curvature": geom.mean_curvature},
        )
        name = f"{prefix}-{height.component}"
        if config.output.obj:
            write_obj(mesh, config.get_output_file_path(f"{name}.obj"))
        if config.output.vtk:
            write_vtk(mesh, config.get_output_file_path(f"{name}.vtk"))


def run_flow_command(config: FlowConfig, console: Console) -> int:
    heights, metadata = load_heights(config)
    settings = config.flow_settings()
    metadata = {**metadata, "config": config.model_dump(mode="json")}
    checkpoint_dir = config.get_output_file_path("checkpoints")

    def save_checkpoint(state):
        write_checkpoint(checkpoint_dir / f"step-{state.step_index:06d}.hfc", state, metadata)

    progress_context, progress_handler = create_progress_handler(config)
    with (
        progress_context,
        LedgerWriter(config.get_output_file_path("ledger.csv"), len(heights)) as ledger,
    ):
        monitor = ProgressMonitor(FLOW_STAGES, progress_change_callback=progress_handler)
        trajectory = run_flow(
            heights,
            settings,
            record_callback=ledger,
            checkpoint_callback=save_checkpoint,
            progress_monitor=monitor,
        )

    final = trajectory.final_state
    write_checkpoint(config.get_output_file_path("final.hfc"), final, metadata)
    export_surfaces(config, final.heights, "final")
    last = trajectory.records[-1]
    report = {
        "stop_reason": trajectory.stop_reason,
        "failure": trajectory.failure,
        "steps": final.step_index,
        "t": last.t,
        "energy": last.energy,
        "grad_l2": last.grad_l2,
        "grad_proxy": last.grad_proxy,
        "areas": last.areas,
        "volumes": last.volumes,
        "targets": [
            {"area": c.area, "volume": c.volume} for c in trajectory.targets.components
        ],
    }
    write_json(report, config.get_output_file_path("flow.json"))
    console.print(
        f"Flow stopped ({trajectory.stop_reason}) at t={last.t:.6g} after "
        f"{final.step_index} steps: F={last.energy:.12g}, |P grad|={last.grad_proxy:.3e}"
    )
    return EXIT_FAILURE if trajectory.failure else EXIT_OK


def run_spectrum(config: FlowConfig, console: Console) -> int:
    heights, _ = load_heights(config)
    if len(heights) != 1:
        raise ConfigError("spectrum analyses a single component")
    height = heights[0]
    geom = pullback_geometry(height)
    area_only = ComponentTargets(area(geom), enclosed_volume(geom)).round_sphere
    report = analyze_spectrum(
        geom,
        config.physics_params(),
        config.basis_spec(),
        tol=config.spectrum.tol,
        area_only=area_only,
        include_conformal=config.spectrum.include_conformal,
    )

    table = Table(title="Constrained Hessian Spectrum")
    table.add_column("#", justify="center", style="cyan")
    table.add_column("Eigenvalue", justify="right")
    table.add_column("Near kernel", justify="center")
    kernel = set(report.near_kernel.tolist())
    for i, value in enumerate(report.eigenvalues):
        table.add_row(str(i), f"{value:.6e}", "yes" if i in kernel else "")
    console.print(table)
    console.print(
        f"Near-kernel dimension {report.near_kernel_dimension}, "
        f"smallest transverse eigenvalue {report.smallest_transverse_eigenvalue}, "
        f"max principal angle {report.max_principal_angle}"
    )
    for warning in report.extra.get("warnings", []):
        console.print(f"[yellow]{warning}[/yellow]")
    write_json(report.to_dict(), config.get_output_file_path("spectrum.json"))
    return EXIT_OK


def run_fit_decay(config: FlowConfig, console: Console) -> int:
    if config.input.ledger is None:
        raise ConfigError("fit-decay needs a ledger: set input.ledger")
    ledger = read_ledger(config.input.ledger)
    fit = fit_decay(
        ledger["t"],
        ledger["F"],
        ledger["grad_proxy"],
        f_inf=config.fit.f_inf,
        min_records=config.fit.min_records,
    )
    table = Table(title="Decay Fit")
    table.add_column("Quantity", justify="left", style="cyan")
    table.add_column("Value", justify="right")
    for key, value in fit.to_dict().items():
        table.add_row(key, str(value))
    console.print(table)
    write_json(fit.to_dict(), config.get_output_file_path("decay.json"))
    return EXIT_OK


COMMAND_RUNNERS = {
    "verify": run_verify,
    "energy": run_energy,
    "flow": run_flow_command,
    "spectrum": run_spectrum,
    "fit-decay": run_fit_decay,
}


def main(argv: list[str] | None = None) -> int:
    """Run one command; returns the process exit code.

    0 on success, 1 for domain errors and failed verification, 2 for
    configuration errors.
    """
    parser = create_parser()
    try:
        args: Any = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = FlowConfig.from_flat(vars(args))
    except ValidationError as e:
        logger.error(f"Invalid configuration:\n{e}")
        return EXIT_CONFIG

    console = Console()
    with MemoryMonitor(args.command):
        try:
            return COMMAND_RUNNERS[args.command](config, console)
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            return EXIT_CONFIG
        except HelfrichFlowError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return EXIT_FAILURE


def cli():
    """Command line interface entry point."""
    from rich.logging import RichHandler

    logging.basicConfig(level=logging.INFO, handlers=[RichHandler()])
    sys.exit(main())


if __name__ == "__main__":
    cli()
