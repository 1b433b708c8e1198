import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import orjson

from helfrichflow.dynamics.flow import Trajectory
from helfrichflow.dynamics.flow import TrajectoryRecord
from helfrichflow.geometry.grid import Grid
from helfrichflow.helfrichflow_exception.HelfrichFlowException import OutputError

logger = logging.getLogger(__name__)

JSON_OPTIONS = (
    orjson.OPT_APPEND_NEWLINE
    | orjson.OPT_INDENT_2
    | orjson.OPT_SORT_KEYS
    | orjson.OPT_SERIALIZE_NUMPY
)


def ledger_header(n_components: int) -> list[str]:
    header = ["t", "F", "grad_l2", "grad_proxy"]
    for i in range(n_components):
        header.extend([f"area_{i}", f"vol_{i}"])
    header.extend(["dissipation", "dt"])
    return header


def format_number(x: float) -> str:
    return f"{float(x):.17g}"


class LedgerWriter:
    """Stream trajectory records to a CSV ledger as they are produced."""

    def __init__(self, path: Path, n_components: int):
        self.path = Path(path)
        self.n_components = n_components
        self.rows = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.file = self.path.open("w", newline="", encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Cannot open ledger {self.path}: {e}", self.path) from e
        self.writer = csv.writer(self.file, lineterminator="\n")
        self.writer.writerow(ledger_header(n_components))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def __call__(self, record: TrajectoryRecord):
        self.write(record)

    def write(self, record: TrajectoryRecord):
        try:
            self.writer.writerow([format_number(x) for x in record.ledger_row()])
            self.file.flush()
        except OSError as e:
            raise OutputError(f"Cannot write ledger {self.path}: {e}", self.path) from e
        self.rows += 1

    def close(self):
        if not self.file.closed:
            self.file.close()
            logger.debug(f"Ledger {self.path} closed after {self.rows} rows")


def write_ledger(trajectory: Trajectory, path: Path) -> Path:
    with LedgerWriter(path, len(trajectory.targets)) as writer:
        for record in trajectory.records:
            writer.write(record)
    return Path(path)


def read_ledger(path: Path) -> dict[str, np.ndarray]:
    """Columns of a ledger CSV keyed by header name."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or reader.fieldnames[:4] != [
                "t",
                "F",
                "grad_l2",
                "grad_proxy",
            ]:
                raise OutputError(f"{path} is not a flow ledger", path)
            rows = list(reader)
            names = list(reader.fieldnames)
    except OSError as e:
        raise OutputError(f"Cannot read ledger {path}: {e}", path) from e
    return {name: np.array([float(row[name]) for row in rows]) for name in names}


def dumps_json(data) -> bytes:
    return orjson.dumps(data, option=JSON_OPTIONS)


def write_json(data, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(dumps_json(data))
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}", path) from e
    logger.info(f"Wrote {path}")
    return path


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    point_data: dict[str, np.ndarray]

    @property
    def euler_characteristic(self) -> int:
        edges = np.sort(
            np.concatenate(
                [
                    self.triangles[:, [0, 1]],
                    self.triangles[:, [1, 2]],
                    self.triangles[:, [2, 0]],
                ]
            ),
            axis=1,
        )
        n_edges = len(np.unique(edges, axis=0))
        return len(self.vertices) - n_edges + len(self.triangles)


def surface_mesh(
    grid: Grid,
    positions: np.ndarray,
    orientation: float = 1.0,
    scalars: dict[str, np.ndarray] | None = None,
) -> SurfaceMesh:
    """Triangulate the closed grid surface with outward-facing triangles.

    Every quad is split along the same diagonal. Sphere grids are closed with
    one vertex per pole, interpolated from the grid.
    """
    n_u, n_v = grid.shape
    scalars = scalars or {}
    vertices = np.reshape(np.moveaxis(positions, 0, -1), (n_u * n_v, 3))
    point_data = {name: np.ravel(values) for name, values in scalars.items()}

    def node(i, j):
        return i * n_v + j % n_v

    triangles = []
    u_quads = n_u if grid.periodic[0] else n_u - 1
    for i in range(u_quads):
        i1 = (i + 1) % n_u
        for j in range(n_v):
            a, b, c, d = node(i, j), node(i1, j), node(i1, j + 1), node(i, j + 1)
            triangles.append((a, b, c))
            triangles.append((a, c, d))

    if grid.pole_handling:
        north, south = grid.pole_values(positions)
        vertices = np.vstack([vertices, north, south])
        north_index, south_index = n_u * n_v, n_u * n_v + 1
        for j in range(n_v):
            triangles.append((north_index, node(0, j), node(0, j + 1)))
            triangles.append((south_index, node(n_u - 1, j + 1), node(n_u - 1, j)))
        for name, values in scalars.items():
            pole_n, pole_s = grid.pole_values(values)
            point_data[name] = np.concatenate([point_data[name], [pole_n, pole_s]])

    triangles = np.array(triangles, dtype=np.int64)
    if orientation < 0:
        triangles = triangles[:, ::-1]
    return SurfaceMesh(vertices, triangles, point_data)


def write_obj(mesh: SurfaceMesh, path: Path) -> Path:
    path = Path(path)
    lines = [f"# helfrichflow surface: {len(mesh.vertices)} vertices"]
    lines.extend(f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices)
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}", path) from e
    logger.info(f"Wrote {path}")
    return path


def write_vtk(mesh: SurfaceMesh, path: Path, title: str = "helfrichflow surface") -> Path:
    """Legacy ASCII VTK polydata with per-vertex scalars."""
    path = Path(path)
    n_points = len(mesh.vertices)
    n_cells = len(mesh.triangles)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {n_points} double",
    ]
    lines.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices)
    lines.append(f"POLYGONS {n_cells} {4 * n_cells}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    if mesh.point_data:
        lines.append(f"POINT_DATA {n_points}")
        for name, values in mesh.point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(format_number(x) for x in values)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}", path) from e
    logger.info(f"Wrote {path}")
    return path
