"""Versioned flow checkpoints.

A checkpoint is a msgpack map compressed with zstd. Height values are stored
as raw little-endian float64 bytes so that a round trip is bit-exact::

    {
      "format": "helfrichflow-checkpoint", "version": 1,
      "surface": {"kind": ..., "radius" | "major", "minor": ...},
      "grid": {"n_u": ..., "n_v": ..., "axisymmetric": ...},
      "t": ..., "dt": ..., "step_index": ...,
      "components": [{"component": i, "values": <bytes>}, ...],
      "metadata": {...}
    }
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import msgpack
import numpy as np
import pyzstd

from helfrichflow.const import CHECKPOINT_FORMAT
from helfrichflow.const import CHECKPOINT_VERSION
from helfrichflow.dynamics.flow import FlowState
from helfrichflow.geometry.graphgeom import HeightField
from helfrichflow.geometry.grid import Grid
from helfrichflow.geometry.grid import sample_grid
from helfrichflow.geometry.refsurf import ReferenceSurface
from helfrichflow.geometry.refsurf import make_reference
from helfrichflow.helfrichflow_exception.HelfrichFlowException import (
    CheckpointFormatError,
)
from helfrichflow.helfrichflow_exception.HelfrichFlowException import OutputError

logger = logging.getLogger(__name__)

VALUE_DTYPE = "<f8"


@dataclass(frozen=True, eq=False)
class Checkpoint:
    surface: ReferenceSurface
    grid: Grid
    state: FlowState
    metadata: dict = field(default_factory=dict)


def encode_checkpoint(state: FlowState, metadata: dict | None = None) -> bytes:
    first = state.heights[0]
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "surface": first.surface.describe(),
        "grid": {
            "n_u": first.grid.n_u,
            "n_v": first.grid.n_v,
            "axisymmetric": first.grid.axisymmetric,
        },
        "t": float(state.t),
        "dt": float(state.dt),
        "step_index": int(state.step_index),
        "components": [
            {
                "component": h.component,
                "values": np.ascontiguousarray(h.values, dtype=VALUE_DTYPE).tobytes(),
            }
            for h in state.heights
        ],
        "metadata": metadata or {},
    }
    return pyzstd.compress(msgpack.packb(payload, use_bin_type=True))


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Rebuild the reference surface, grid and flow state of a checkpoint.

    Raises:
        CheckpointFormatError: corrupt data, foreign format or unknown version.
    """
    try:
        payload = msgpack.unpackb(pyzstd.decompress(data), raw=False)
    except (pyzstd.ZstdError, ValueError, TypeError) as e:
        raise CheckpointFormatError(f"Checkpoint is not readable: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError("Not a helfrichflow checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"Unsupported checkpoint version {payload.get('version')}, "
            f"expected {CHECKPOINT_VERSION}"
        )

    try:
        surface = make_reference(**payload["surface"])
        grid_info = payload["grid"]
        grid = sample_grid(
            surface,
            grid_info["n_u"],
            grid_info["n_v"],
            axisymmetric=grid_info["axisymmetric"],
        )
        heights = []
        for entry in payload["components"]:
            values = np.frombuffer(entry["values"], dtype=VALUE_DTYPE)
            heights.append(
                HeightField(
                    surface,
                    grid,
                    values.reshape(grid.shape).astype(float),
                    entry["component"],
                )
            )
        state = FlowState(
            t=payload["t"],
            heights=tuple(heights),
            dt=payload["dt"],
            step_index=payload["step_index"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"Malformed checkpoint: {e}") from e
    return Checkpoint(surface, grid, state, payload.get("metadata", {}))


def write_checkpoint(path: Path, state: FlowState, metadata: dict | None = None):
    path = Path(path)
    data = encode_checkpoint(state, metadata)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise OutputError(f"Cannot write checkpoint {path}: {e}", path) from e
    logger.debug(f"Checkpoint written to {path} (t={state.t:.6g})")


def read_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)
