from pathlib import Path

__version__ = "0.1.0"

OUTPUT_DIR_ENV = "HELFRICHFLOW_OUTPUT_DIR"

DEFAULT_OUTPUT_DIR = Path("helfrichflow-output")

# Smallest resolution the spectral stencils are validated for.
MIN_RESOLUTION = 8

# Axisymmetric grids keep a handful of azimuthal nodes so that the same
# two-dimensional code paths apply.
AXISYMMETRIC_N_V = 8

# Relative tolerance of the isoperimetric equality A^3 = 36 pi V^2 used to
# recognise round-sphere constraint targets.
ROUND_SPHERE_RTOL = 1e-8

CONSTRAINT_RTOL = 1e-10
NEWTON_MAX_ITERATIONS = 25

# Accepted steps may increase the energy by at most this fraction of |F|.
ENERGY_INCREASE_RTOL = 1e-12

CHECKPOINT_FORMAT = "helfrichflow-checkpoint"
CHECKPOINT_VERSION = 1
