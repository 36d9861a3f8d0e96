"""Shared variables."""

import math
import os

### Parallelism ###
THREADS_ENV_VAR = "QP_THREADS"


def max_threads() -> int:
    """Worker cap for ordered parallel maps, read from the environment at call time."""
    raw = os.getenv(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return os.cpu_count() or 1


### Evaluation ###
CANCELLATION_THRESHOLD = 1e-13  # relative to the largest combined coefficient
SUP_GRID_DIVISIONS = 512  # default sup_diff pitch is window diameter / this

### Zero finding ###
TOL_ZERO = 1e-12
TOL_CLUSTER = 1e-8
BOUNDARY_CLEARANCE = 1e-9
INITIAL_SIDE_SAMPLES = 64
MAX_PHASE_DOUBLINGS = 20
MAX_SEGMENT_REFINEMENTS = 40
PHASE_STEP_LIMIT = math.pi / 2
ROUNDING_MARGIN = 0.25
JITTER_RETRIES = 5
JITTER_FRACTION = 1e-3  # gamma for the top-level jitter, as a fraction of the shorter side
SPLIT_JITTER_FRACTION = 0.05  # gamma for split-line jitter, as a fraction of the cell's shorter side
NEWTON_MAX_ITER = 60
NEWTON_RESTARTS = 5
NEWTON_MAX_HALVINGS = 40
CLUSTER_NOISE_DIAMETER = 1e-6  # below this, a multi-zero cell that cannot be counted is a cluster
MAX_SUBDIVISION_DEPTH = 64

### Divisors ###
DEDUP_TOL = 1e-12
GAMMA_CAP = 0.5
SCAN_REFINE_XATOL = 1e-12

### Periods ###
TOL_REAL_PERIOD = 1e-8
TOL_PROPAGATION = 1e-8
TOL_VERIFY_PERIOD = 1e-8
Q_MAX = 10**6
R_MARGIN = 3.0  # |Im(z - w)| < 2R + 3
SLAB_HEIGHT_FACTOR = 3.0
SLAB_OVERLAP_FACTOR = 1.0

### Factorization ###
DEFAULT_BUDGET = 1e-6
LINE_CLUSTER_TOL = 10 * TOL_CLUSTER
EXCLUSION_RADIUS = 10 * TOL_CLUSTER
SPACING_RTOL = 1e-6
SPECTRUM_TOL = 1e-8
ZERO_MATCH_TOL = 1e-6
OFFSET_BOUNDARY_TOL = 1e-9
QUOTIENT_GRID = 128
TAIL_SAMPLES = 10_000

### Generators ###
MP_DPS = 40  # decimal digits for exact-construction arithmetic
ALPHA_WHITELIST = {
    "sqrt2": "sqrt(2)",
    "sqrt3": "sqrt(3)",
    "golden": "(1 + sqrt(5))/2",
    "inv_sqrt2": "1/sqrt(2)",
}
EXAMPLE1_READING = (
    "z_{n,k} = i*n*2^k + 2^k (column k has exact period 2^k); the alternative reading Im z = 2^{nk} "
    "is not closed under any vertical translation and is not implemented"
)

### CLI ###
DEFAULT_EPS = 0.05
DEFAULT_TAU_FRACTION = 0.25  # default tau_max is this fraction of the window height
GAP_TREND_SCALES = (0.25, 1.0)
GAP_DROP_FACTOR = 2.0
EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
VERDICT_PERIODIC = "PERIODIC"
VERDICT_NON_DISCRETE = "NO_DISCRETE_DIFFERENCES"
VERDICT_INCONCLUSIVE = "INCONCLUSIVE"
