"""
utils/qcore/qcore_constants.py
Numerical tolerances, report schemas and builtin names for the merging toolkit.
"""

from typing import Dict, Final, List

TOOLKIT_NAME: Final[str] = "merge-toolkit"
TOOLKIT_VERSION: Final[str] = "1.0.0"

# Tolerances
TOL_HERMITIAN: Final[float] = 1e-10
TOL_PSD: Final[float] = 1e-10
TOL_TRACE: Final[float] = 1e-10
TOL_NORM: Final[float] = 1e-10
TOL_COMPLETENESS: Final[float] = 1e-10
TOL_BALL: Final[float] = 1e-9

# Global rank / support cutoff (relative to the largest eigenvalue)
RANK_CUTOFF: Final[float] = 1e-10

# Outcomes below this probability carry zero weight
ZERO_PROBABILITY: Final[float] = 1e-12

# Bit costs within this distance of an integer are snapped before ceiling
COST_SNAP: Final[float] = 1e-6

# SDP defaults
SDP_DEFAULT_TOL: Final[float] = 1e-8
SDP_DEFAULT_MAX_ITER: Final[int] = 200
# Backend stopping tolerance never goes below this
SDP_BACKEND_TOL_FLOOR: Final[float] = 1e-9
SDP_SOLVERS: Final[List[str]] = ["CLARABEL", "SCS"]
SDP_STATUSES: Final[List[str]] = ["optimal", "max-iterations", "infeasible"]

# Bisection oracles
BISECTION_TOL: Final[float] = 1e-9
BISECTION_MAX_STEPS: Final[int] = 200

# Entropy methods
METHODS: Final[List[str]] = ["closed-form", "eigen", "sdp", "bisection", "heuristic", "unbounded"]

# Decoupling defaults
DEFAULT_SAMPLES: Final[int] = 2000
STDERR_GATE: Final[float] = 3.0
MEAN_STATE_CONSTANT: Final[float] = 5.0

# Protocol / experiment limits
DEFAULT_MAX_PROTOCOL_DIM: Final[int] = 2 ** 24
DEFAULT_CONVERGENCE_MAX_DIM: Final[int] = 256

# Builtin states
BUILTIN_STATES: Final[List[str]] = ["bell", "ghz", "product", "w"]
DEFAULT_SPLIT: Final[List[str]] = ["A", "B", "R"]

# CLI commands
COMMANDS: Final[List[str]] = [
    "entropy", "smooth", "duality", "decouple", "merge", "converse", "convergence"
]
STOCHASTIC_COMMANDS: Final[List[str]] = ["decouple", "merge", "converse"]

# CSV schemas
ENTROPY_COLUMNS: Final[List[str]] = [
    "state_id", "quantity", "conditioning", "value_bits", "method", "gap"
]
CONVERGENCE_COLUMNS: Final[List[str]] = [
    "n", "eps", "value_bits_per_copy", "target_bits", "gap"
]
DECOUPLING_COLUMNS: Final[List[str]] = [
    "d_A", "L", "N", "state_id", "samples", "mean", "stderr",
    "bound_h2", "bound_hmin", "margin"
]
MERGE_COLUMNS: Final[List[str]] = [
    "state_id", "seed", "K", "L", "cost_bits", "design_eps", "condition_value",
    "error", "guarantee", "lower_bound_at_error", "slack"
]
CSV_FLOAT_FORMAT: Final[str] = "%.12g"

# Output file names
REPORT_FILES: Final[Dict[str, str]] = {
    "entropy": "entropies.csv",
    "smooth": "entropies.csv",
    "duality": "entropies.csv",
    "decouple": "decoupling.csv",
    "merge": "merge_runs.csv",
    "converse": "merge_runs.csv",
    "convergence": "convergence.csv",
}
MANIFEST_FILE: Final[str] = "manifest.json"
ERROR_FILE: Final[str] = "error.json"

# Cost planning modes of the merging protocol
PLAN_MODES: Final[List[str]] = ["nonsmooth", "smooth", "corollary"]
