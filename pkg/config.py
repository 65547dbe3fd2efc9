import os

import numpy as np
from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


# Manifold tolerances
FEAS_TOL = 1e-8               # ‖X^T J X − J‖_F accepted for a SymplecticPoint
RETRACTION_FEAS_TOL = 1e-9    # drift above this triggers one SR re-symplecticization
TANGENCY_TOL = 1e-8           # ‖X^T J Z + Z^T J X‖_F ≤ TANGENCY_TOL·(1 + ‖Z‖_F)
SPD_SYM_TOL = 1e-12           # relative asymmetry accepted for spd inputs
SR_BREAKDOWN_TOL = 1e-13      # SGS pivot threshold, relative to ‖A‖_F
SINGULAR_COND = 1e14          # condition estimate above which a matrix counts as singular
RANDOM_POINT_RETRIES = 5

# Debug mode: tangency checks on every metric / Hessian input
DEBUG_CHECKS = _env_flag("SSN_DEBUG_CHECKS", False)

# Metric defaults
RHO = 1.0                     # canonical-like metric parameter

# Non-monotone line search (RGD)
LS_ALPHA = 0.85               # Zhang–Hager reference decay
LS_BETA = 1e-4                # sufficient decrease
LS_DELTA = 0.5                # backtracking factor
LS_GAMMA0 = 1e-3              # first trial step
LS_GAMMA_MIN = 1e-15
LS_GAMMA_MAX = 1e5

# Newton phase
NEWTON_ETA = 1e-3             # forcing term cap
NEWTON_MU = 0.5               # forcing term exponent
DAMPING_DELTA = 0.2           # monotone backtracking factor for Newton steps
EXACT_KRYLOV_ETA = 1e-12      # forcing used when an "exact" solve goes through Krylov
DIRECT_RESIDUAL_TOL = 1e-8    # relative residual a direct Newton solve must reach
DESCENT_TOL = 1e-12           # g(Z, grad) > −DESCENT_TOL·‖Z‖‖grad‖ → gradient fallback
DIRECT_MAX_SIZE = 2500        # 4nk above this: "exact" Newton goes through Krylov instead of the dense saddle
NEWTON_STALL_RATIO = 0.9      # ‖grad‖ must fall below this fraction of its best Newton-phase value
NEWTON_STALL_WINDOW = 20      # ... at least once every this many iterations, else stagnated

# Stopping
TOL = 1e-8                    # relative gradient norm target
THETA = 1e-3                  # hybrid switch threshold (relative)
MXIT = 5000

# Finite-difference oracles
FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)   # central-difference step before scaling

# Reproducibility
DEFAULT_SEED = 0

# Bench
WORKERS = int(os.getenv("SSN_WORKERS", "1"))
LOG_LEVEL = os.getenv("SSN_LOG_LEVEL", "WARNING")

# Paths
CONFIGS_DIR = "configs"
RESULTS_DIR = os.getenv("SSN_RESULTS_DIR", "results")
HISTORY_DIRNAME = "history"

for d in [CONFIGS_DIR, RESULTS_DIR]:
    os.makedirs(d, exist_ok=True)
