"""
Runtime settings for the DRLP toolkit.

Values come from the environment (a local .env is loaded first), so a run can
be tuned without touching code:

    DRLP_FEASIBILITY_TOL=1e-8 python cli.py solve --instance inst.json
"""

import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

APP_VERSION = "1.0"

BASE_DIR = os.path.abspath(os.path.dirname(__file__))
TEMPLATE_DIR = os.path.join(BASE_DIR, "templates")


def _env_float(name: str, default: str) -> float:
    return float(os.environ.get(name, default))


def _env_int(name: str, default: str) -> int:
    return int(os.environ.get(name, default))


def _env_flag(name: str, default: str = "false") -> bool:
    return os.environ.get(name, default).lower() in ("1", "true", "yes")


# --- Solver tolerances ---
FEASIBILITY_TOL = _env_float("DRLP_FEASIBILITY_TOL", "1e-7")
OPTIMALITY_TOL = _env_float("DRLP_OPTIMALITY_TOL", "1e-7")
INTEGRALITY_TOL = _env_float("DRLP_INTEGRALITY_TOL", "1e-6")
MILP_GAP = _env_float("DRLP_MILP_GAP", "1e-6")
PIVOT_TOL = _env_float("DRLP_PIVOT_TOL", "1e-9")
LP_MAX_ITERATIONS = _env_int("DRLP_LP_MAX_ITERATIONS", "50000")
BB_MAX_NODES = _env_int("DRLP_BB_MAX_NODES", "200000")
SOLVER = os.environ.get("DRLP_SOLVER", "reference")

# --- Enumeration caps ---
MAX_VERTICES = _env_int("DRLP_MAX_VERTICES", str(2 ** 16))
ENUMERATION_LIMIT = _env_int("DRLP_ENUMERATION_LIMIT", "256")
EXACT_SCENARIO_CAP = _env_int("DRLP_EXACT_SCENARIO_CAP", "2000")

# --- Algorithm settings ---
RHO = _env_float("DRLP_RHO", "1e-6")
BETA = _env_float("DRLP_BETA", "100")
MAX_ITERATIONS = _env_int("DRLP_MAX_ITERATIONS", "1000")
POLICY_BOUND = _env_float("DRLP_POLICY_BOUND", "1e6")
THREADS = _env_int("DRLP_THREADS", "1")

# --- Experiments ---
HOLDOUT_SPLIT = _env_float("DRLP_HOLDOUT_SPLIT", "0.75")
TIMING_REPEATS = _env_int("DRLP_TIMING_REPEATS", "5")

# --- Output ---
LOG_LEVEL = os.environ.get("DRLP_LOG_LEVEL", "INFO")
EXPORT_LP_DIR = os.environ.get("DRLP_EXPORT_LP_DIR") or None
AUDIT_VERTICES = _env_flag("DRLP_AUDIT_VERTICES", "true")
