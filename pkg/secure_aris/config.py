"""
Configuration settings for the robust aerial-RIS secrecy simulator
"""
import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(f"SECURE_ARIS_{name}", default))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(f"SECURE_ARIS_{name}", default))


def _env_str(name: str, default: str) -> str:
    return os.getenv(f"SECURE_ARIS_{name}", default)


# Console output
VERBOSE = _env_str("VERBOSE", "0") not in ("0", "", "false", "False")

# File paths
RESULTS_DIR = _env_str("RESULTS_DIR", "results")
EXPERIMENT_SPECS_DIR = _env_str("EXPERIMENT_SPECS_DIR", "experiments")

# Network geometry (meters)
AREA_BOUNDS = (0.0, 400.0, 0.0, 400.0)  # x_min, x_max, y_min, y_max
SOURCE_POSITION = (0.0, 0.0)
DESTINATION_POSITION = (350.0, 0.0)
EAVESDROPPER_CENTER = (300.0, 300.0)
EAVESDROPPER_RADIUS = 50.0
FIXED_RIS_POSITION = (100.0, 150.0, 50.0)
ARIS_ALTITUDE = 150.0
GROUND_HEIGHT = 0.0
REFERENCE_DISTANCE = 1.0

# Radio constants (as stated in dB/dBm, converted once by the scenario module)
RICIAN_FIXED_DB = 3.0
RICIAN_ARIS_DB = 10.0
PLE_FIXED = 2.6
PLE_ARIS = 2.2
PLE_AIR = 2.0
PATH_LOSS_REF_DB = 20.0
SOURCE_POWER_DBM = 30.0
JAM_POWER_DBM = 25.0
NOISE_POWER_DBM = -110.0

# Array sizes
N_FIXED = 50
N_ARIS = 50
N_JAM_ANTENNAS = 4
N_EAVESDROPPERS = 3

# Desk-scale sizes used by the acceptance suite
DESK_N_FIXED = 8
DESK_N_ARIS = 8
DESK_N_JAM_ANTENNAS = 2
DESK_N_EAVESDROPPERS = 2

# Channel uncertainty
UNCERTAINTY_COEFF = 0.01
DEFAULT_SEED = _env_int("SEED", 2024)

# Conic backend
SOLVER = _env_str("SOLVER", "CLARABEL")
FALLBACK_SOLVER = _env_str("FALLBACK_SOLVER", "SCS")
SOLVER_TOLERANCE = _env_float("SOLVER_TOLERANCE", 1e-8)
SOLVER_MAX_ITERS = _env_int("SOLVER_MAX_ITERS", 500)
HERMITIAN_TOLERANCE = 1e-9

# BCD / SCA / lemma loops
BCD_MAX_OUTER = _env_int("BCD_MAX_OUTER", 20)
BCD_TOLERANCE = _env_float("BCD_TOLERANCE", 1e-4)
SCA_TOLERANCE = _env_float("SCA_TOLERANCE", 1e-4)
SCA_MAX_ROUNDS = _env_int("SCA_MAX_ROUNDS", 30)
LEMMA_MAX_ROUNDS = _env_int("LEMMA_MAX_ROUNDS", 30)
LEMMA_TOLERANCE = _env_float("LEMMA_TOLERANCE", 1e-5)
ASCENT_SLACK = 1e-6
INIT_RETRIES = 5

# Unit-modulus penalty schedule
PENALTY_INITIAL = 10.0
PENALTY_GROWTH = 2.0
PENALTY_MAX = 1e4
PENALTY_SLACK_TOLERANCE = 1e-4

# Adversarial worst-case search
WORST_CASE_SAMPLES = _env_int("WORST_CASE_SAMPLES", 2000)
WORST_CASE_SEEDS = 10
WORST_CASE_STEPS = _env_int("WORST_CASE_STEPS", 200)
WORST_CASE_STEP_FRACTION = 1e-2

# Exhaustive oracle
ORACLE_MAX_EVALUATIONS = 1e8
ORACLE_CHUNK = 1 << 16

# Deployment learning (DDPG)
RL_EPISODES = _env_int("RL_EPISODES", 2000)
RL_EPOCHS_PER_EPISODE = _env_int("RL_EPOCHS_PER_EPISODE", 50)
RL_BUFFER_SIZE = 20000
RL_BATCH_SIZE = 256
RL_WARMUP = _env_int("RL_WARMUP", 5000)
RL_ACTOR_LR = 1e-4
RL_CRITIC_LR = 1e-4
RL_DISCOUNT = 0.95
RL_SOFT_UPDATE = 0.005
RL_HIDDEN = (128, 128)
RL_MAX_STEP = 10.0  # meters per epoch
RL_NOISE_START = 0.3
RL_NOISE_END = 0.02
RL_INNER_OUTER_ITERS = 3
RL_INNER_SCA_ROUNDS = 5
RL_INNER_LEMMA_ROUNDS = 5

# Experiment harness
EXPERIMENT_SEEDS = 20
EXPERIMENT_FAILURE_LIMIT = 0.10
EXPERIMENT_WORKERS = _env_int("WORKERS", 1)
RESULTS_SCHEMA_VERSION = "1"

# Fixed-RIS sites studied for deployment (meters, with height)
FIXED_RIS_CASES = [
    (100.0, 150.0, 50.0),
    (150.0, 250.0, 50.0),
    (250.0, 50.0, 50.0),
]
