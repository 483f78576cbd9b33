"""
Purpose: Constants for the thermalnn package
"""

# Measurement files
PROFILE_ID_COLUMN = "profile_id"
CSV_ENCODING = "utf-8"

# Raw voltage/current components of the public motor dataset
U_D = "u_d"
U_Q = "u_q"
I_D = "i_d"
I_Q = "i_q"
U_S = "u_s"
I_S = "i_s"
VECTOR_NORM_COMPONENTS = {U_S: (U_D, U_Q), I_S: (I_D, I_Q)}

# Default channel layout (public motor dataset)
MOTOR_SPEED = "motor_speed"
AMBIENT = "ambient"
COOLANT = "coolant"
DEFAULT_EXOGENOUS = (U_S, I_S, MOTOR_SPEED)
DEFAULT_ANCILLARY = (AMBIENT, COOLANT)
DEFAULT_TARGETS = ("pm", "stator_yoke", "stator_tooth", "stator_winding")

# Normalization divisors in channel units. Motor speed is given in 1/min, so dividing by
# 6000 1/min equals dividing the angular frequency by 2*pi*6000 1/min.
CURRENT_DIVISOR = 100.0
VOLTAGE_DIVISOR = 130.0
SPEED_DIVISOR = 6000.0
TEMPERATURE_DIVISOR = 100.0
DEFAULT_DIVISORS = {
    U_S: VOLTAGE_DIVISOR,
    I_S: CURRENT_DIVISOR,
    MOTOR_SPEED: SPEED_DIVISOR,
}
DEFAULT_SAMPLE_TIME = 0.5

# Fold roles
ROLE_TRAIN = "train"
ROLE_FOLD_1 = "fold-1"
ROLE_FOLD_2 = "fold-2"
ROLE_GENERALIZATION = "generalization"
FOLD_ROLES = (ROLE_TRAIN, ROLE_FOLD_1, ROLE_FOLD_2, ROLE_GENERALIZATION)
# Cross-validation iterations: 1 validates on fold-1 and tests on fold-2, 2 swaps them
FOLD_ITERATIONS = (1, 2)

# Activation names
SIGMOID = "sigmoid"
TANH = "tanh"
LINEAR = "linear"
RELU = "relu"
BIASED_ELU = "biased_elu"
SINUS = "sinus"

# Model dynamics
DIVERGENCE_BOUND = 10.0
DEFAULT_THETA_C_MEAN = -3.0
DEFAULT_THETA_C_STD = 0.1

# Optimizers
ADAM = "adam"
NADAM = "nadam"
SGD_MOMENTUM = "sgd_momentum"
OPTIMIZERS = (ADAM, NADAM, SGD_MOMENTUM)
BETA_1 = 0.9
BETA_2 = 0.999
EPSILON = 1e-8
MOMENTUM = 0.9

# Training defaults
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_TBPTT_LENGTH = 1227
DEFAULT_CLIP_THRESHOLD = 1.0
DEFAULT_MAX_EPOCHS = 100
DEFAULT_PATIENCE = 10
MAX_DIVERGED_WINDOW_SHARE = 0.5

# Plant
PLANT_INSTABILITY_BOUND = 1e3
DEFAULT_SUBSTEPS = 10
CONSTANT = "constant"
AFFINE_SPEED = "affine_speed"
POLY_STATE = "poly_state"
QUADRATIC_CURRENT = "quadratic_current"
CONDUCTANCE_KINDS = (CONSTANT, AFFINE_SPEED, POLY_STATE)
LOSS_KINDS = (CONSTANT, QUADRATIC_CURRENT)

# Analysis
GROUND_TRUTH = "ground_truth"
FIXED = "fixed"
INIT_MODES = (GROUND_TRUTH, AMBIENT, FIXED)
MEDIAN_INPUT_LOW = 0.0
MEDIAN_INPUT_HIGH = 1.3
DEFAULT_MSE_CUTOFF = 5.0
DEFAULT_MEDIAN_SAMPLES = 1000
RECOVERY_BAND = 10.0
DEFAULT_OFFSETS = (-30.0, -20.0, -10.0, 10.0, 20.0, 30.0)
DEFAULT_LAYER_RANGE = (1, 3)
DEFAULT_MAX_UNITS = 128

# Failure handling
RAISE = "raise"
RECORD = "record"
WARN = "warn"

# Model file
MODEL_FORMAT = "thermalnn-model"
MODEL_FORMAT_VERSION = 1
JSON_FORMAT = "format"
JSON_FORMAT_VERSION = "format_version"
JSON_SCHEMA = "schema"
JSON_TOPOLOGY = "topology"
JSON_PARAMETERS = "parameters"
JSON_SHAPE = "shape"
JSON_DATA = "data"
JSON_METADATA = "metadata"

# Config file
ENV_PREFIX = "TNN_"
SECTION_SCHEMA = "schema"
SECTION_FOLDS = "folds"
SECTION_TOPOLOGY = "topology"
SECTION_TRAIN = "train"
SECTION_PLANT = "plant"
SECTION_ANALYSIS = "analysis"
CONFIG_SECTIONS = (
    SECTION_SCHEMA,
    SECTION_FOLDS,
    SECTION_TOPOLOGY,
    SECTION_TRAIN,
    SECTION_PLANT,
    SECTION_ANALYSIS,
)

# Output files
MEASUREMENTS_FILENAME = "measurements.csv"
TRUTH_FILENAME = "truth.csv"
MANIFEST_FILENAME = "manifest.json"
LOG_FOLDER_NAME = "ThermalNNLogs"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3
EXIT_TRAINING_FAILURE = 4
EXIT_ACCEPTANCE_FAILURE = 5
