# src/config.py

# Imputation run defaults (overridden by the config JSON "engine" section, then by CLI flags)
DEFAULT_M = 10
DEFAULT_BURN_IN_CYCLES = 10
DEFAULT_BETWEEN_CYCLES = 5 # Only used in single-chain-thinned mode
DEFAULT_CHAIN_MODE = "independent-chains" # or "single-chain-thinned"
DEFAULT_SEED = 20130101
DEFAULT_THREADS = 1

# Forward selection
MIN_R2_INCREASE = 0.005
MAX_PREDICTORS = 10
COLLINEARITY_TOL = 1e-6 # Relative residual norm below which a design column is dropped

# Regression fitting
IRLS_TOL = 1e-8 # Mean absolute score
IRLS_MAX_ITER = 50
SEPARATION_RIDGE = 1e-4 # Penalty on non-intercept terms when separation is detected
SEPARATION_COEF_LIMIT = 25.0 # |beta| beyond this on the logit/log scale counts as diverging
MIN_ROWS_ABOVE_PREDICTORS = 5 # A model needs n >= p + this, otherwise intercept-only
LINEAR_PREDICTOR_CLAMP = 30.0
TRUNCATION_MIN_MASS = 1e-12
RSS_FLOOR = 1e-10 # Keeps sigma^2 draws finite for perfectly fitting responses

# Skip-pattern consistency of draws
CONSTRAINED_REDRAWS = 20 # Model redraws for cells that would strand an observed dependent, before donors
ADMISSIBLE_DONOR_SAMPLE = 500 # Donors checked per cell when picking an admissible donor

# Screening and diagnostics
SKEWNESS_ALERT = 1.0
OUTLIER_IQR_MULTIPLIER = 3.0
INDICATOR_ALERT_THRESHOLD = 0.10
SUMMARY_QUANTILES = (25, 50, 75, 90, 95)
WEIGHTED_SUMMARY_QUANTILES = (5, 10, 25, 50, 75, 90, 95)

# CSV tokens
MISSING_TOKENS = ("", "NA", "NaN", "nan")
NOT_APPLICABLE_TOKEN = "."
FLOAT_FORMAT = ".17g" # Round-trips float64 exactly
REPORT_DECIMALS = 2

# Output layout
DEFAULT_OUTPUT_DIR = "output"
COMPLETED_FILE_TEMPLATE = "completed_{index:02d}.csv"
PROVENANCE_FILE = "provenance.csv"
TRACE_FILE = "trace.csv"
MANIFEST_FILE = "manifest.json"

# Logging
LOG_ENV_VAR = "CHAINIMP_LOG"
DEFAULT_LOG_LEVEL = "INFO"

# Manifest
APP_VERSION = "0.4.0" # Keep in sync with pyproject.toml
CORRELATION_AVERAGING_NOTE = "Correlations over the M completed tables are plainly averaged (no Fisher-z)."
