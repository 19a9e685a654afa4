# src/domain/enums.py
from enum import Enum, IntEnum


class VariableKind(Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"
    COUNT = "count"
    SEMICONTINUOUS = "semicontinuous" # Exactly zero with positive probability, continuous otherwise


class TransformKind(Enum):
    NONE = "none"
    SIGNED_CUBE_ROOT = "signed-cube-root"


class Eligibility(Enum):
    IMPUTED_AND_PREDICTOR = "imputed-and-predictor"
    PREDICTOR_ONLY = "predictor-only" # Used as a predictor, its own missing cells are left alone
    EXCLUDED = "excluded"


class CellState(IntEnum):
    """Per-cell state codes stored in the int8 state grid."""
    OBSERVED = 0
    MISSING = 1
    NOT_APPLICABLE = 2
    IMPUTED = 3


class GlmFamily(Enum):
    BERNOULLI = "bernoulli"
    MULTINOMIAL = "multinomial"
    POISSON = "poisson"


class ChainMode(Enum):
    INDEPENDENT_CHAINS = "independent-chains"
    SINGLE_CHAIN_THINNED = "single-chain-thinned"


class ComparisonOp(Enum):
    EQ = "=="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


class BooleanOp(Enum):
    AND = "AND"
    OR = "OR"


class DfMethod(Enum):
    LARGE_SAMPLE = "large-sample"
    BARNARD_RUBIN = "barnard-rubin" # Small-sample adjustment, needs complete-data df


class WarningStage(Enum):
    LOAD = "load"
    INITIALIZE = "initialize"
    IMPUTE = "impute"
    HOTDECK = "hotdeck"
    DIAGNOSE = "diagnose"
