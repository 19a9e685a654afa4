# src/domain/__init__.py
from .enums import (
    VariableKind, TransformKind, Eligibility, CellState, GlmFamily, ChainMode,
    ComparisonOp, BooleanOp, DfMethod, WarningStage,
)
from .errors import (
    ChainImpError, DataValidationError, ConfigError, NumericalError,
    RankDeficientError, GlmConvergenceError, DegenerateSampleError, ImputationError,
)
from .variables import VariableSpec, RestrictionRule, RecodeRule, Comparison, BooleanExpression
from .dataset import Dataset
from .results import LinearFit, GlmFit, PooledEstimate, CoefficientTable, RunWarning, WarningLog
from .run_config import SelectionConfig, EngineConfig
from .chain import ChainState, CompletedTable, CompletedSet, TraceRecord
