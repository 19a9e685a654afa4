# src/engine/variable_imputers/__init__.py
from typing import Dict

from src.domain.enums import VariableKind

from .base_imputer import UpdateContext, VariableImputer, make_warn
from .categorical_imputer import CategoricalImputer
from .continuous_imputer import ContinuousImputer
from .count_imputer import CountImputer
from .semicontinuous_imputer import SemicontinuousImputer

IMPUTERS: Dict[VariableKind, VariableImputer] = {
    VariableKind.CONTINUOUS: ContinuousImputer(),
    VariableKind.CATEGORICAL: CategoricalImputer(),
    VariableKind.COUNT: CountImputer(),
    VariableKind.SEMICONTINUOUS: SemicontinuousImputer(),
}
