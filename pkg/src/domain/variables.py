# src/domain/variables.py
from dataclasses import dataclass, field, KW_ONLY
from typing import Callable, FrozenSet, Optional, Tuple, Union

import numpy as np

from .enums import BooleanOp, CellState, ComparisonOp, Eligibility, TransformKind, VariableKind
from .errors import DataValidationError

# Column lookup used during rule evaluation: name -> (values, states)
ColumnLookup = Callable[[str], Tuple[np.ndarray, np.ndarray]]

_COMPARATORS = {
    ComparisonOp.EQ: np.equal,
    ComparisonOp.NE: np.not_equal,
    ComparisonOp.LT: np.less,
    ComparisonOp.LE: np.less_equal,
    ComparisonOp.GT: np.greater,
    ComparisonOp.GE: np.greater_equal,
}


@dataclass(frozen=True)
class Comparison:
    variable: str
    op: ComparisonOp
    constant: Union[float, str] # A level label until resolved against categorical levels

    def depends_on(self) -> FrozenSet[str]:
        return frozenset({self.variable})

    def evaluate(self, lookup: ColumnLookup) -> Tuple[np.ndarray, np.ndarray]:
        """
        Three-valued evaluation. Returns (truth, known).
        A Missing restricting cell makes the comparison unknown; a NotApplicable one makes it false.
        """
        values, states = lookup(self.variable)
        known = states != CellState.MISSING
        has_value = known & (states != CellState.NOT_APPLICABLE)
        compared = np.zeros(values.shape, dtype=bool)
        if isinstance(self.constant, str):
            raise DataValidationError(
                f"Restriction constant '{self.constant}' on '{self.variable}' was never resolved to a level index."
            )
        compared[has_value] = _COMPARATORS[self.op](values[has_value], float(self.constant))
        return compared, known

    def render(self) -> str:
        constant = f"'{self.constant}'" if isinstance(self.constant, str) else f"{self.constant:g}"
        return f"{self.variable} {self.op.value} {constant}"


@dataclass(frozen=True)
class BooleanExpression:
    op: BooleanOp
    operands: Tuple["RuleNode", ...]

    def depends_on(self) -> FrozenSet[str]:
        names: FrozenSet[str] = frozenset()
        for operand in self.operands:
            names = names | operand.depends_on()
        return names

    def evaluate(self, lookup: ColumnLookup) -> Tuple[np.ndarray, np.ndarray]:
        results = [operand.evaluate(lookup) for operand in self.operands]
        truths = np.array([r[0] for r in results])
        knowns = np.array([r[1] for r in results])
        if self.op == BooleanOp.AND:
            truth = truths.all(axis=0)
            known = knowns.all(axis=0) | (knowns & ~truths).any(axis=0)
        else:
            truth = truths.any(axis=0)
            known = truth | knowns.all(axis=0)
        return truth, known

    def render(self) -> str:
        joiner = f" {self.op.value} "
        return "(" + joiner.join(operand.render() for operand in self.operands) + ")"


RuleNode = Union[Comparison, BooleanExpression]


@dataclass(frozen=True)
class RestrictionRule:
    """Applicability rule of a restricted variable (skip pattern)."""
    expression: RuleNode
    source: str = ""

    @property
    def depends_on(self) -> FrozenSet[str]:
        return self.expression.depends_on()

    def evaluate(self, lookup: ColumnLookup) -> Tuple[np.ndarray, np.ndarray]:
        return self.expression.evaluate(lookup)

    def map_constants(self, mapper: Callable[[Comparison], Comparison]) -> "RestrictionRule":
        def _walk(node: RuleNode) -> RuleNode:
            if isinstance(node, Comparison):
                return mapper(node)
            return BooleanExpression(node.op, tuple(_walk(o) for o in node.operands))
        return RestrictionRule(_walk(self.expression), self.source)


@dataclass
class VariableSpec:
    name: str
    kind: VariableKind

    _: KW_ONLY
    levels: Tuple[str, ...] = ()
    transform: TransformKind = TransformKind.NONE
    restriction: Optional[RestrictionRule] = None
    bounds_source: Optional[Tuple[str, str]] = None # (low column, high column) in the CSV
    min_value: Optional[float] = None # Logical bounds, e.g. non-negative premiums
    max_value: Optional[float] = None
    eligibility: Eligibility = Eligibility.IMPUTED_AND_PREDICTOR
    missing_sentinels: Tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.kind, VariableKind):
            raise TypeError(f"VariableSpec.kind must be a VariableKind, got {type(self.kind)}")
        if not isinstance(self.transform, TransformKind):
            raise TypeError(f"VariableSpec.transform must be a TransformKind, got {type(self.transform)}")
        if not isinstance(self.eligibility, Eligibility):
            raise TypeError(f"VariableSpec.eligibility must be an Eligibility, got {type(self.eligibility)}")
        if not self.name:
            raise DataValidationError("VariableSpec.name cannot be empty.")

        if self.kind == VariableKind.CATEGORICAL:
            if len(self.levels) < 2:
                raise DataValidationError(f"Categorical variable '{self.name}' needs at least 2 levels, got {list(self.levels)}.")
            if len(set(self.levels)) != len(self.levels):
                raise DataValidationError(f"Categorical variable '{self.name}' has duplicate levels: {list(self.levels)}.")
        elif self.levels:
            raise DataValidationError(f"Variable '{self.name}' of kind {self.kind.value} cannot declare levels.")

        bounded_kinds = (VariableKind.CONTINUOUS, VariableKind.SEMICONTINUOUS)
        has_static_bounds = self.min_value is not None or self.max_value is not None
        if (self.bounds_source is not None or has_static_bounds) and self.kind not in bounded_kinds:
            raise DataValidationError(
                f"Bounds are only allowed for continuous/semicontinuous variables; '{self.name}' is {self.kind.value}."
            )
        if self.min_value is not None and self.max_value is not None and self.min_value > self.max_value:
            raise DataValidationError(
                f"Variable '{self.name}' has inverted bounds: min_value {self.min_value} > max_value {self.max_value}."
            )
        if self.transform != TransformKind.NONE and self.kind not in bounded_kinds:
            raise DataValidationError(f"Transform {self.transform.value} requires a continuous/semicontinuous variable ('{self.name}').")

        if self.restriction is not None and self.name in self.restriction.depends_on:
            raise DataValidationError(f"Variable '{self.name}' is named in its own restriction rule.")

    @property
    def is_imputed(self) -> bool:
        return self.eligibility == Eligibility.IMPUTED_AND_PREDICTOR

    @property
    def is_predictor(self) -> bool:
        return self.eligibility != Eligibility.EXCLUDED

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise DataValidationError(f"Unknown level '{label}' for categorical variable '{self.name}' (levels: {list(self.levels)}).")

    def static_bounds(self) -> Tuple[float, float]:
        low = -np.inf if self.min_value is None else float(self.min_value)
        high = np.inf if self.max_value is None else float(self.max_value)
        return low, high


@dataclass(frozen=True)
class RecodeRule:
    """
    Turns source-specific missing codes into Missing cells. Either a sentinel
    token in the variable's own column, or a flag column whose codes mark
    values that were imputed by some other method.
    """
    variable: str
    sentinel: Optional[str] = None
    flag_column: Optional[str] = None
    imputed_codes: FrozenSet[str] = frozenset()
    edited_codes: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if (self.sentinel is None) == (self.flag_column is None):
            raise DataValidationError(f"Recode rule for '{self.variable}' needs exactly one of sentinel / flag_column.")
