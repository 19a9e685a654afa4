# src/domain/dataset.py
from dataclasses import dataclass, field, KW_ONLY
from typing import Dict, List, Optional, Tuple

import numpy as np

from .enums import CellState, VariableKind
from .errors import DataValidationError
from .variables import VariableSpec


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass
class Dataset:
    """
    Columnar survey table. Cells carry a state code (observed / missing /
    not-applicable / imputed) next to their value; values of non-valued
    cells are NaN. Categorical values are level indices stored as floats.
    Per-cell brackets are kept in `lower`/`upper` (-inf/+inf when absent).
    The arrays are read-only once constructed; use `replace_cells` to derive
    a modified copy.
    """
    variables: List[VariableSpec]
    values: np.ndarray
    states: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    _: KW_ONLY
    row_ids: Optional[np.ndarray] = None
    id_column: Optional[str] = None
    weights: Optional[np.ndarray] = None
    weight_column: Optional[str] = None
    passthrough: Dict[str, np.ndarray] = field(default_factory=dict) # Flag columns, never predictors

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            duplicates = sorted({n for n in names if names.count(n) > 1})
            raise DataValidationError(f"Duplicate variable names: {duplicates}")

        shape = (self.values.shape[0], len(self.variables)) if self.values.ndim == 2 else None
        for label, grid in (("values", self.values), ("states", self.states), ("lower", self.lower), ("upper", self.upper)):
            if grid.ndim != 2 or grid.shape != shape:
                raise DataValidationError(f"Dataset.{label} must be an n_rows x {len(self.variables)} grid, got shape {grid.shape}.")
        for label, column in (("row_ids", self.row_ids), ("weights", self.weights), *self.passthrough.items()):
            if column is not None and column.shape != (self.n_rows,):
                raise DataValidationError(f"Column '{label}' has {column.shape[0]} rows, expected {self.n_rows}.")

        self.values = _frozen(np.asarray(self.values, dtype=float))
        self.states = _frozen(np.asarray(self.states, dtype=np.int8))
        self.lower = _frozen(np.asarray(self.lower, dtype=float))
        self.upper = _frozen(np.asarray(self.upper, dtype=float))
        self._index: Dict[str, int] = {name: j for j, name in enumerate(names)}
        self._validate_cells()

    def _validate_cells(self):
        if np.any(self.lower > self.upper):
            rows, cols = np.nonzero(self.lower > self.upper)
            r, c = int(rows[0]), int(cols[0])
            raise DataValidationError(
                f"Inverted bounds for '{self.variables[c].name}' on row {r + 1}: low {self.lower[r, c]} > high {self.upper[r, c]}."
            )
        valued = (self.states == CellState.OBSERVED) | (self.states == CellState.IMPUTED)
        if np.any(valued & np.isnan(self.values)):
            raise DataValidationError("Observed/imputed cells must carry a value.")

        for j, spec in enumerate(self.variables):
            col = self.values[valued[:, j], j]
            if spec.kind == VariableKind.COUNT:
                if np.any((col < 0) | (col != np.round(col))):
                    raise DataValidationError(f"Count variable '{spec.name}' holds a non-integer or negative value.")
            elif spec.kind == VariableKind.CATEGORICAL:
                if np.any((col < 0) | (col >= spec.n_levels) | (col != np.round(col))):
                    raise DataValidationError(f"Categorical variable '{spec.name}' holds an invalid level index.")
            observed = self.states[:, j] == CellState.OBSERVED
            outside = observed & ((self.values[:, j] < self.lower[:, j]) | (self.values[:, j] > self.upper[:, j]))
            if np.any(outside):
                r = int(np.nonzero(outside)[0][0])
                raise DataValidationError(
                    f"Observed value {self.values[r, j]} of '{spec.name}' on row {r + 1} lies outside its bounds "
                    f"[{self.lower[r, j]}, {self.upper[r, j]}]."
                )

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> List[str]:
        return [v.name for v in self.variables]

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataValidationError(f"Unknown column '{name}'.")

    def spec(self, name: str) -> VariableSpec:
        return self.variables[self.index_of(name)]

    def column(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        j = self.index_of(name)
        return self.values[:, j], self.states[:, j]

    def effective_bounds(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Per-cell brackets intersected with the variable's static bounds."""
        static_low, static_high = self.variables[j].static_bounds()
        return np.maximum(self.lower[:, j], static_low), np.minimum(self.upper[:, j], static_high)

    def count_state(self, state: CellState) -> np.ndarray:
        return (self.states == state).sum(axis=0)

    def replace_cells(self, values: np.ndarray, states: np.ndarray) -> "Dataset":
        return Dataset(
            self.variables, values.copy(), states.copy(), self.lower.copy(), self.upper.copy(),
            row_ids=self.row_ids, id_column=self.id_column,
            weights=self.weights, weight_column=self.weight_column,
            passthrough=dict(self.passthrough),
        )
