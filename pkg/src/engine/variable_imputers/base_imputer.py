# src/engine/variable_imputers/base_imputer.py
import abc
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from src import config as global_config
from src.domain.chain import ChainState
from src.domain.enums import CellState, WarningStage
from src.domain.errors import ImputationError, RankDeficientError
from src.domain.results import LinearFit
from src.domain.run_config import SelectionConfig
from src.engine.donors import draw_from_donors
from src.engine.regressors import fit_linear
from src.engine.selection import DesignPool, SelectionResult, select_predictors
from src.processing.restrictions import DrawConstraint, applicable_observed_rows

logger = logging.getLogger(__name__)


@dataclass
class UpdateContext:
    """Everything one variable update needs besides the chain itself."""
    selection: SelectionConfig
    pool: DesignPool
    targets: np.ndarray # Rows to (re)draw for this variable
    warn: Callable[[str], None]
    constraint: Optional[DrawConstraint] = None # Set when some rows anchor a variable this one restricts


def make_warn(state: ChainState, variable: str) -> Callable[[str], None]:
    def _warn(message: str) -> None:
        state.warnings.add(WarningStage.IMPUTE, message, variable=variable, chain=state.chain_index, cycle=state.cycle)
    return _warn


class VariableImputer(abc.ABC):
    """Abstract base class for the per-kind conditional draws of one chained-equation update."""

    @abc.abstractmethod
    def impute(self, state: ChainState, j: int, context: UpdateContext) -> None:
        """
        Redraws column j of the chain's working table on `context.targets`,
        in place. Values are written on the original scale and the cells are
        marked Imputed. Only cells that were not observed in the source may be
        written.

        Args:
            state: The chain being updated; owned by the caller's chain.
            j: Column index of the target variable.
            context: Predictor pool, target rows, selection settings and the
                     warning sink for this update.
        """
        pass

    # Helpers shared by the concrete imputers

    @staticmethod
    def fit_rows(state: ChainState, j: int) -> np.ndarray:
        """Applicable rows with an observed value: the only rows any model is fitted on."""
        return applicable_observed_rows(state, j)

    @staticmethod
    def select(state: ChainState, name: str, stage: str, response: np.ndarray,
               rows: np.ndarray, context: UpdateContext) -> SelectionResult:
        """Screens and forward-selects on `rows`, then applies the minimum-rows rule."""
        result = select_predictors(response, context.pool, rows, context.selection)
        n_rows = int(rows.sum())
        if n_rows < len(result.selected) + 1 + global_config.MIN_ROWS_ABOVE_PREDICTORS:
            if result.selected:
                logger.debug(f"'{name}' ({stage}): {n_rows} rows for {len(result.selected)} predictors; using intercept only.")
            result = SelectionResult([], [], result.dropped)
        state.selected_predictors.setdefault(name, {})[stage] = list(result.names)
        return result

    @staticmethod
    def has_room(rows: np.ndarray) -> bool:
        """Even an intercept-only model needs MIN_ROWS_ABOVE_PREDICTORS spare rows."""
        return int(rows.sum()) >= 1 + global_config.MIN_ROWS_ABOVE_PREDICTORS

    @staticmethod
    def fit_linear_safe(X: np.ndarray, y: np.ndarray, pool: DesignPool, selected: List[int],
                        context: UpdateContext) -> Tuple[LinearFit, List[int]]:
        try:
            return fit_linear(X, y), selected
        except RankDeficientError as e:
            context.warn(f"{e} Falling back to an intercept-only model.")
            return fit_linear(np.ones((X.shape[0], 1)), y), []

    @staticmethod
    def donor_fill(state: ChainState, j: int, name: str, rows: np.ndarray, donors: np.ndarray,
                   lo: np.ndarray, hi: np.ndarray, context: UpdateContext, reason: str) -> np.ndarray:
        """Marginal fallback: draws the cells from observed donor values and reports why."""
        if donors.size == 0:
            raise ImputationError(f"No observed values to impute from ({reason}).", variable=name, chain=state.chain_index)
        context.warn(f"{reason}; drawing {int(rows.sum())} cells from {donors.size} observed donors.")
        values, unmatched = draw_from_donors(donors, lo, hi, state.rng)
        state.warnings.count_clipped(name, unmatched)
        return values

    @staticmethod
    def store(state: ChainState, j: int, rows: np.ndarray, values: np.ndarray) -> None:
        if np.any(~state.imputable[rows, j]):
            raise ImputationError("Attempted to overwrite an observed cell.", variable=state.variables[j].name,
                                  chain=state.chain_index)
        state.values[rows, j] = values
        state.states[rows, j] = CellState.IMPUTED

    @staticmethod
    def bounds(state: ChainState, j: int, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = state.source.effective_bounds(j)
        return lo[rows], hi[rows]
