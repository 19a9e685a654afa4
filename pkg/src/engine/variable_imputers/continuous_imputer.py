# src/engine/variable_imputers/continuous_imputer.py
import logging

import numpy as np

from src.domain.chain import ChainState
from src.engine.regressors import draw_linear_predictive, truncated_normal
from src.processing.transforms import to_model_scale, to_original_scale

from .base_imputer import UpdateContext, VariableImputer

logger = logging.getLogger(__name__)


class ContinuousImputer(VariableImputer):
    """Normal linear model on the model (transformed) scale, truncated to the per-cell brackets."""

    def impute(self, state: ChainState, j: int, context: UpdateContext) -> None:
        targets = context.targets
        if not targets.any():
            return
        fit_rows = self.fit_rows(state, j)
        values = self.draw_amounts(state, j, "value", fit_rows, targets, context)
        self.store(state, j, targets, values)

    def draw_amounts(self, state: ChainState, j: int, stage: str, fit_rows: np.ndarray,
                     targets: np.ndarray, context: UpdateContext) -> np.ndarray:
        """
        Draws original-scale values for `targets` from a linear model fitted on
        `fit_rows`, honouring the cells' brackets. Also used for the amount
        stage of semicontinuous variables.
        """
        spec = state.variables[j]
        lo, hi = self.bounds(state, j, targets)

        if not self.has_room(fit_rows):
            donors = state.values[fit_rows, j]
            if donors.size == 0:
                donors = state.source.values[self.fit_rows(state, j), j]
            return self.donor_fill(state, j, spec.name, targets, donors, lo, hi, context,
                                   f"{int(fit_rows.sum())} applicable observed rows for the {stage} model")

        y_model = np.zeros(state.values.shape[0])
        y_model[fit_rows] = to_model_scale(spec.transform, state.values[fit_rows, j])
        lo_model, hi_model = to_model_scale(spec.transform, lo), to_model_scale(spec.transform, hi)

        if np.ptp(y_model[fit_rows]) == 0.0:
            state.selected_predictors.setdefault(spec.name, {})[stage] = []
            constant = np.full(int(targets.sum()), y_model[fit_rows][0])
            draws = truncated_normal(constant, 0.0, lo_model, hi_model, state.rng, context.warn)
        else:
            selection = self.select(state, spec.name, stage, y_model, fit_rows, context)
            X_fit = context.pool.design(fit_rows, selection.selected)
            fit, used = self.fit_linear_safe(X_fit, y_model[fit_rows], context.pool, selection.selected, context)
            X_new = context.pool.design(targets, used)
            draws = draw_linear_predictive(fit, X_new, state.rng, bounds=(lo_model, hi_model), warn=context.warn)

        # The inverse transform can step an ulp outside a bracket
        return np.clip(to_original_scale(spec.transform, draws), lo, hi)
