# src/engine/variable_imputers/semicontinuous_imputer.py
import logging

import numpy as np

from src.domain.chain import ChainState
from src.domain.enums import GlmFamily
from src.engine.regressors import draw_glm_predictive, fit_glm

from .base_imputer import UpdateContext, VariableImputer
from .continuous_imputer import ContinuousImputer

logger = logging.getLogger(__name__)


class SemicontinuousImputer(VariableImputer):
    """
    Two stages: a logistic model for "nonzero", then, on the rows drawn
    nonzero, the linear amount model fitted on the observed nonzero rows.
    Brackets that exclude zero force the indicator to 1; a [0, 0] bracket
    forces it to 0.
    """

    def __init__(self):
        self._amounts = ContinuousImputer()

    def impute(self, state: ChainState, j: int, context: UpdateContext) -> None:
        targets = context.targets
        if not targets.any():
            return
        spec = state.variables[j]
        n = state.values.shape[0]
        fit_rows = self.fit_rows(state, j)
        nonzero = np.where(fit_rows, state.values[:, j] != 0.0, False)

        lo, hi = state.source.effective_bounds(j)
        forced_one = targets & ((lo > 0) | (hi < 0))
        forced_zero = targets & (lo == 0) & (hi == 0)
        free = targets & ~forced_one & ~forced_zero

        indicator = np.zeros(n, dtype=bool)
        indicator[forced_one] = True
        if free.any():
            indicator[free] = self._draw_indicator(state, j, fit_rows, nonzero, free, context)

        amount_rows = targets & indicator
        values = np.zeros(int(targets.sum()))
        if amount_rows.any():
            amounts = self._amounts.draw_amounts(state, j, "amount", nonzero, amount_rows, context)
            values[indicator[targets]] = amounts
        self.store(state, j, targets, values)
        logger.debug(
            f"'{spec.name}': {int(amount_rows.sum())}/{int(targets.sum())} cells drawn nonzero "
            f"({int(forced_one.sum())} forced by brackets)."
        )

    def _draw_indicator(self, state: ChainState, j: int, fit_rows: np.ndarray, nonzero: np.ndarray,
                        rows: np.ndarray, context: UpdateContext) -> np.ndarray:
        spec = state.variables[j]
        n_rows = int(rows.sum())
        if not self.has_room(fit_rows):
            inf = np.full(n_rows, np.inf)
            donors = nonzero[fit_rows].astype(float)
            return self.donor_fill(state, j, spec.name, rows, donors, -inf, inf, context,
                                   f"{int(fit_rows.sum())} applicable observed rows for the nonzero model") == 1.0

        observed_rate = nonzero[fit_rows].mean()
        if observed_rate in (0.0, 1.0):
            state.selected_predictors.setdefault(spec.name, {})["indicator"] = []
            return np.full(n_rows, observed_rate == 1.0)

        response = nonzero.astype(float)
        selection = self.select(state, spec.name, "indicator", response, fit_rows, context)
        fit = fit_glm(context.pool.design(fit_rows, selection.selected), response[fit_rows], GlmFamily.BERNOULLI)
        if fit.ridge_applied:
            context.warn(f"Nonzero model for '{spec.name}' needed the ridge fallback.")
        return draw_glm_predictive(fit, context.pool.design(rows, selection.selected), state.rng) == 1.0
