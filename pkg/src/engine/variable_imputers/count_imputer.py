# src/engine/variable_imputers/count_imputer.py
import numpy as np

from src.domain.chain import ChainState
from src.domain.enums import GlmFamily
from src.engine.regressors import draw_glm_predictive, fit_glm

from .base_imputer import UpdateContext, VariableImputer


class CountImputer(VariableImputer):
    """Poisson regression."""

    def impute(self, state: ChainState, j: int, context: UpdateContext) -> None:
        targets = context.targets
        if not targets.any():
            return
        spec = state.variables[j]
        fit_rows = self.fit_rows(state, j)
        y = state.values[:, j]
        inf = np.full(int(targets.sum()), np.inf)

        if not self.has_room(fit_rows):
            values = self.donor_fill(state, j, spec.name, targets, y[fit_rows], -inf, inf, context,
                                     f"{int(fit_rows.sum())} applicable observed rows for the count model")
        elif np.ptp(y[fit_rows]) == 0.0:
            state.selected_predictors.setdefault(spec.name, {})["value"] = []
            values = np.full(int(targets.sum()), y[fit_rows][0])
        else:
            response = np.where(fit_rows, y, 0.0)
            selection = self.select(state, spec.name, "value", response, fit_rows, context)
            fit = fit_glm(context.pool.design(fit_rows, selection.selected), y[fit_rows], GlmFamily.POISSON)
            if fit.ridge_applied:
                context.warn("Poisson fit needed the ridge fallback.")
            values = draw_glm_predictive(fit, context.pool.design(targets, selection.selected), state.rng)
        self.store(state, j, targets, values)
