# src/engine/variable_imputers/categorical_imputer.py
import numpy as np

from src.domain.chain import ChainState
from src.domain.enums import GlmFamily
from src.engine.regressors import class_probabilities, fit_glm, sample_classes

from .base_imputer import UpdateContext, VariableImputer


class CategoricalImputer(VariableImputer):
    """
    Logistic regression when two levels are observed, baseline-category
    multinomial logit otherwise. Predictor screening uses the pooled R^2 of
    the level indicators. On rows that anchor a restricted dependent, levels
    that would make the dependent not applicable get probability zero.
    """

    def impute(self, state: ChainState, j: int, context: UpdateContext) -> None:
        targets = context.targets
        if not targets.any():
            return
        spec = state.variables[j]
        fit_rows = self.fit_rows(state, j)
        y = state.values[:, j]
        n_targets = int(targets.sum())

        if not self.has_room(fit_rows):
            inf = np.full(n_targets, np.inf)
            values = self.donor_fill(state, j, spec.name, targets, y[fit_rows], -inf, inf, context,
                                     f"{int(fit_rows.sum())} applicable observed rows for the category model")
            self.store(state, j, targets, values)
            return

        present = np.unique(y[fit_rows]).astype(int)
        if present.size == 1:
            state.selected_predictors.setdefault(spec.name, {})["value"] = []
            self.store(state, j, targets, np.full(n_targets, float(present[0])))
            return

        indicators = np.zeros((y.size, present.size))
        rows = np.nonzero(fit_rows)[0]
        indicators[rows, np.searchsorted(present, y[rows].astype(int))] = 1.0
        response = indicators[:, 1] if present.size == 2 else indicators
        selection = self.select(state, spec.name, "value", response, fit_rows, context)

        X_fit = context.pool.design(fit_rows, selection.selected)
        X_new = context.pool.design(targets, selection.selected)
        if present.size == 2:
            fit = fit_glm(X_fit, indicators[fit_rows, 1], GlmFamily.BERNOULLI)
            levels = present
        else:
            fit = fit_glm(X_fit, y[fit_rows], GlmFamily.MULTINOMIAL)
            levels = np.asarray(fit.classes, dtype=int)
        if fit.ridge_applied:
            context.warn(f"{fit.family.value} fit for '{spec.name}' needed the ridge fallback.")

        probs = class_probabilities(fit, X_new, state.rng)
        if context.constraint is not None:
            probs = self._restrict_levels(state, np.nonzero(targets)[0], levels, probs, context)
        values = levels[sample_classes(probs, state.rng)].astype(float)
        self.store(state, j, targets, values)

    @staticmethod
    def _restrict_levels(state: ChainState, idx: np.ndarray, levels: np.ndarray, probs: np.ndarray,
                         context: UpdateContext) -> np.ndarray:
        """Zeroes the levels that strand an anchored dependent; rows with no admissible level keep the model's probabilities."""
        allowed = np.column_stack([context.constraint.admissible(state, idx, float(level)) for level in levels])
        settled = allowed.any(axis=1)
        if not settled.all():
            context.warn(f"{int((~settled).sum())} cells have no level consistent with their observed dependents.")
        masked = np.where(allowed, probs, 0.0)
        totals = masked.sum(axis=1, keepdims=True)
        # Admissible levels can carry zero model probability after clamping
        uniform = allowed / np.maximum(allowed.sum(axis=1, keepdims=True), 1)
        masked = np.where(totals > 0.0, masked / np.where(totals > 0.0, totals, 1.0), uniform)
        return np.where(settled[:, None], masked, probs)
