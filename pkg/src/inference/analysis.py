# src/inference/analysis.py
"""Complete-data analyses run on each completed table before pooling."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm

from src.domain.dataset import Dataset
from src.domain.enums import CellState, VariableKind
from src.domain.errors import DataValidationError, DegenerateSampleError
from src.domain.results import CoefficientTable
from src.engine.selection import INTERCEPT
from src.processing.transforms import to_model_scale

logger = logging.getLogger(__name__)


def analysis_frame(ds: Dataset, names: Optional[Sequence[str]] = None, *, model_scale: bool = False) -> pd.DataFrame:
    """
    Numeric frame of the named variables. NotApplicable cells count as 0
    (structural zeros), Missing cells are NaN. With `model_scale` the declared
    transforms are applied.
    """
    names = list(names) if names is not None else ds.names
    columns = {}
    for name in names:
        j = ds.index_of(name)
        spec = ds.variables[j]
        values = np.where(ds.states[:, j] == CellState.NOT_APPLICABLE, 0.0, ds.values[:, j])
        values = np.where(ds.states[:, j] == CellState.MISSING, np.nan, values)
        if model_scale and spec.kind in (VariableKind.CONTINUOUS, VariableKind.SEMICONTINUOUS):
            values = to_model_scale(spec.transform, values)
        columns[name] = values
    return pd.DataFrame(columns)


def observed_only(ds: Dataset) -> Dataset:
    """The input with every not-observed, applicable cell left Missing (imputed cells reverted)."""
    states = np.where(ds.states == CellState.IMPUTED, CellState.MISSING, ds.states).astype(np.int8)
    values = np.where(states == CellState.MISSING, np.nan, ds.values)
    return ds.replace_cells(values, states)


def estimate_mean(values: np.ndarray, weights: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """
    Mean and its sampling variance. Weighted means use the linearization
    (ratio-estimator) variance. NaN entries are dropped.
    """
    x = np.asarray(values, dtype=float)
    keep = ~np.isnan(x)
    x = x[keep]
    n = x.size
    if n < 2:
        raise DegenerateSampleError(f"A mean with a variance needs at least 2 values, got {n}.")
    if weights is None:
        return float(x.mean()), float(x.var(ddof=1) / n)

    w = np.asarray(weights, dtype=float)[keep]
    total = w.sum()
    if total <= 0:
        raise DegenerateSampleError("Weights sum to zero.")
    mean = float(np.sum(w * x) / total)
    variance = float(n / (n - 1) * np.sum((w * (x - mean)) ** 2) / total ** 2)
    return mean, variance


def fit_analysis_ols(table: pd.DataFrame, response: str, predictors: Sequence[str]) -> CoefficientTable:
    """OLS of response on predictors (plus intercept) over the complete rows of `table`."""
    missing = [c for c in [response, *predictors] if c not in table.columns]
    if missing:
        raise DataValidationError(f"Analysis columns not found: {missing}")
    frame = table[[response, *predictors]].dropna()
    if len(frame) <= len(predictors) + 1:
        raise DegenerateSampleError(f"OLS of '{response}' has {len(frame)} complete rows for {len(predictors) + 1} coefficients.")

    X = sm.add_constant(frame[list(predictors)].to_numpy(dtype=float), has_constant="add")
    result = sm.OLS(frame[response].to_numpy(dtype=float), X).fit()
    names = (INTERCEPT, *predictors)
    return CoefficientTable(
        names, np.asarray(result.params, dtype=float), np.asarray(result.bse, dtype=float),
        df_resid=float(result.df_resid), n_obs=int(result.nobs),
    )
