# src/processing/transforms.py
"""Symmetrizing transforms plus the skewness and outlier screens run on observed values."""
import logging
from typing import Union

import numpy as np
import pandas as pd
from scipy import stats

from src import config as global_config
from src.domain.dataset import Dataset
from src.domain.enums import CellState, TransformKind, VariableKind
from src.domain.errors import DataValidationError, DegenerateSampleError, NumericalError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def signed_cube_root(x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataValidationError("signed_cube_root needs finite input.")
    out = np.cbrt(arr)
    return float(out) if out.ndim == 0 else out


def inverse_cube(y: ArrayLike) -> ArrayLike:
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataValidationError("inverse_cube needs finite input.")
    with np.errstate(over="ignore"):
        out = arr ** 3
    if not np.all(np.isfinite(out)):
        raise NumericalError("inverse_cube overflowed to a non-finite value.")
    return float(out) if out.ndim == 0 else out


def to_model_scale(kind: TransformKind, x: ArrayLike) -> ArrayLike:
    """Bounds go through here too; -inf/+inf map to themselves."""
    if kind == TransformKind.NONE:
        return x
    arr = np.asarray(x, dtype=float)
    out = np.cbrt(arr)
    return float(out) if out.ndim == 0 else out


def to_original_scale(kind: TransformKind, y: ArrayLike) -> ArrayLike:
    if kind == TransformKind.NONE:
        return y
    return inverse_cube(y)


def skewness(xs) -> float:
    sample = np.asarray(xs, dtype=float)
    if sample.size < 3:
        raise DegenerateSampleError(f"skewness needs at least 3 values, got {sample.size}.")
    if np.var(sample) == 0.0:
        raise DegenerateSampleError("skewness of a constant sample is undefined.")
    # Biased moment estimator: m3 / m2^(3/2)
    return float(stats.skew(sample, bias=True))


def modelled_values(ds: Dataset, j: int) -> np.ndarray:
    """Observed values that enter the amount model: nonzero ones for semicontinuous variables."""
    observed = ds.states[:, j] == CellState.OBSERVED
    values = ds.values[observed, j]
    if ds.variables[j].kind == VariableKind.SEMICONTINUOUS:
        values = values[values != 0]
    return values


def skewness_report(ds: Dataset, alert: float = global_config.SKEWNESS_ALERT) -> pd.DataFrame:
    """Raw vs cube-root skewness of every continuous/semicontinuous variable; flags |raw| > alert."""
    rows = []
    for j, spec in enumerate(ds.variables):
        if spec.kind not in (VariableKind.CONTINUOUS, VariableKind.SEMICONTINUOUS):
            continue
        values = modelled_values(ds, j)
        try:
            raw = skewness(values)
            transformed = skewness(np.cbrt(values))
        except DegenerateSampleError as e:
            logger.debug(f"Skewness of '{spec.name}' skipped: {e}")
            raw = transformed = np.nan
        rows.append({
            "variable": spec.name,
            "n": int(values.size),
            "transform": spec.transform.value,
            "skewness_raw": raw,
            "skewness_transformed": transformed,
            "transform_candidate": bool(np.isfinite(raw) and abs(raw) > alert),
        })
    candidates = [r["variable"] for r in rows if r["transform_candidate"] and r["transform"] == TransformKind.NONE.value]
    if candidates:
        logger.info(f"Variables with |skewness| > {alert} and no transform declared: {candidates}")
    return pd.DataFrame(rows, columns=["variable", "n", "transform", "skewness_raw", "skewness_transformed", "transform_candidate"])


def outlier_screen(ds: Dataset, multiplier: float = global_config.OUTLIER_IQR_MULTIPLIER) -> pd.DataFrame:
    """Counts observed values outside the Tukey fences. Nothing is modified."""
    rows = []
    for j, spec in enumerate(ds.variables):
        if spec.kind not in (VariableKind.CONTINUOUS, VariableKind.SEMICONTINUOUS, VariableKind.COUNT):
            continue
        values = modelled_values(ds, j)
        if values.size == 0:
            continue
        q1, q3 = np.percentile(values, [25, 75])
        iqr = q3 - q1
        low, high = q1 - multiplier * iqr, q3 + multiplier * iqr
        rows.append({
            "variable": spec.name, "n": int(values.size), "q1": q1, "q3": q3,
            "lower_fence": low, "upper_fence": high,
            "n_below": int(np.sum(values < low)), "n_above": int(np.sum(values > high)),
        })
    return pd.DataFrame(rows, columns=["variable", "n", "q1", "q3", "lower_fence", "upper_fence", "n_below", "n_above"])
