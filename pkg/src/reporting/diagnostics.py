# src/reporting/diagnostics.py
"""
Evaluation battery comparing observed, multiply imputed and hot-deck data.
Every function is a pure transformation of its inputs into plot-ready tables.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from src import config as global_config
from src.domain.chain import CompletedSet
from src.domain.dataset import Dataset
from src.domain.enums import CellState, VariableKind
from src.domain.errors import DataValidationError
from src.domain.results import CoefficientTable, PooledEstimate
from src.inference.analysis import analysis_frame, estimate_mean
from src.inference.pooling import pool_scalar

logger = logging.getLogger(__name__)

SUMMARY_STATISTICS = ["n", "min", "max", "mean", "sd"] + [f"p{q}" for q in global_config.SUMMARY_QUANTILES]


def _describe(values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return np.array([0.0] + [np.nan] * (len(SUMMARY_STATISTICS) - 1))
    sd = float(x.std(ddof=1)) if x.size > 1 else np.nan
    quantiles = np.percentile(x, global_config.SUMMARY_QUANTILES)
    return np.array([float(x.size), x.min(), x.max(), x.mean(), sd, *quantiles])


def relative_difference(obs: float, com: float) -> float:
    """(com - obs) / obs; NaN (written blank) when obs is 0 or undefined."""
    if obs == 0 or np.isnan(obs) or np.isnan(com):
        return np.nan
    return (com - obs) / obs


def summary_compare(observed: np.ndarray, completed: Union[np.ndarray, Sequence[np.ndarray]]) -> pd.DataFrame:
    """
    Summary statistics of the observed-only values against the completed
    values. Several completed arrays (one per imputation) are summarized
    separately and their statistics averaged.
    """
    if isinstance(completed, np.ndarray) and completed.ndim == 1:
        completed = [completed]
    if len(completed) == 0:
        raise DataValidationError("summary_compare needs at least one completed table.")
    obs = _describe(observed)
    com = np.mean([_describe(c) for c in completed], axis=0)
    return pd.DataFrame({
        "statistic": SUMMARY_STATISTICS,
        "obs": obs,
        "com": com,
        "rel_diff": [relative_difference(o, c) for o, c in zip(obs, com)],
    })


def _variable_values(ds: Dataset, name: str, *, observed_only: bool) -> np.ndarray:
    j = ds.index_of(name)
    states = ds.states[:, j]
    keep = states == CellState.OBSERVED if observed_only else (states == CellState.OBSERVED) | (states == CellState.IMPUTED)
    return ds.values[keep, j]


def summary_for_variable(source: Dataset, completed: CompletedSet, name: str) -> pd.DataFrame:
    observed = _variable_values(source, name, observed_only=True)
    return summary_compare(observed, [_variable_values(d, name, observed_only=False) for d in completed.datasets()])


def aggregate_components(ds: Dataset, components: Sequence[str], negative_components: Sequence[str] = ()) -> np.ndarray:
    """Row sums of components minus negative components (e.g. assets minus debts). NotApplicable counts as 0; Missing propagates as NaN."""
    frame = analysis_frame(ds, [*components, *negative_components])
    total = frame[list(components)].sum(axis=1, skipna=False).to_numpy(dtype=float)
    if negative_components:
        total = total - frame[list(negative_components)].sum(axis=1, skipna=False).to_numpy(dtype=float)
    return total


def _pooled_mean(datasets: Sequence[Dataset], values: Sequence[np.ndarray], estimand: str) -> Optional[PooledEstimate]:
    weights = datasets[0].weights
    estimates, variances = zip(*(estimate_mean(v, weights) for v in values))
    if len(estimates) < 2:
        return None
    return pool_scalar(estimates, variances, estimand=estimand)


def fmi_table(completed: CompletedSet, variables: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Pooled mean of each variable (NotApplicable as 0) with W, B, T and FMI."""
    datasets = completed.datasets()
    names = list(variables) if variables is not None else [
        s.name for s in completed.source.variables
        if s.is_imputed and s.kind != VariableKind.CATEGORICAL
    ]
    rows = []
    for name in names:
        values = [analysis_frame(d, [name])[name].to_numpy() for d in datasets]
        pooled = _pooled_mean(datasets, values, name)
        if pooled is None:
            logger.warning(f"FMI of '{name}' needs m >= 2 completed tables; skipped.")
            continue
        rows.append(pooled.as_row())
    return pd.DataFrame(rows, columns=["estimand", "q_bar", "w", "b", "t", "fmi", "df", "ci_lo", "ci_hi"])


def indicator_props(source: Dataset, completed: CompletedSet,
                    alert_threshold: float = global_config.INDICATOR_ALERT_THRESHOLD) -> pd.DataFrame:
    """
    For each semicontinuous variable: FMI of the pooled mean amount and of the
    pooled nonzero rate, and the nonzero rate among observed cells against
    the rate among imputed cells (pooled over all tables). A gap above the
    threshold is flagged; this documents, it does not fail.
    """
    datasets = completed.datasets()
    rows = []
    for j, spec in enumerate(source.variables):
        if spec.kind != VariableKind.SEMICONTINUOUS:
            continue
        observed = source.values[source.states[:, j] == CellState.OBSERVED, j]
        prop_obs = float(np.mean(observed != 0)) if observed.size else np.nan

        imputed = np.concatenate([d.values[d.states[:, j] == CellState.IMPUTED, j] for d in datasets])
        n_missing = int(round(imputed.size / max(len(datasets), 1)))
        prop_imp = float(np.mean(imputed != 0)) if imputed.size else np.nan

        amounts = [analysis_frame(d, [spec.name])[spec.name].to_numpy() for d in datasets]
        indicators = [(a != 0).astype(float) for a in amounts]
        pooled_amount = _pooled_mean(datasets, amounts, spec.name)
        pooled_indicator = _pooled_mean(datasets, indicators, f"{spec.name}:nz")

        alert = bool(imputed.size and not np.isnan(prop_obs) and abs(prop_imp - prop_obs) > alert_threshold)
        if alert:
            logger.info(f"'{spec.name}': imputed nonzero rate {prop_imp:.3f} vs observed {prop_obs:.3f}.")
        rows.append({
            "variable": spec.name,
            "fmi_amount": pooled_amount.fmi if pooled_amount else np.nan,
            "fmi_indicator": pooled_indicator.fmi if pooled_indicator else np.nan,
            "prop_positive_obs": prop_obs,
            "prop_positive_imp": prop_imp,
            "n_missing_indicators": n_missing,
            "alert": alert,
        })
    return pd.DataFrame(rows, columns=["variable", "fmi_amount", "fmi_indicator", "prop_positive_obs",
                                       "prop_positive_imp", "n_missing_indicators", "alert"])


def _lower_triangle(matrix: np.ndarray, names: Sequence[str]) -> pd.DataFrame:
    lower = np.where(np.tril(np.ones_like(matrix, dtype=bool), k=-1), matrix, np.nan)
    return pd.DataFrame(lower, index=list(names), columns=list(names))


def average_correlation(completed: CompletedSet, variables: Sequence[str]) -> np.ndarray:
    """Pearson correlations on the model scale (NotApplicable as 0), plainly averaged over the tables."""
    matrices = []
    for d in completed.datasets():
        frame = analysis_frame(d, variables, model_scale=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            matrices.append(np.corrcoef(frame.to_numpy(dtype=float), rowvar=False))
    return np.mean(matrices, axis=0)


def correlation_compare(set_a: CompletedSet, set_b: CompletedSet, variables: Sequence[str],
                        labels: Tuple[str, str] = ("mi", "hd")) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """
    Lower-triangular correlation matrices of two completed sets over the same
    rows, plus the paired scatter table (one row per variable pair).
    """
    if len(variables) < 2:
        raise DataValidationError("correlation_compare needs at least two variables.")
    if set_a.source.n_rows != set_b.source.n_rows:
        raise DataValidationError("correlation_compare needs both completed sets over the same rows.")
    corr_a = average_correlation(set_a, variables)
    corr_b = average_correlation(set_b, variables)
    pairs = [
        {"var_x": variables[c], "var_y": variables[r], f"r_{labels[0]}": corr_a[r, c], f"r_{labels[1]}": corr_b[r, c]}
        for r in range(len(variables)) for c in range(r)
    ]
    scatter = pd.DataFrame(pairs, columns=["var_x", "var_y", f"r_{labels[0]}", f"r_{labels[1]}"])
    return _lower_triangle(corr_a, variables), _lower_triangle(corr_b, variables), scatter


@dataclass
class BlandAltman:
    means: np.ndarray
    diffs: np.ndarray
    mean_diff: float
    sd_diff: float

    @property
    def lower(self) -> float:
        return self.mean_diff - 2.0 * self.sd_diff

    @property
    def upper(self) -> float:
        return self.mean_diff + 2.0 * self.sd_diff

    def as_frame(self) -> pd.DataFrame:
        n = self.means.size
        return pd.DataFrame({
            "mean": self.means, "diff": self.diffs,
            "mean_diff": np.full(n, self.mean_diff),
            "lower": np.full(n, self.lower), "upper": np.full(n, self.upper),
        })


def bland_altman(values_a: np.ndarray, values_b: np.ndarray) -> BlandAltman:
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    if a.shape != b.shape:
        raise DataValidationError(f"bland_altman needs equal lengths, got {a.size} and {b.size}.")
    if a.size < 2:
        raise DataValidationError("bland_altman needs at least two pairs.")
    diffs = a - b
    return BlandAltman((a + b) / 2.0, diffs, float(diffs.mean()), float(diffs.std(ddof=1)))


def _fit_interval(fit: CoefficientTable, level: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
    crit = stats.norm.ppf(0.5 + level / 2) if fit.df_resid is None else stats.t.ppf(0.5 + level / 2, fit.df_resid)
    return fit.estimates - crit * fit.std_errors, fit.estimates + crit * fit.std_errors


def regression_compare(obs_fit: CoefficientTable, mi_pooled: Sequence[PooledEstimate],
                       hd_fit: CoefficientTable) -> pd.DataFrame:
    """
    Side-by-side coefficients of the observed-data, pooled MI and hot-deck
    fits with the variance ratios total(MI)/var(HD) and within(MI)/var(HD).
    """
    mi_names = tuple(p.estimand for p in mi_pooled)
    if not (obs_fit.names == mi_names == hd_fit.names):
        raise DataValidationError(
            f"regression_compare needs one model formula: obs {list(obs_fit.names)}, "
            f"MI {list(mi_names)}, HD {list(hd_fit.names)}."
        )
    obs_lo, obs_hi = _fit_interval(obs_fit)
    hd_lo, hd_hi = _fit_interval(hd_fit)
    rows = []
    for c, pooled in enumerate(mi_pooled):
        mi_lo, mi_hi = pooled.interval()
        hd_var = hd_fit.variances[c]
        rows.append({
            "coefficient": pooled.estimand,
            "obs_est": obs_fit.estimates[c], "obs_ci_lo": obs_lo[c], "obs_ci_hi": obs_hi[c],
            "mi_est": pooled.q_bar, "mi_ci_lo": mi_lo, "mi_ci_hi": mi_hi,
            "hd_est": hd_fit.estimates[c], "hd_ci_lo": hd_lo[c], "hd_ci_hi": hd_hi[c],
            "overall_var_ratio": pooled.t / hd_var if hd_var > 0 else np.nan,
            "within_var_ratio": pooled.w / hd_var if hd_var > 0 else np.nan,
            "fmi": pooled.fmi,
        })
    return pd.DataFrame(rows)


def weighted_quantiles(values: np.ndarray, weights: np.ndarray, quantiles: Sequence[float]) -> np.ndarray:
    """Inverse of the weighted empirical CDF: smallest value whose cumulative weight share reaches q."""
    order = np.argsort(values, kind="mergesort")
    x, w = values[order], weights[order]
    share = np.cumsum(w) / w.sum()
    idx = np.searchsorted(share, np.asarray(quantiles, dtype=float) - 1e-12, side="left")
    return x[np.minimum(idx, x.size - 1)]


def weighted_summary(values: np.ndarray, weights: Optional[np.ndarray] = None, *, omit_zeros: bool = False) -> pd.DataFrame:
    x = np.asarray(values, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    keep = ~np.isnan(x) & (w > 0)
    if omit_zeros:
        keep &= x != 0
    x, w = x[keep], w[keep]
    if x.size == 0:
        raise DataValidationError("weighted_summary has no values left to summarize.")
    quantiles = global_config.WEIGHTED_SUMMARY_QUANTILES
    q_values = weighted_quantiles(x, w, [q / 100.0 for q in quantiles])
    return pd.DataFrame({
        "statistic": ["n", "weighted_mean", *[f"p{q}" for q in quantiles]],
        "value": [float(x.size), float(np.sum(w * x) / w.sum()), *q_values],
    })


def cycle_trace(completed: CompletedSet) -> pd.DataFrame:
    return pd.DataFrame(
        [(t.chain, t.cycle, t.variable, t.imputed_mean, t.n_imputed) for t in completed.trace],
        columns=["chain", "cycle", "variable", "imputed_mean", "n_imputed"],
    )
