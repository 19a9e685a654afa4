# src/inference/pooling.py
"""Combining rules over M completed-data analyses."""
import logging
from typing import List, Optional, Sequence

import numpy as np

from src.domain.enums import DfMethod
from src.domain.errors import DataValidationError
from src.domain.results import CoefficientTable, PooledEstimate

logger = logging.getLogger(__name__)


def _barnard_rubin_df(m: int, fmi: float, complete_df: float) -> float:
    observed_df = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - fmi)
    if fmi == 0.0:
        return observed_df
    old_df = (m - 1) / fmi ** 2
    return old_df * observed_df / (old_df + observed_df)


def pool_scalar(estimates: Sequence[float], variances: Sequence[float], *, estimand: str = "",
                compute_fmi: bool = True, df_method: DfMethod = DfMethod.LARGE_SAMPLE,
                complete_df: Optional[float] = None) -> PooledEstimate:
    """
    q_bar = mean of the estimates, w = mean of the variances, b = their
    sample variance (ddof 1), t = w + (1 + 1/m) b, fmi = (1 + 1/m) b / t.
    df is (m - 1)(1 + w / ((1 + 1/m) b))^2, infinite when b = 0, or the
    small-sample adjusted value when df_method is barnard-rubin.
    """
    q = np.asarray(estimates, dtype=float)
    u = np.asarray(variances, dtype=float)
    m = q.size
    if u.size != m:
        raise DataValidationError(f"pool_scalar got {m} estimates but {u.size} variances.")
    if m == 0:
        raise DataValidationError("pool_scalar needs at least one estimate.")
    if np.any(u < 0) or not np.all(np.isfinite(u)) or not np.all(np.isfinite(q)):
        raise DataValidationError(f"Estimates must be finite and variances non-negative ('{estimand}').")

    q_bar = float(q.mean())
    w = float(u.mean())
    if m < 2:
        if compute_fmi:
            raise DataValidationError("The fraction of missing information needs m >= 2 imputations.")
        return PooledEstimate(q_bar, w, 0.0, w, float("nan"), float("inf"), m, estimand=estimand)

    b = float(q.var(ddof=1))
    inflation = (1.0 + 1.0 / m) * b
    t = w + inflation
    fmi = inflation / t if t > 0 else 0.0

    if df_method == DfMethod.BARNARD_RUBIN:
        if complete_df is None or complete_df <= 0:
            raise DataValidationError("Barnard-Rubin degrees of freedom need a positive complete-data df.")
        df = _barnard_rubin_df(m, fmi, complete_df)
    elif b == 0.0:
        df = float("inf")
    else:
        df = (m - 1) * (1.0 + w / inflation) ** 2
    return PooledEstimate(q_bar, w, b, t, fmi, float(df), m, estimand=estimand)


def pool_regression(fits: Sequence[CoefficientTable], *, df_method: DfMethod = DfMethod.LARGE_SAMPLE) -> List[PooledEstimate]:
    """Coordinate-wise pool_scalar over M fits sharing one coefficient layout."""
    if not fits:
        raise DataValidationError("pool_regression needs at least one fit.")
    layout = fits[0].names
    for k, fit in enumerate(fits[1:], start=1):
        if fit.names != layout:
            raise DataValidationError(f"Coefficient layout of fit {k} {list(fit.names)} differs from {list(layout)}.")

    estimates = np.vstack([f.estimates for f in fits])
    variances = np.vstack([f.variances for f in fits])
    complete_df = fits[0].df_resid if df_method == DfMethod.BARNARD_RUBIN else None
    pooled = [
        pool_scalar(estimates[:, c], variances[:, c], estimand=name, compute_fmi=len(fits) > 1,
                    df_method=df_method, complete_df=complete_df)
        for c, name in enumerate(layout)
    ]
    logger.debug(f"Pooled {len(layout)} coefficients over {len(fits)} fits.")
    return pooled
