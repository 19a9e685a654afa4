# src/domain/results.py
from dataclasses import dataclass, field, KW_ONLY
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from .enums import GlmFamily, WarningStage

logger = logging.getLogger(__name__)


@dataclass
class LinearFit:
    """
    Least-squares fit from a column-pivoted QR of the design (X[:, pivot] = Q R).
    (X'X)^-1 is carried as the triangular factor R^-1 in pivoted order.
    """
    beta_hat: np.ndarray
    r_inv: np.ndarray
    pivot: np.ndarray
    rss: float
    n: int
    p: int

    _: KW_ONLY
    column_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.n <= self.p:
            raise ValueError(f"LinearFit needs n > p, got n={self.n}, p={self.p}")
        if self.rss < 0:
            raise ValueError(f"LinearFit.rss must be non-negative, got {self.rss}")

    @property
    def df_resid(self) -> int:
        return self.n - self.p

    def xtx_inv(self) -> np.ndarray:
        pivoted = self.r_inv @ self.r_inv.T
        out = np.empty_like(pivoted)
        out[np.ix_(self.pivot, self.pivot)] = pivoted
        return out

    def coefficient_shift(self, z: np.ndarray) -> np.ndarray:
        """Maps a standard-normal vector to a draw with covariance (X'X)^-1."""
        shift = np.empty(self.p)
        shift[self.pivot] = self.r_inv @ z
        return shift


@dataclass
class GlmFit:
    beta_hat: np.ndarray # (p,) or (p, K-1) for multinomial, baseline = first class
    cov_hat: np.ndarray # Inverse observed information over beta_hat.ravel(order="F")
    family: GlmFamily
    converged: bool
    iterations: int

    _: KW_ONLY
    ridge_applied: bool = False
    classes: Tuple[int, ...] = () # Level indices modelled, multinomial/bernoulli
    column_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.family, GlmFamily):
            raise TypeError(f"GlmFit.family must be a GlmFamily, got {type(self.family)}")
        k = self.beta_hat.size
        if self.cov_hat.shape != (k, k):
            raise ValueError(f"GlmFit.cov_hat must be {k}x{k}, got {self.cov_hat.shape}")


@dataclass
class PooledEstimate:
    q_bar: float
    w: float
    b: float
    t: float
    fmi: float
    df: float
    m: int

    _: KW_ONLY
    estimand: str = ""

    def interval(self, level: float = 0.95) -> Tuple[float, float]:
        alpha = 1.0 - level
        if np.isinf(self.df):
            crit = stats.norm.ppf(1.0 - alpha / 2)
        else:
            crit = stats.t.ppf(1.0 - alpha / 2, self.df)
        half = crit * np.sqrt(self.t)
        return self.q_bar - half, self.q_bar + half

    def as_row(self, level: float = 0.95) -> Dict[str, object]:
        ci_lo, ci_hi = self.interval(level)
        return {
            "estimand": self.estimand, "q_bar": self.q_bar, "w": self.w, "b": self.b, "t": self.t,
            "fmi": self.fmi, "df": self.df, "ci_lo": ci_lo, "ci_hi": ci_hi,
        }


@dataclass(frozen=True)
class RunWarning:
    stage: WarningStage
    message: str
    variable: Optional[str] = None
    chain: Optional[int] = None
    cycle: Optional[int] = None

    def as_dict(self) -> Dict[str, object]:
        return {
            "stage": self.stage.value, "variable": self.variable, "chain": self.chain,
            "cycle": self.cycle, "message": self.message,
        }


@dataclass
class WarningLog:
    """Collects recoverable fallbacks so they can be mirrored into the run manifest."""
    records: List[RunWarning] = field(default_factory=list)
    clipped_draws: Dict[str, int] = field(default_factory=dict) # variable -> donor draws clipped into a bracket

    def add(self, stage: WarningStage, message: str, *, variable: Optional[str] = None,
            chain: Optional[int] = None, cycle: Optional[int] = None) -> None:
        record = RunWarning(stage, message, variable, chain, cycle)
        self.records.append(record)
        logger.warning(f"[{stage.value}] {variable or '-'} (chain {chain}, cycle {cycle}): {message}")

    def count_clipped(self, variable: str, n_cells: int) -> None:
        if n_cells:
            self.clipped_draws[variable] = self.clipped_draws.get(variable, 0) + int(n_cells)

    def extend(self, other: "WarningLog") -> None:
        self.records.extend(other.records)
        for variable, n_cells in other.clipped_draws.items():
            self.count_clipped(variable, n_cells)

    def __len__(self) -> int:
        return len(self.records)

    def as_dicts(self) -> List[Dict[str, object]]:
        return [r.as_dict() for r in self.records]


@dataclass
class CoefficientTable:
    """Point estimates and standard errors of one complete-data analysis."""
    names: Tuple[str, ...]
    estimates: np.ndarray
    std_errors: np.ndarray

    _: KW_ONLY
    df_resid: Optional[float] = None
    n_obs: int = 0

    def __post_init__(self):
        if not (len(self.names) == self.estimates.shape[0] == self.std_errors.shape[0]):
            raise ValueError(
                f"CoefficientTable: {len(self.names)} names, {self.estimates.shape[0]} estimates, "
                f"{self.std_errors.shape[0]} standard errors."
            )

    @property
    def variances(self) -> np.ndarray:
        return self.std_errors ** 2
