# src/engine/selection.py
"""
Predictor pool construction and per-variable screening.

All screening works on the Gram matrix of the pool columns centred over the
fit rows; centring is the projection onto the intercept, which is always in
the model.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from src.domain.enums import CellState, VariableKind
from src.domain.run_config import SelectionConfig
from src.domain.variables import VariableSpec
from src.processing.transforms import to_model_scale

logger = logging.getLogger(__name__)

INTERCEPT = "(intercept)"


@dataclass
class DesignPool:
    """Candidate design columns (intercept excluded) with names like 'x', 'g=b', 'w:nz', 'w:amt'."""
    matrix: np.ndarray
    names: List[str] = field(default_factory=list)
    sources: List[str] = field(default_factory=list) # Variable each column was expanded from

    @property
    def n_columns(self) -> int:
        return len(self.names)

    def subset(self, columns: Sequence[int]) -> "DesignPool":
        columns = list(columns)
        return DesignPool(
            self.matrix[:, columns], [self.names[c] for c in columns], [self.sources[c] for c in columns]
        )

    def design(self, rows: np.ndarray, columns: Optional[Sequence[int]] = None) -> np.ndarray:
        """Model matrix with a leading intercept over the given rows."""
        block = self.matrix[rows] if columns is None else self.matrix[np.ix_(rows, list(columns))]
        return np.column_stack([np.ones(block.shape[0]), block])


@dataclass
class SelectionResult:
    selected: List[int] # Indices into the screened pool, in entry order
    names: List[str]
    dropped: List[str] = field(default_factory=list) # Removed by the collinearity screen
    r2_path: List[float] = field(default_factory=list)


def _reference_level(codes: np.ndarray, n_levels: int) -> int:
    counts = np.bincount(codes.astype(int), minlength=n_levels)
    return int(np.argmax(counts)) # Ties go to the lowest index


def expand_dummies(view, names: Sequence[str]) -> DesignPool:
    """
    Expands the named variables of a Dataset or ChainState into design
    columns. Missing and NotApplicable cells contribute 0 to every column.
    Categorical: one indicator per level present except the most frequent.
    Semicontinuous: a nonzero indicator plus the model-scale amount.
    """
    variables: Sequence[VariableSpec] = view.variables
    index = {s.name: j for j, s in enumerate(variables)}
    columns: List[np.ndarray] = []
    col_names: List[str] = []
    sources: List[str] = []

    for name in names:
        j = index[name]
        spec = variables[j]
        states = view.states[:, j]
        valued = (states == CellState.OBSERVED) | (states == CellState.IMPUTED)
        x = np.where(valued, view.values[:, j], 0.0)

        if spec.kind == VariableKind.CATEGORICAL:
            present = np.unique(x[valued]).astype(int)
            if present.size < 2:
                continue
            reference = _reference_level(x[valued], spec.n_levels)
            for level in present:
                if level == reference:
                    continue
                columns.append((valued & (x == level)).astype(float))
                col_names.append(f"{name}={spec.levels[level]}")
                sources.append(name)
        elif spec.kind == VariableKind.SEMICONTINUOUS:
            columns.append((x != 0).astype(float))
            col_names.append(f"{name}:nz")
            sources.append(name)
            columns.append(to_model_scale(spec.transform, x))
            col_names.append(f"{name}:amt")
            sources.append(name)
        else:
            columns.append(to_model_scale(spec.transform, x) if spec.kind == VariableKind.CONTINUOUS else x)
            col_names.append(name)
            sources.append(name)

    n = view.values.shape[0]
    matrix = np.column_stack(columns) if columns else np.empty((n, 0))
    return DesignPool(matrix, col_names, sources)


def _centred_gram(block: np.ndarray) -> np.ndarray:
    centred = block - block.mean(axis=0)
    return centred.T @ centred


def screen_collinear(pool: DesignPool, rows: np.ndarray, tol: float) -> SelectionResult:
    """
    Greedy ordered scan: a column is dropped when its residual norm after
    projection onto the intercept and the columns already retained is below
    tol times its own norm. Constant columns are dropped.
    """
    if pool.n_columns == 0:
        return SelectionResult([], [], [])
    block = pool.matrix[rows]
    gram = _centred_gram(block)
    own = np.einsum("ij,ij->j", block, block)

    retained: List[int] = []
    dropped: List[str] = []
    factor = np.zeros((pool.n_columns, pool.n_columns))
    for j in range(pool.n_columns):
        k = len(retained)
        if k:
            v = linalg.solve_triangular(factor[:k, :k], gram[retained, j], lower=True)
            residual = gram[j, j] - v @ v
        else:
            v = np.empty(0)
            residual = gram[j, j]
        if residual <= (tol ** 2) * own[j] or residual <= 0.0:
            dropped.append(pool.names[j])
            continue
        factor[k, :k] = v
        factor[k, k] = np.sqrt(residual)
        retained.append(j)

    if dropped:
        logger.debug(f"Collinearity screen dropped {dropped}")
    return SelectionResult(retained, [pool.names[j] for j in retained], dropped)


def forward_select(y: np.ndarray, pool: DesignPool, rows: np.ndarray, cfg: SelectionConfig,
                   candidates: Optional[Sequence[int]] = None) -> SelectionResult:
    """
    Forward selection by largest R^2 increase, starting from the intercept.
    `y` may be a matrix (one column per indicator) for a pooled multi-response
    R^2. Stops when the best increase is below cfg.min_r2_increase or
    cfg.max_predictors columns are in. Ties go to the earlier pool column.
    """
    candidates = list(range(pool.n_columns)) if candidates is None else list(candidates)
    response = np.asarray(y, dtype=float)[rows]
    response = response[:, None] if response.ndim == 1 else response
    if not candidates:
        return SelectionResult([], [])

    block = np.column_stack([pool.matrix[np.ix_(rows, candidates)], response])
    aug = _centred_gram(block)
    q = len(candidates)
    tss = float(np.trace(aug[q:, q:]))
    if tss <= 0.0 or not np.isfinite(tss):
        return SelectionResult([], [])

    initial_diag = np.diag(aug)[:q].copy()
    available = np.ones(q, dtype=bool)
    chosen: List[int] = []
    path: List[float] = []
    r2 = 0.0
    while len(chosen) < cfg.max_predictors:
        diag = np.diag(aug)[:q]
        usable = available & (diag > 1e-12 * initial_diag)
        if not usable.any():
            break
        gains = np.zeros(q)
        gains[usable] = (aug[:q, q:][usable] ** 2).sum(axis=1) / diag[usable] / tss
        best = int(np.argmax(gains))
        if gains[best] < cfg.min_r2_increase:
            break
        pivot_col = aug[:, best].copy()
        aug -= np.outer(pivot_col, pivot_col) / pivot_col[best]
        available[best] = False
        chosen.append(best)
        r2 += gains[best]
        path.append(r2)

    selected = [candidates[c] for c in chosen]
    return SelectionResult(selected, [pool.names[c] for c in selected], r2_path=path)


def select_predictors(y: np.ndarray, pool: DesignPool, rows: np.ndarray, cfg: SelectionConfig) -> SelectionResult:
    """Collinearity screen followed by forward selection, both over `rows`."""
    screened = screen_collinear(pool, rows, cfg.collinearity_tol)
    result = forward_select(y, pool, rows, cfg, candidates=screened.selected)
    result.dropped = screened.dropped
    return result
