# src/engine/donors.py
from typing import Callable, Optional, Tuple

import numpy as np

from src import config as global_config
from src.domain.chain import ChainState
from src.domain.enums import CellState
from src.processing.restrictions import DrawConstraint


def draw_from_donors(donors: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                     rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """
    One uniform draw per cell from the donor values lying inside the cell's
    [lo, hi] bracket (unbracketed cells use every donor). Cells whose bracket
    holds no donor get an unrestricted draw clipped into the bracket; their
    number is returned alongside the values.
    """
    pool = np.sort(np.asarray(donors, dtype=float))
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if pool.size == 0:
        raise ValueError("draw_from_donors needs at least one donor.")

    left = np.searchsorted(pool, lo, side="left")
    right = np.searchsorted(pool, hi, side="right")
    width = right - left
    empty = width <= 0

    u = rng.random(lo.shape)
    index = np.where(empty, (u * pool.size).astype(int), left + (u * np.maximum(width, 1)).astype(int))
    values = pool[np.minimum(index, pool.size - 1)]
    if np.any(empty):
        values = np.where(empty, np.clip(values, lo, hi), values)
    return values, int(empty.sum())


def draw_admissible_donor(donors: np.ndarray, lo: float, hi: float, rng: np.random.Generator,
                          admissible: Callable[[np.ndarray], np.ndarray]) -> Optional[float]:
    """
    One uniform draw from the donors inside [lo, hi] that pass `admissible`;
    None when none does. Large pools are subsampled before checking.
    """
    pool = np.asarray(donors, dtype=float)
    pool = pool[(pool >= lo) & (pool <= hi)]
    if pool.size > global_config.ADMISSIBLE_DONOR_SAMPLE:
        pool = rng.choice(pool, size=global_config.ADMISSIBLE_DONOR_SAMPLE, replace=False)
    if pool.size == 0:
        return None
    ok = admissible(pool)
    if not ok.any():
        return None
    return float(rng.choice(pool[ok]))


def redraw_inadmissible(state: ChainState, constraint: DrawConstraint, rows: np.ndarray, donors: np.ndarray,
                        lo: np.ndarray, hi: np.ndarray) -> int:
    """
    Replaces the cells of `rows` in the constrained column by admissible
    donor values. `lo`/`hi` are full-length bounds. Returns the number of
    cells no donor could settle; those keep their value.
    """
    j = constraint.column
    unresolved = 0
    for i in np.nonzero(rows)[0]:
        value = draw_admissible_donor(
            donors, lo[i], hi[i], state.rng,
            lambda candidates: constraint.admissible(state, np.full(candidates.size, i), candidates),
        )
        if value is None:
            unresolved += 1
            continue
        state.values[i, j] = value
        state.states[i, j] = CellState.IMPUTED
    return unresolved
