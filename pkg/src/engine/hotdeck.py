"""
Univariate random hot deck, the single-imputation baseline. Each missing
cell gets a value drawn uniformly from the observed values of the same
variable on rows where it applies (inside the cell's bracket when it has
one). No covariates are consulted and every variable is handled on its own;
the only cross-variable check keeps a filter's answer consistent with an
observed amount it gates.
"""
import logging
from typing import Dict, Optional

import numpy as np

from src.domain.chain import ChainState, CompletedSet
from src.domain.dataset import Dataset
from src.domain.enums import CellState, WarningStage
from src.domain.errors import ImputationError
from src.engine.donors import draw_from_donors, redraw_inadmissible
from src.processing.restrictions import (
    DrawConstraint, anchored_cells, applicable_observed_rows, downstream_of, restriction_order, sync_restrictions,
)

logger = logging.getLogger(__name__)


def hotdeck_impute(ds: Dataset, seed: int) -> CompletedSet:
    """
    Returns a CompletedSet holding one table. Variables are visited
    parents-first, so a drawn filter value settles the applicability of the
    variables it restricts before those are filled.
    """
    rng = np.random.default_rng(seed)
    state = ChainState.from_dataset(ds, rng, chain_index=0)
    specs = ds.variables
    order = [n for n in restriction_order(specs) if ds.spec(n).is_imputed]
    anchored = anchored_cells(ds)
    constraints: Dict[str, DrawConstraint] = {}
    for name in order:
        constraint = DrawConstraint.build(ds, name, anchored)
        if constraint is not None:
            constraints[name] = constraint

    for _ in range(len(order) + 1):
        pending = [n for n in order if np.any(state.column(n)[1] == CellState.MISSING)]
        if not pending:
            break
        for name in pending:
            _fill_variable(state, ds, name, constraints.get(name))
            dependents = downstream_of(specs, name)
            if dependents:
                sync_restrictions(state, dependents)
    else:
        raise ImputationError("Missing cells remain after the hot deck passes.")

    n_imputed = int(np.sum(state.states == CellState.IMPUTED))
    logger.info(f"Hot deck filled {n_imputed} cells (seed {seed}).")
    return CompletedSet(ds, [state.snapshot()], warnings=state.warnings, order=order)


def _fill_variable(state: ChainState, ds: Dataset, name: str, constraint: Optional[DrawConstraint] = None) -> None:
    j = ds.index_of(name)
    targets = state.states[:, j] == CellState.MISSING
    if not targets.any():
        return
    donors = state.values[applicable_observed_rows(state, j), j]
    if donors.size == 0:
        donors = ds.values[ds.states[:, j] == CellState.OBSERVED, j]
        if donors.size == 0:
            raise ImputationError("Empty donor pool: the variable has no observed values.", variable=name)
        state.warnings.add(WarningStage.HOTDECK, "No observed donors on applicable rows; using all observed values.",
                           variable=name)

    lo, hi = ds.effective_bounds(j)
    values, unmatched = draw_from_donors(donors, lo[targets], hi[targets], state.rng)
    if unmatched:
        state.warnings.add(
            WarningStage.HOTDECK, f"{unmatched} bracketed cells had no donor inside their bracket; "
            f"drew from the whole pool and clipped to the bracket.", variable=name,
        )
        state.warnings.count_clipped(name, unmatched)
    state.values[targets, j] = values
    state.states[targets, j] = CellState.IMPUTED

    if constraint is not None:
        stranding = constraint.inadmissible_rows(state, targets)
        if stranding.any():
            unresolved = redraw_inadmissible(state, constraint, stranding, donors, lo, hi)
            if unresolved:
                state.warnings.add(WarningStage.HOTDECK,
                                   f"{unresolved} cells have no donor consistent with their observed dependents.",
                                   variable=name)
    logger.debug(f"Hot deck '{name}': {int(targets.sum())} cells from {donors.size} donors.")
