# src/processing/restrictions.py
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.domain.chain import ChainState
from src.domain.dataset import Dataset
from src.domain.enums import CellState
from src.domain.errors import DataValidationError
from src.domain.variables import VariableSpec

logger = logging.getLogger(__name__)


def restriction_order(specs: Sequence[VariableSpec]) -> List[str]:
    """
    Topological order of all variables such that every restricting variable
    precedes the variables it restricts. Unrestricted variables keep their
    declaration order relative to each other. Raises on unknown references
    and on cycles.
    """
    by_name: Dict[str, VariableSpec] = {s.name: s for s in specs}
    for spec in specs:
        if spec.restriction is None:
            continue
        for ref in sorted(spec.restriction.depends_on):
            if ref not in by_name:
                raise DataValidationError(f"Restriction of '{spec.name}' references unknown column '{ref}'.")

    order: List[str] = []
    done: set = set()
    on_path: List[str] = []

    def _visit(name: str):
        if name in done:
            return
        if name in on_path:
            cycle = on_path[on_path.index(name):] + [name]
            raise DataValidationError(f"Cyclic restriction graph: {' -> '.join(cycle)}")
        on_path.append(name)
        rule = by_name[name].restriction
        if rule is not None:
            # Declaration order keeps the result deterministic
            for ref in [s.name for s in specs if s.name in rule.depends_on]:
                _visit(ref)
        on_path.pop()
        done.add(name)
        order.append(name)

    for spec in specs:
        _visit(spec.name)
    return order


def restricting_closure(specs: Sequence[VariableSpec], name: str) -> FrozenSet[str]:
    """All variables that directly or through nesting decide whether `name` applies."""
    by_name = {s.name: s for s in specs}
    closure: set = set()
    stack = [name]
    while stack:
        rule = by_name[stack.pop()].restriction
        if rule is None:
            continue
        for ref in rule.depends_on:
            if ref not in closure:
                closure.add(ref)
                stack.append(ref)
    return frozenset(closure)


def downstream_of(specs: Sequence[VariableSpec], name: str) -> List[str]:
    """Restricted variables whose applicability depends (transitively) on `name`, in sync order."""
    order = restriction_order(specs)
    by_name = {s.name: s for s in specs}
    return [
        v for v in order
        if by_name[v].restriction is not None and name in restricting_closure(specs, v)
    ]


def _sync_arrays(variables: Sequence[VariableSpec], values: np.ndarray, states: np.ndarray,
                 protected: np.ndarray, names: Iterable[str]) -> int:
    """In-place synchronization on the working grids; returns the number of cells whose state changed."""
    index = {s.name: j for j, s in enumerate(variables)}

    def lookup(ref: str):
        k = index[ref]
        return values[:, k], states[:, k]

    changed = 0
    for name in names:
        j = index[name]
        rule = variables[j].restriction
        if rule is None:
            continue
        truth, known = rule.evaluate(lookup)
        free = ~protected[:, j]
        col_states = states[:, j]

        to_na = free & known & ~truth & (col_states != CellState.NOT_APPLICABLE)
        # Rule true, or not yet decidable because a filter cell is still Missing
        to_missing = free & (col_states == CellState.NOT_APPLICABLE) & (truth | ~known)

        states[to_na, j] = CellState.NOT_APPLICABLE
        values[to_na, j] = np.nan
        states[to_missing, j] = CellState.MISSING
        values[to_missing, j] = np.nan
        changed += int(to_na.sum() + to_missing.sum())
    return changed


def sync_restrictions(target: Union[Dataset, ChainState],
                      variables: Optional[Iterable[str]] = None) -> Union[Dataset, ChainState]:
    """
    Re-derives NotApplicable cells from the restriction rules. A `Dataset`
    yields a new Dataset (observed cells untouched); a `ChainState` is updated
    in place (only cells that were not observed in the source may change) and
    returned. `variables` limits the pass to the given restricted variables,
    which must be supplied in sync order.
    """
    specs = target.variables
    names = list(variables) if variables is not None else restriction_order(specs)

    if isinstance(target, ChainState):
        changed = _sync_arrays(specs, target.values, target.states, ~target.imputable, names)
        if changed:
            logger.debug(f"Chain {target.chain_index} cycle {target.cycle}: restriction sync changed {changed} cells.")
        return target

    values = target.values.copy()
    states = target.states.copy()
    changed = _sync_arrays(specs, values, states, states == CellState.OBSERVED, names)
    if changed:
        logger.info(f"Restriction sync changed the state of {changed} cells.")
    return target.replace_cells(values, states)


def check_observed_consistency(ds: Dataset) -> Dict[str, int]:
    """Counts observed cells whose restriction rule is known to be false. Such cells are kept as observed."""
    def lookup(ref: str):
        return ds.column(ref)

    inconsistent: Dict[str, int] = {}
    for j, spec in enumerate(ds.variables):
        if spec.restriction is None:
            continue
        truth, known = spec.restriction.evaluate(lookup)
        count = int(np.sum((ds.states[:, j] == CellState.OBSERVED) & known & ~truth))
        if count:
            inconsistent[spec.name] = count
    return inconsistent


def restriction_violations(ds: Dataset) -> Dict[str, int]:
    """
    Counts valued cells (observed or imputed) whose restriction is known to be
    false. Zero for every variable on a consistent completed table, unless the
    source itself carried inconsistent observed cells.
    """
    violations: Dict[str, int] = {}
    for j, spec in enumerate(ds.variables):
        if spec.restriction is None:
            continue
        truth, known = spec.restriction.evaluate(ds.column)
        valued = np.isin(ds.states[:, j], (CellState.OBSERVED, CellState.IMPUTED))
        count = int(np.sum(valued & known & ~truth))
        if count:
            violations[spec.name] = count
    return violations


def applicable_observed_rows(table: Union[Dataset, ChainState], j: int) -> np.ndarray:
    """Rows where variable j is observed and its restriction is known to hold in the current table."""
    observed = table.states[:, j] == CellState.OBSERVED
    rule = table.variables[j].restriction
    if rule is None:
        return observed
    truth, known = rule.evaluate(table.column)
    return observed & truth & known


def anchored_cells(ds: Dataset) -> np.ndarray:
    """
    Cells whose variable has to stay applicable in every completed table:
    observed values, and, through nesting, every restricting variable of an
    anchored cell. A row with an observed amount and a Missing filter anchors
    the filter's answer to one that keeps the amount applicable.
    """
    specs = ds.variables
    index = {s.name: j for j, s in enumerate(specs)}
    anchored = ds.states == CellState.OBSERVED
    for name in reversed(restriction_order(specs)):
        rule = specs[index[name]].restriction
        if rule is None:
            continue
        for ref in rule.depends_on:
            anchored[:, index[ref]] |= anchored[:, index[name]]
    return anchored


@dataclass
class DrawConstraint:
    """
    Admissible draws for one variable. On rows where a variable it directly
    restricts is anchored, a candidate value is admissible only if that
    variable's rule comes out true, or stays undecided because another
    restricting cell is still Missing.
    """
    column: int
    dependents: List[int]
    anchored: np.ndarray

    @classmethod
    def build(cls, ds: Dataset, name: str, anchored: np.ndarray) -> Optional["DrawConstraint"]:
        dependents = [
            k for k, s in enumerate(ds.variables)
            if s.restriction is not None and name in s.restriction.depends_on
        ]
        if not dependents or not anchored[:, dependents].any():
            return None
        return cls(ds.index_of(name), dependents, anchored[:, dependents])

    def rows(self) -> np.ndarray:
        """Rows on which some dependent is anchored."""
        return self.anchored.any(axis=1)

    def admissible(self, table: Union[Dataset, ChainState], idx: np.ndarray, candidates) -> np.ndarray:
        """
        Checks candidate values for the cells (idx[i], column). `idx` may repeat
        a row to test several candidates for it; `candidates` is a scalar or
        one value per entry of idx.
        """
        idx = np.asarray(idx, dtype=int)
        candidates = np.broadcast_to(np.asarray(candidates, dtype=float), idx.shape)
        index = {s.name: k for k, s in enumerate(table.variables)}

        def lookup(ref: str):
            k = index[ref]
            if k == self.column:
                return candidates, np.full(idx.shape, CellState.IMPUTED, dtype=np.int8)
            return table.values[idx, k], table.states[idx, k]

        ok = np.ones(idx.shape, dtype=bool)
        for pos, k in enumerate(self.dependents):
            need = self.anchored[idx, pos]
            if not need.any():
                continue
            truth, known = table.variables[k].restriction.evaluate(lookup)
            ok &= ~need | truth | ~known
        return ok

    def inadmissible_rows(self, table: Union[Dataset, ChainState], rows: np.ndarray) -> np.ndarray:
        """Boolean mask over all rows: the cells in `rows` whose current value is not admissible."""
        idx = np.nonzero(rows & self.rows())[0]
        bad = np.zeros(table.values.shape[0], dtype=bool)
        if idx.size:
            bad[idx] = ~self.admissible(table, idx, table.values[idx, self.column])
        return bad


def missingness_profile(ds: Dataset) -> pd.DataFrame:
    """Apparent (Missing + NotApplicable) and true (Missing only) missingness per variable, in percent."""
    n = max(ds.n_rows, 1)
    missing = ds.count_state(CellState.MISSING)
    not_applicable = ds.count_state(CellState.NOT_APPLICABLE)
    return pd.DataFrame({
        "variable": ds.names,
        "apparent_pct": 100.0 * (missing + not_applicable) / n,
        "true_pct": 100.0 * missing / n,
    })


def missingness_pattern(ds: Dataset) -> pd.DataFrame:
    """
    Distinct Missing-indicator patterns over the imputed variables that have
    any Missing cell, with row counts, most frequent first. Rows without a
    Missing cell are not counted.
    """
    columns = [
        j for j, spec in enumerate(ds.variables)
        if spec.is_imputed and np.any(ds.states[:, j] == CellState.MISSING)
    ]
    names = [ds.variables[j].name for j in columns]
    if not columns:
        return pd.DataFrame(columns=names + ["n_rows"])

    indicators = (ds.states[:, columns] == CellState.MISSING).astype(int)
    indicators = indicators[indicators.any(axis=1)]
    patterns, counts = np.unique(indicators, axis=0, return_counts=True)
    table = pd.DataFrame(patterns, columns=names)
    table["n_rows"] = counts
    return table.sort_values("n_rows", ascending=False, kind="mergesort").reset_index(drop=True)
