# src/processing/recoding.py
import logging
from typing import Sequence

import numpy as np

from src.domain.dataset import Dataset
from src.domain.enums import CellState, VariableKind
from src.domain.errors import DataValidationError
from src.domain.variables import RecodeRule

logger = logging.getLogger(__name__)


def _sentinel_value(ds: Dataset, rule: RecodeRule) -> float:
    spec = ds.spec(rule.variable)
    if spec.kind == VariableKind.CATEGORICAL:
        return float(spec.level_index(rule.sentinel))
    try:
        return float(rule.sentinel)
    except ValueError:
        raise DataValidationError(f"Sentinel '{rule.sentinel}' for numeric variable '{rule.variable}' is not a number.")


def recode_missing(ds: Dataset, rules: Sequence[RecodeRule]) -> Dataset:
    """
    Applies sentinel and flag-column recodes. Matching observed cells become
    Missing; cells whose flag marks an edit stay observed. Returns the input
    unchanged when nothing matches.
    """
    values = ds.values.copy()
    states = ds.states.copy()
    total = 0

    for rule in rules:
        j = ds.index_of(rule.variable)
        observed = states[:, j] == CellState.OBSERVED

        if rule.sentinel is not None:
            hits = observed & (values[:, j] == _sentinel_value(ds, rule))
        else:
            if rule.flag_column not in ds.passthrough:
                raise DataValidationError(f"Recode rule for '{rule.variable}' names unknown flag column '{rule.flag_column}'.")
            flags = np.array([str(f).strip() for f in ds.passthrough[rule.flag_column]], dtype=object)
            hits = observed & np.isin(flags, list(rule.imputed_codes))
            if rule.edited_codes:
                edited = int(np.sum(observed & np.isin(flags, list(rule.edited_codes))))
                logger.debug(f"'{rule.variable}': {edited} edited cells kept as observed.")

        count = int(hits.sum())
        if count:
            states[hits, j] = CellState.MISSING
            values[hits, j] = np.nan
            total += count
            logger.info(f"Recoded {count} cells of '{rule.variable}' to missing "
                        f"({'sentinel ' + str(rule.sentinel) if rule.sentinel is not None else 'flag ' + rule.flag_column}).")

    if total == 0:
        return ds
    return ds.replace_cells(values, states)
