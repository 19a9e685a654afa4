# src/domain/chain.py
from dataclasses import dataclass, field, KW_ONLY
from typing import Dict, List, Tuple

import numpy as np

from .dataset import Dataset
from .enums import CellState
from .results import WarningLog


@dataclass(frozen=True)
class TraceRecord:
    chain: int
    cycle: int
    variable: str
    imputed_mean: float
    n_imputed: int


@dataclass
class ChainState:
    """
    One chain's working table. Owned by exactly one chain; values are kept on
    the original scale. `imputable` marks every cell that was not observed in
    the source, i.e. the only cells the chain may ever write.
    """
    source: Dataset
    values: np.ndarray
    states: np.ndarray
    imputable: np.ndarray
    rng: np.random.Generator

    _: KW_ONLY
    chain_index: int = 0
    cycle: int = 0
    selected_predictors: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)
    trace: List[TraceRecord] = field(default_factory=list)
    warnings: WarningLog = field(default_factory=WarningLog)

    @classmethod
    def from_dataset(cls, ds: Dataset, rng: np.random.Generator, chain_index: int = 0) -> "ChainState":
        return cls(
            ds, ds.values.copy(), ds.states.copy(), ds.states != CellState.OBSERVED, rng,
            chain_index=chain_index,
        )

    @property
    def variables(self):
        return self.source.variables

    def column(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        j = self.source.index_of(name)
        return self.values[:, j], self.states[:, j]

    def provenance(self) -> np.ndarray:
        return self.states == CellState.IMPUTED

    def snapshot(self) -> "CompletedTable":
        return CompletedTable(
            self.values.copy(), self.states.copy(), self.chain_index, self.cycle,
            {k: {s: list(c) for s, c in v.items()} for k, v in self.selected_predictors.items()},
        )


@dataclass
class CompletedTable:
    values: np.ndarray
    states: np.ndarray
    chain_index: int
    cycle: int
    selected_predictors: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)


@dataclass
class CompletedSet:
    """The M completed tables of one run plus their provenance."""
    source: Dataset
    tables: List[CompletedTable]

    _: KW_ONLY
    warnings: WarningLog = field(default_factory=WarningLog)
    trace: List[TraceRecord] = field(default_factory=list)
    order: List[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.tables)

    def dataset(self, k: int) -> Dataset:
        table = self.tables[k]
        return self.source.replace_cells(table.values, table.states)

    def datasets(self) -> List[Dataset]:
        return [self.dataset(k) for k in range(self.m)]

    def imputed_mask(self, k: int) -> np.ndarray:
        return self.tables[k].states == CellState.IMPUTED
