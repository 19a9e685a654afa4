# src/reporting/console_reporter.py
import logging
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.domain.chain import CompletedSet
from src.domain.enums import CellState
from src.domain.results import PooledEstimate

logger = logging.getLogger(__name__)

RULE = "-" * 72


def _fmt(value: float, width: int, decimals: int = 2) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return f"{'':>{width}}"
    if np.isinf(value):
        return f"{'inf':>{width}}"
    return f"{value:>{width}.{decimals}f}"


def print_missingness_profile(profile: pd.DataFrame, inconsistencies: Optional[Dict[str, int]] = None):
    print("\n--- Missingness profile (percent of rows) ---")
    print("  " + RULE)
    print(f"  {'Variable':<40} | {'Apparent %':>12} | {'True %':>12}")
    print("  " + RULE)
    for row in profile.itertuples(index=False):
        print(f"  {row.variable:<40} | {_fmt(row.apparent_pct, 12)} | {_fmt(row.true_pct, 12)}")
    print("  " + RULE)
    if inconsistencies:
        for name, count in inconsistencies.items():
            print(f"  WARNING: '{name}' has {count} observed values on rows its restriction rules out")


def print_run_summary(completed: CompletedSet, out_dir: str):
    source = completed.source
    print(f"\n--- Imputation run: {completed.m} completed table(s) in {out_dir} ---")
    if not completed.order:
        print("  Nothing to impute; the tables equal the input.")
        return
    print(f"  {'Variable':<40} | {'Missing cells':>14}")
    print("  " + RULE)
    for name in completed.order:
        j = source.index_of(name)
        n_missing = int(np.sum(source.states[:, j] == CellState.MISSING))
        print(f"  {name:<40} | {n_missing:>14}")
    print("  " + RULE)
    if len(completed.warnings):
        print(f"  {len(completed.warnings)} warning(s) recorded; see manifest.json")


def print_pooled_estimates(pooled: Sequence[PooledEstimate], title: str = "Pooled estimates"):
    print(f"\n--- {title} ---")
    header = f"  {'Estimand':<24} | {'Estimate':>12} | {'Std. err.':>12} | {'FMI':>8} | {'df':>10} | {'95% interval':>27}"
    print(header)
    print("  " + "-" * (len(header) - 2))
    for p in pooled:
        lo, hi = p.interval()
        print(f"  {p.estimand:<24} | {_fmt(p.q_bar, 12, 4)} | {_fmt(float(np.sqrt(p.t)), 12, 4)} | "
              f"{_fmt(p.fmi, 8, 3)} | {_fmt(p.df, 10, 1)} | [{_fmt(lo, 12, 4)}, {_fmt(hi, 12, 4)}]")
