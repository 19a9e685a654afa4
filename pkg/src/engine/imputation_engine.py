# src/engine/imputation_engine.py
"""
The chained-equation driver.

Each chain owns a working copy of the table and its own random stream. A
cycle visits the incomplete variables from least to most missing, redrawing
every not-observed applicable cell of the variable from a model fitted on
the observed applicable cells, and re-synchronizes the restrictions that
depend on it.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from src import config as global_config
from src.domain.chain import ChainState, CompletedSet, CompletedTable, TraceRecord
from src.domain.dataset import Dataset
from src.domain.enums import CellState, ChainMode, WarningStage
from src.domain.errors import ChainImpError, ImputationError, NumericalError
from src.domain.results import WarningLog
from src.domain.run_config import EngineConfig, SelectionConfig
from src.engine.donors import draw_from_donors, redraw_inadmissible
from src.engine.selection import expand_dummies
from src.engine.variable_imputers import IMPUTERS, UpdateContext, make_warn
from src.processing.restrictions import (
    DrawConstraint, anchored_cells, applicable_observed_rows, check_observed_consistency, downstream_of,
    restricting_closure, restriction_order, restriction_violations, sync_restrictions,
)

logger = logging.getLogger(__name__)


@dataclass
class EnginePlan:
    """
    Per-dataset facts that stay fixed for the whole run. `order` is the
    least-to-most-missing order, followed by complete restricted variables
    whose filters are imputed (their not-applicable cells can turn applicable).
    `constraints` holds, per filter variable, the rows on which an observed
    dependent pins the filter's answer.
    """
    order: List[str]
    sync_order: List[str]
    predictors: Dict[str, List[str]] = field(default_factory=dict)
    downstream: Dict[str, List[str]] = field(default_factory=dict)
    constraints: Dict[str, DrawConstraint] = field(default_factory=dict)

    @classmethod
    def build(cls, ds: Dataset) -> "EnginePlan":
        specs = ds.variables
        order = order_variables(ds)
        if order:
            moving = set(order)
            order += [
                s.name for s in specs
                if s.is_imputed and s.name not in moving and s.restriction is not None
                and restricting_closure(specs, s.name) & moving
            ]
        plan = cls(order, restriction_order(specs))
        anchored = anchored_cells(ds)
        for spec in specs:
            plan.downstream[spec.name] = downstream_of(specs, spec.name)
            plan.predictors[spec.name] = predictor_names(ds, spec.name)
            constraint = DrawConstraint.build(ds, spec.name, anchored)
            if constraint is not None and spec.is_imputed:
                plan.constraints[spec.name] = constraint
        return plan


def order_variables(ds: Dataset) -> List[str]:
    """Imputed variables with any Missing cell, ascending by Missing count; ties keep declaration order."""
    missing = ds.count_state(CellState.MISSING)
    candidates = [(int(missing[j]), j) for j, spec in enumerate(ds.variables) if spec.is_imputed and missing[j] > 0]
    return [ds.variables[j].name for _, j in sorted(candidates)]


def predictor_names(ds: Dataset, target: str) -> List[str]:
    """Eligible predictors of `target`: every non-excluded variable except itself and its restricting variables."""
    blocked = restricting_closure(ds.variables, target) | {target}
    return [s.name for s in ds.variables if s.is_predictor and s.name not in blocked]


def _donor_pool(state: ChainState, j: int) -> Tuple[np.ndarray, bool]:
    """Observed values of column j on applicable rows, else every observed value (flagged False)."""
    donors = state.values[applicable_observed_rows(state, j), j]
    if donors.size:
        return donors, True
    return state.source.values[state.source.states[:, j] == CellState.OBSERVED, j], False


def initialize_chain(ds: Dataset, rng: np.random.Generator, chain_index: int = 0,
                     plan: Optional[EnginePlan] = None) -> ChainState:
    """
    Fills every Missing cell of the imputed variables with a draw from the
    variable's observed values in its applicable set, bracket-respecting.
    Variables are visited parents-first so nested restrictions settle; a
    filter only takes donor answers that keep its observed dependents
    applicable.
    """
    plan = plan or EnginePlan.build(ds)
    state = ChainState.from_dataset(ds, rng, chain_index)
    for name in plan.sync_order:
        j = ds.index_of(name)
        spec = ds.variables[j]
        targets = state.states[:, j] == CellState.MISSING
        if not spec.is_imputed or not targets.any():
            continue
        donors, applicable = _donor_pool(state, j)
        if donors.size == 0:
            raise ImputationError("uninitializable variable: no observed values.", variable=name, chain=chain_index)
        if not applicable:
            state.warnings.add(WarningStage.INITIALIZE, "No observed donors in the applicable set; using all observed values.",
                               variable=name, chain=chain_index, cycle=0)
        lo, hi = ds.effective_bounds(j)
        values, unmatched = draw_from_donors(donors, lo[targets], hi[targets], rng)
        if unmatched:
            state.warnings.add(WarningStage.INITIALIZE, f"{unmatched} bracketed cells had no in-bracket donor; clipped.",
                               variable=name, chain=chain_index, cycle=0)
            state.warnings.count_clipped(name, unmatched)
        state.values[targets, j] = values
        state.states[targets, j] = CellState.IMPUTED

        constraint = plan.constraints.get(name)
        if constraint is not None:
            stranding = constraint.inadmissible_rows(state, targets)
            if stranding.any():
                unresolved = redraw_inadmissible(state, constraint, stranding, donors, lo, hi)
                if unresolved:
                    state.warnings.add(WarningStage.INITIALIZE,
                                       f"{unresolved} cells have no donor consistent with their observed dependents.",
                                       variable=name, chain=chain_index, cycle=0)
        if plan.downstream[name]:
            sync_restrictions(state, plan.downstream[name])
    logger.debug(f"Chain {chain_index} initialized.")
    return state


def _settle_constraint(state: ChainState, j: int, context: UpdateContext) -> None:
    """
    Redraws, from the model, the cells whose value would make an anchored
    dependent not applicable; what is left after CONSTRAINED_REDRAWS rounds
    takes an admissible donor value.
    """
    constraint = context.constraint
    imputer = IMPUTERS[state.variables[j].kind]
    stranding = constraint.inadmissible_rows(state, context.targets)
    for _ in range(global_config.CONSTRAINED_REDRAWS):
        if not stranding.any():
            return
        imputer.impute(state, j, replace(context, targets=stranding))
        stranding = constraint.inadmissible_rows(state, stranding)
    if not stranding.any():
        return

    donors, _ = _donor_pool(state, j)
    lo, hi = state.source.effective_bounds(j)
    unresolved = redraw_inadmissible(state, constraint, stranding, donors, lo, hi) if donors.size else int(stranding.sum())
    message = f"{int(stranding.sum())} cells took an admissible donor after {global_config.CONSTRAINED_REDRAWS} model redraws"
    if unresolved:
        message += f"; {unresolved} have no value consistent with their observed dependents"
    context.warn(message + ".")


def impute_variable(state: ChainState, name: str, selection: SelectionConfig,
                    plan: Optional[EnginePlan] = None, only_missing: bool = False) -> ChainState:
    """
    One conditional update of `name`: pool, selection, fit on applicable
    observed rows, draws for the applicable not-observed rows, then
    restriction sync of the variables depending on it. With `only_missing`
    just the cells currently Missing are drawn.
    """
    plan = plan or EnginePlan.build(state.source)
    j = state.source.index_of(name)
    spec = state.variables[j]
    if only_missing:
        targets = state.states[:, j] == CellState.MISSING
    else:
        targets = state.imputable[:, j] & (state.states[:, j] != CellState.NOT_APPLICABLE)

    context = UpdateContext(selection, expand_dummies(state, plan.predictors[name]), targets, make_warn(state, name),
                            plan.constraints.get(name))
    try:
        IMPUTERS[spec.kind].impute(state, j, context)
        if context.constraint is not None and targets.any():
            _settle_constraint(state, j, context)
    except ImputationError:
        raise
    except NumericalError as e:
        raise ImputationError(str(e), variable=name, chain=state.chain_index) from e

    if targets.any():
        state.trace.append(TraceRecord(
            state.chain_index, state.cycle, name, float(np.mean(state.values[targets, j])), int(targets.sum()),
        ))
    if plan.downstream[name]:
        sync_restrictions(state, plan.downstream[name])
    return state


def run_cycle(state: ChainState, plan: EnginePlan, selection: SelectionConfig) -> ChainState:
    state.cycle += 1
    for name in plan.order:
        impute_variable(state, name, selection, plan)

    # Cells that became applicable after their variable's turn are filled before the cycle ends
    for _ in range(len(plan.order) + 1):
        pending = [n for n in plan.order if np.any(state.column(n)[1] == CellState.MISSING)]
        if not pending:
            break
        for name in pending:
            impute_variable(state, name, selection, plan, only_missing=True)
    else:
        raise ImputationError("Missing cells remain after the end-of-cycle pass.", chain=state.chain_index)
    logger.debug(f"Chain {state.chain_index} finished cycle {state.cycle}.")
    return state


def _chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_index,)))


def _run_chain(ds: Dataset, cfg: EngineConfig, plan: EnginePlan, chain_index: int,
               n_tables: int) -> Tuple[ChainState, List[CompletedTable]]:
    state = initialize_chain(ds, _chain_rng(cfg.seed, chain_index), chain_index, plan)
    for _ in range(cfg.burn_in_cycles):
        run_cycle(state, plan, cfg.selection)
    snapshots = [state.snapshot()]
    for _ in range(n_tables - 1):
        for _ in range(cfg.between_cycles):
            run_cycle(state, plan, cfg.selection)
        snapshots.append(state.snapshot())
    logger.info(f"Chain {chain_index} done after {state.cycle} cycles.")
    return state, snapshots


def run(ds: Dataset, cfg: EngineConfig) -> CompletedSet:
    """
    Produces cfg.m completed tables. independent-chains: m chains, each run
    burn_in_cycles cycles. single-chain-thinned: one chain, a table after
    burn-in and then every between_cycles cycles. Output does not depend on
    cfg.threads.
    """
    plan = EnginePlan.build(ds)
    if not plan.order:
        logger.info("No imputable missing cells; the completed tables equal the input.")
        tables = [CompletedTable(ds.values.copy(), ds.states.copy(), k, 0) for k in range(cfg.m)]
        return CompletedSet(ds, tables, order=[])

    logger.info(
        f"Imputing {len(plan.order)} variables: m={cfg.m}, burn-in={cfg.burn_in_cycles}, "
        f"mode={cfg.chain_mode.value}, seed={cfg.seed}, threads={cfg.threads}"
    )
    if cfg.chain_mode == ChainMode.SINGLE_CHAIN_THINNED:
        chains = [_run_chain(ds, cfg, plan, 0, cfg.m)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_run_chain, ds, cfg, plan, k, 1) for k in range(cfg.m)]
            chains = []
            for k, future in enumerate(futures):
                try:
                    chains.append(future.result())
                except ChainImpError:
                    for other in futures:
                        other.cancel()
                    logger.error(f"Chain {k} failed; aborting run.")
                    raise

    warnings = WarningLog()
    trace: List[TraceRecord] = []
    tables: List[CompletedTable] = []
    for chain, snapshots in chains:
        warnings.extend(chain.warnings)
        trace.extend(chain.trace)
        tables.extend(snapshots)
    completed = CompletedSet(ds, tables, warnings=warnings, trace=trace, order=list(plan.order))
    report_violations(completed)
    return completed


def report_violations(completed: CompletedSet) -> None:
    """Warns about valued cells under a false restriction beyond those the source already had."""
    baseline = check_observed_consistency(completed.source)
    for k, table in enumerate(completed.datasets()):
        for name, count in restriction_violations(table).items():
            extra = count - baseline.get(name, 0)
            if extra > 0:
                completed.warnings.add(WarningStage.IMPUTE, f"{extra} valued cells break the restriction in table {k + 1}.",
                                       variable=name, chain=completed.tables[k].chain_index)
