"""
Test Group: Chained-Equation Engine

Invariants every completed table must satisfy:
- No Missing cell left in an imputed variable
- Observed cells are never changed
- Imputed values respect brackets, static bounds and skip patterns
- Output depends only on the seed, not on the thread count
Plus the run plan (visit order, predictor sets) and the chain modes.
"""

import numpy as np
import pytest

from src.domain.chain import CompletedSet, CompletedTable
from src.domain.enums import CellState, ChainMode
from src.domain.errors import ImputationError
from src.domain.run_config import EngineConfig
from src.engine.imputation_engine import (
    EnginePlan, initialize_chain, order_variables, predictor_names, report_violations, run,
)
from src.processing.restrictions import restriction_violations

from tests.support import build_dataset, column_values, linear_columns, simulated_dataset, variable

QUICK = dict(m=2, burn_in_cycles=3)


def _assert_core_invariants(completed):
    source = completed.source
    observed = source.states == CellState.OBSERVED
    imputed_columns = [j for j, s in enumerate(source.variables) if s.is_imputed]
    for table in completed.tables:
        np.testing.assert_array_equal(table.values[observed], source.values[observed])
        assert not np.any(table.states[:, imputed_columns] == CellState.MISSING)
        assert np.all(table.states[observed] == CellState.OBSERVED)
        valued = (table.states == CellState.IMPUTED) | (table.states == CellState.OBSERVED)
        assert not np.any(np.isnan(table.values[valued]))


def _mixed_columns(rng, n=250, rate=0.2):
    x = rng.standard_normal(n)
    g = np.digitize(x + 0.5 * rng.standard_normal(n), [-0.5, 0.5])
    k = rng.poisson(np.exp(0.5 + 0.3 * x))
    s = np.where(rng.random(n) < 0.6, np.exp(5.0 + x + 0.3 * rng.standard_normal(n)), 0.0)

    def masked(values, fmt):
        hide = rng.random(n) < rate
        return [None if h else fmt(v) for v, h in zip(values, hide)]

    return {
        "x": [float(v) for v in x],
        "g": masked(g, lambda v: ["lo", "mid", "hi"][int(v)]),
        "k": masked(k, lambda v: str(int(v))),
        "s": masked(s, float),
    }


MIXED_VARIABLES = [
    variable("x"),
    variable("g", "categorical", levels=["lo", "mid", "hi"]),
    variable("k", "count"),
    variable("s", "semicontinuous", transform="signed-cube-root", min_value=0),
]

ANCHORED_ROWS = slice(180, 190)


def _filter_with_reported_amounts(rng, n=200):
    """
    f is 'yes' for large x and gates amount. On rows 180..199 f is missing
    and x is strongly negative; rows 180..189 still report an amount.
    """
    x = rng.standard_normal(n)
    x[180:] = -2.0
    has = x + 0.4 * rng.standard_normal(n) > 0
    amount = 50.0 + 10.0 * x + rng.standard_normal(n)
    f = ["yes" if h else "no" for h in has]
    amounts = [float(a) if h else "." for a, h in zip(amount, has)]
    for r in range(180, n):
        f[r] = None
        amounts[r] = float(amount[r]) if r < 190 else None
    return {"x": [float(v) for v in x], "f": f, "amount": amounts}


FILTER_VARIABLES = [
    variable("x"),
    variable("f", "categorical", levels=["no", "yes"]),
    variable("amount", restriction="f == 'yes'"),
]


# =============================================================================
# Run plan
# =============================================================================

class TestEnginePlan:

    def test_order_is_ascending_missing_count(self):
        ds = build_dataset(
            [variable("a"), variable("b"), variable("c"), variable("d", eligibility="predictor-only")],
            {"a": ["", "", "1", "2"], "b": ["1", "", "1", "2"], "c": ["1", "2", "3", "4"], "d": ["", "", "", "1"]},
        )
        assert order_variables(ds) == ["b", "a"]

    def test_ties_keep_declaration_order(self):
        ds = build_dataset([variable("a"), variable("b")], {"a": ["", "1", "2"], "b": ["1", "", "2"]})
        assert order_variables(ds) == ["a", "b"]

    def test_predictors_exclude_restricting_variables(self):
        ds = build_dataset(
            [variable("has", "categorical", levels=["no", "yes"]),
             variable("amount", restriction="has == 'yes'"),
             variable("sub", restriction="amount > 10"),
             variable("age"),
             variable("note", eligibility="excluded"),
             variable("p", eligibility="predictor-only")],
            {"has": ["yes"], "amount": ["20"], "sub": ["1"], "age": ["40"], "note": ["3"], "p": ["1"]},
        )
        assert predictor_names(ds, "sub") == ["age", "p"]
        assert predictor_names(ds, "amount") == ["sub", "age", "p"]
        assert predictor_names(ds, "age") == ["has", "amount", "sub", "p"]

    def test_complete_restricted_dependent_is_revisited(self):
        ds = build_dataset(
            [variable("f", "categorical", levels=["no", "yes"]), variable("x", restriction="f == 'yes'")],
            {"f": ["no", "yes", "", "yes"], "x": [".", "3", "4", "5"]},
        )
        plan = EnginePlan.build(ds)
        assert plan.order == ["f", "x"]
        assert plan.downstream["f"] == ["x"]


# =============================================================================
# Initialization
# =============================================================================

class TestInitialization:

    def test_fills_every_missing_cell_from_observed_values(self, rng):
        ds = build_dataset([variable("v")], {"v": ["1", "2", "", "", "3"]})
        state = initialize_chain(ds, rng)
        values, states = state.column("v")
        assert np.all(states[2:4] == CellState.IMPUTED)
        assert set(values[2:4]) <= {1.0, 2.0, 3.0}

    def test_respects_brackets(self, rng):
        ds = build_dataset(
            [variable("v", bounds_low="lo", bounds_high="hi")],
            {"v": ["5", "15", "25", "", ""], "lo": ["", "", "", "10", "100"], "hi": ["", "", "", "20", "200"]},
        )
        state = initialize_chain(ds, rng)
        values = state.column("v")[0]
        assert values[3] == 15.0
        assert 100.0 <= values[4] <= 200.0
        assert any(w.message.startswith("1 bracketed") for w in state.warnings.records)

    def test_filter_keeps_reported_amounts_applicable(self, rng):
        ds = build_dataset(FILTER_VARIABLES, _filter_with_reported_amounts(rng))
        state = initialize_chain(ds, rng)
        np.testing.assert_array_equal(state.column("f")[0][ANCHORED_ROWS], [1.0] * 10)
        assert np.all(state.column("amount")[1][ANCHORED_ROWS] == CellState.OBSERVED)

    def test_variable_without_observed_values(self, rng):
        ds = build_dataset([variable("x"), variable("y")], {"x": ["1", "2"], "y": ["", ""]})
        with pytest.raises(ImputationError, match="'y'"):
            initialize_chain(ds, rng)


# =============================================================================
# Full runs
# =============================================================================

class TestRuns:

    def test_linear_relation_is_preserved(self, rng):
        ds = build_dataset([variable("x"), variable("v")], linear_columns(rng, 400, slope=2.0))
        completed = run(ds, EngineConfig(m=4, burn_in_cycles=4, seed=11))
        _assert_core_invariants(completed)
        assert completed.m == 4
        assert completed.order == ["v"]

        x = column_values(ds, "x")
        slopes = []
        for k in range(completed.m):
            mask = completed.imputed_mask(k)[:, 1]
            v = completed.tables[k].values[mask, 1]
            slopes.append(np.polyfit(x[mask], v, 1)[0])
        assert np.mean(slopes) == pytest.approx(2.0, abs=0.3)
        assert np.std(slopes) > 0.0

    def test_mixed_kinds(self, rng):
        ds = build_dataset(MIXED_VARIABLES, _mixed_columns(rng))
        completed = run(ds, EngineConfig(seed=5, **QUICK))
        _assert_core_invariants(completed)
        for d in completed.datasets():
            g, k, s = column_values(d, "g"), column_values(d, "k"), column_values(d, "s")
            assert set(np.unique(g)) <= {0.0, 1.0, 2.0}
            assert np.all(k >= 0) and np.all(k == np.round(k))
            assert np.all(s >= 0)
            assert np.any(s[d.states[:, 3] == CellState.IMPUTED] == 0.0)

    def test_selected_predictors_recorded(self, rng):
        ds = build_dataset(MIXED_VARIABLES, _mixed_columns(rng))
        completed = run(ds, EngineConfig(seed=5, **QUICK))
        chosen = completed.tables[0].selected_predictors
        assert set(chosen) == {"g", "k", "s"}
        assert set(chosen["s"]) == {"indicator", "amount"}

    def test_brackets_hold_for_every_table(self, rng):
        n = 200
        x = rng.standard_normal(n)
        s = np.exp(6.0 + x + 0.2 * rng.standard_normal(n))
        hide = np.arange(n) % 5 == 0
        columns = {
            "x": [float(v) for v in x],
            "s": [None if h else float(v) for v, h in zip(s, hide)],
            "s_lo": ["100" if h else "" for h in hide],
            "s_hi": ["200" if h else "" for h in hide],
        }
        ds = build_dataset(
            [variable("x"), variable("s", transform="signed-cube-root", bounds_low="s_lo", bounds_high="s_hi", min_value=0)],
            columns,
        )
        completed = run(ds, EngineConfig(seed=3, **QUICK))
        _assert_core_invariants(completed)
        for k in range(completed.m):
            values = completed.tables[k].values[hide, 1]
            assert values.min() >= 100.0 and values.max() <= 200.0

    def test_semicontinuous_brackets_force_indicator(self, rng):
        n = 150
        x = rng.standard_normal(n)
        amount = np.where(rng.random(n) < 0.5, np.exp(4.0 + x), 0.0)
        role = np.arange(n) % 10
        columns = {
            "x": [float(v) for v in x],
            "s": [None if r in (0, 1) else float(v) for v, r in zip(amount, role)],
            "s_lo": ["500" if r == 0 else ("0" if r == 1 else "") for r in role],
            "s_hi": ["600" if r == 0 else ("0" if r == 1 else "") for r in role],
        }
        ds = build_dataset([variable("x"), variable("s", "semicontinuous", bounds_low="s_lo", bounds_high="s_hi")], columns)
        completed = run(ds, EngineConfig(seed=8, **QUICK))
        for table in completed.tables:
            assert np.all((table.values[role == 0, 1] >= 500.0) & (table.values[role == 0, 1] <= 600.0))
            assert np.all(table.values[role == 1, 1] == 0.0)

    def test_predictor_only_cells_stay_missing(self, rng):
        cols = linear_columns(rng, 120)
        cols["p"] = [None if i % 4 == 0 else float(i) for i in range(120)]
        ds = build_dataset([variable("x"), variable("v"), variable("p", eligibility="predictor-only")], cols)
        completed = run(ds, EngineConfig(seed=2, **QUICK))
        _assert_core_invariants(completed)
        for table in completed.tables:
            assert np.sum(table.states[:, 2] == CellState.MISSING) == 30

    def test_nothing_to_impute(self):
        ds = build_dataset([variable("x"), variable("y")], {"x": ["1", "2"], "y": ["3", "."]})
        completed = run(ds, EngineConfig(m=3))
        assert completed.m == 3 and completed.order == []
        for table in completed.tables:
            np.testing.assert_array_equal(table.states, ds.states)

    def test_trace_has_one_record_per_variable_and_cycle(self, rng):
        ds = build_dataset([variable("x"), variable("v")], linear_columns(rng, 100))
        completed = run(ds, EngineConfig(m=2, burn_in_cycles=3, seed=4))
        records = [(t.chain, t.cycle) for t in completed.trace if t.variable == "v"]
        assert sorted(records) == [(c, k) for c in range(2) for k in (1, 2, 3)]


class TestSkipPatternRun:
    """Nested filter -> amount -> sub-amount survey; zero-tolerance checks."""

    @pytest.fixture(scope="class")
    def completed(self):
        ds = simulated_dataset("skip_pattern", 400, seed=21, missing_rate=0.25)
        return run(ds, EngineConfig(m=3, burn_in_cycles=4, seed=21))

    def test_core_invariants(self, completed):
        _assert_core_invariants(completed)

    def test_amounts_follow_final_filter(self, completed):
        for d in completed.datasets():
            has = column_values(d, "has_stocks")
            _, stock_states = d.column("stocks")
            assert np.all(stock_states[has == 0] == CellState.NOT_APPLICABLE)
            assert not np.any(stock_states[has == 1] == CellState.NOT_APPLICABLE)

    def test_sub_amount_asked_only_above_threshold(self, completed):
        for d in completed.datasets():
            stocks, stock_states = d.column("stocks")
            _, abroad_states = d.column("stocks_abroad")
            asked = (stock_states != CellState.NOT_APPLICABLE) & (np.nan_to_num(stocks) > 50000)
            assert np.all(abroad_states[asked] != CellState.NOT_APPLICABLE)
            assert np.all(abroad_states[~asked] == CellState.NOT_APPLICABLE)

    def test_bracketed_cells_inside_brackets(self, completed):
        source = completed.source
        j = source.index_of("stocks")
        bracketed = np.isfinite(source.lower[:, j]) & (source.states[:, j] != CellState.OBSERVED)
        assert bracketed.any()
        for table in completed.tables:
            valued = bracketed & (table.states[:, j] == CellState.IMPUTED)
            lo, hi = source.effective_bounds(j)
            assert np.all(table.values[valued, j] >= lo[valued])
            assert np.all(table.values[valued, j] <= hi[valued])

    def test_reported_amounts_keep_their_filter(self, completed):
        source = completed.source
        reported = (source.column("has_stocks")[1] == CellState.MISSING) & (source.column("stocks")[1] == CellState.OBSERVED)
        assert reported.any()
        for d in completed.datasets():
            assert np.all(column_values(d, "has_stocks")[reported] == 1.0)
            assert restriction_violations(d) == {}

    def test_no_negative_amounts(self, completed):
        for d in completed.datasets():
            for name in ("income", "stocks", "stocks_abroad"):
                values = column_values(d, name)
                assert np.all(values[~np.isnan(values)] >= 0.0)


class TestAnchoredFilters:
    """An amount reported despite a missing filter answer pins that answer in every table."""

    def test_categorical_filter_draws_keep_amounts_applicable(self, rng):
        ds = build_dataset(FILTER_VARIABLES, _filter_with_reported_amounts(rng))
        completed = run(ds, EngineConfig(m=3, burn_in_cycles=3, seed=8))
        _assert_core_invariants(completed)
        for d in completed.datasets():
            assert restriction_violations(d) == {}
            np.testing.assert_array_equal(column_values(d, "f")[ANCHORED_ROWS], [1.0] * 10)
        assert not any("break the restriction" in w.message for w in completed.warnings.records)

    def test_numeric_filter_falls_back_to_an_admissible_donor(self, rng):
        n = 200
        x = rng.standard_normal(n)
        x[180:190] = -1.5
        income = 1000.0 + 800.0 * x + 50.0 * rng.standard_normal(n)
        amount = 0.1 * income + rng.standard_normal(n)
        columns = {
            "x": [float(v) for v in x],
            "income": [None if 180 <= r < 190 else float(income[r]) for r in range(n)],
            "amount": [5.0 if 180 <= r < 190 else (float(amount[r]) if income[r] > 1000 else ".") for r in range(n)],
        }
        ds = build_dataset([variable("x"), variable("income"), variable("amount", restriction="income > 1000")], columns)
        completed = run(ds, EngineConfig(m=2, burn_in_cycles=2, seed=3))
        for d in completed.datasets():
            assert restriction_violations(d) == {}
            assert np.all(column_values(d, "income")[180:190] > 1000.0)
            assert np.all(d.column("amount")[0][180:190] == 5.0)
        assert any("admissible donor" in w.message for w in completed.warnings.records)

    def test_table_breaking_a_restriction_is_reported(self):
        ds = build_dataset(FILTER_VARIABLES[1:], {"f": ["", "yes"], "amount": ["5", "6"]})
        values, states = ds.values.copy(), ds.states.copy()
        values[0, 0] = 0.0
        states[0, 0] = CellState.IMPUTED
        completed = CompletedSet(ds, [CompletedTable(values, states, 0, 1)])
        report_violations(completed)
        [warning] = completed.warnings.records
        assert warning.variable == "amount" and warning.message.startswith("1 valued cells")

    def test_constraints_only_for_filters_with_anchored_dependents(self, rng):
        plan = EnginePlan.build(build_dataset(FILTER_VARIABLES, _filter_with_reported_amounts(rng)))
        assert set(plan.constraints) == {"f"}
        assert plan.constraints["f"].rows()[ANCHORED_ROWS].all()


class TestDeterminism:

    def test_same_seed_same_tables(self, rng):
        ds = build_dataset(MIXED_VARIABLES, _mixed_columns(rng, n=150))
        first = run(ds, EngineConfig(seed=99, **QUICK))
        second = run(ds, EngineConfig(seed=99, **QUICK))
        for a, b in zip(first.tables, second.tables):
            np.testing.assert_array_equal(a.values, b.values)
            np.testing.assert_array_equal(a.states, b.states)

    def test_thread_count_does_not_change_output(self, rng):
        ds = build_dataset(MIXED_VARIABLES, _mixed_columns(rng, n=150))
        serial = run(ds, EngineConfig(seed=7, m=3, burn_in_cycles=2, threads=1))
        parallel = run(ds, EngineConfig(seed=7, m=3, burn_in_cycles=2, threads=3))
        for a, b in zip(serial.tables, parallel.tables):
            np.testing.assert_array_equal(a.values, b.values)
            assert a.chain_index == b.chain_index

    def test_different_seeds_differ(self, rng):
        ds = build_dataset([variable("x"), variable("v")], linear_columns(rng, 100))
        a = run(ds, EngineConfig(seed=1, m=1, burn_in_cycles=2))
        b = run(ds, EngineConfig(seed=2, m=1, burn_in_cycles=2))
        assert not np.array_equal(a.tables[0].values, b.tables[0].values, equal_nan=True)

    def test_chains_are_distinct(self, rng):
        ds = build_dataset([variable("x"), variable("v")], linear_columns(rng, 100))
        completed = run(ds, EngineConfig(seed=1, m=2, burn_in_cycles=2))
        assert not np.array_equal(completed.tables[0].values, completed.tables[1].values, equal_nan=True)


class TestSingleChainThinned:

    def test_tables_are_spaced_by_between_cycles(self, rng):
        ds = build_dataset([variable("x"), variable("v")], linear_columns(rng, 100))
        cfg = EngineConfig(m=3, burn_in_cycles=2, between_cycles=2, chain_mode=ChainMode.SINGLE_CHAIN_THINNED, seed=6)
        completed = run(ds, cfg)
        assert [t.cycle for t in completed.tables] == [2, 4, 6]
        assert {t.chain_index for t in completed.tables} == {0}
        _assert_core_invariants(completed)
