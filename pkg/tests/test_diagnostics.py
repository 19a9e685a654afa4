"""
Test Group: Diagnostics and Output Files

- Summary comparison, relative differences and Bland-Altman tables
- FMI and indicator-proportion tables over a small hand-built completed set
- Correlation and regression comparisons
- Weighted quantiles, provenance rows and the run manifest
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src import config
from src.domain.chain import CompletedSet, CompletedTable, TraceRecord
from src.domain.enums import CellState, WarningStage
from src.domain.errors import DataValidationError
from src.domain.results import CoefficientTable, WarningLog
from src.inference.pooling import pool_regression
from src.reporting import diagnostics, report_writer

from tests.support import build_dataset, variable


def _completed(ds, imputed_values):
    """One table per entry of imputed_values, filling the source's Missing cells in row-major order."""
    tables = []
    missing = ds.states == CellState.MISSING
    for k, fill in enumerate(imputed_values):
        values = ds.values.copy()
        states = ds.states.copy()
        values[missing] = fill
        states[missing] = CellState.IMPUTED
        tables.append(CompletedTable(values, states, k, 3))
    return CompletedSet(ds, tables, order=[s.name for s in ds.variables if s.is_imputed])


# =============================================================================
# Summary and Bland-Altman
# =============================================================================

class TestSummaryCompare:

    @pytest.mark.parametrize("obs, com, expected", [(2.0, 3.0, 0.5), (4.0, 2.0, -0.5), (-2.0, -1.0, -0.5)])
    def test_relative_difference(self, obs, com, expected):
        assert diagnostics.relative_difference(obs, com) == pytest.approx(expected)

    def test_relative_difference_with_zero_observed(self):
        assert np.isnan(diagnostics.relative_difference(0.0, 1.0))

    def test_statistics_and_layout(self):
        frame = diagnostics.summary_compare(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0, 4.0, np.nan]))
        assert list(frame.columns) == ["statistic", "obs", "com", "rel_diff"]
        assert list(frame["statistic"]) == diagnostics.SUMMARY_STATISTICS
        row = frame.set_index("statistic")
        assert row.loc["n", "obs"] == 3 and row.loc["n", "com"] == 4
        assert row.loc["mean", "rel_diff"] == pytest.approx(0.25)
        assert row.loc["max", "com"] == 4.0

    def test_several_completed_arrays_are_averaged(self):
        frame = diagnostics.summary_compare(np.array([1.0, 3.0]), [np.array([0.0, 2.0]), np.array([2.0, 4.0])])
        assert frame.set_index("statistic").loc["mean", "com"] == pytest.approx(2.0)

    def test_zero_observed_statistic_has_blank_relative_difference(self):
        frame = diagnostics.summary_compare(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]))
        assert np.isnan(frame.set_index("statistic").loc["min", "rel_diff"])

    def test_needs_a_completed_array(self):
        with pytest.raises(DataValidationError):
            diagnostics.summary_compare(np.array([1.0]), [])


class TestBlandAltman:

    def test_constant_offset(self):
        b = np.array([1.0, 4.0, 9.0, 2.0])
        result = diagnostics.bland_altman(b + 1.0, b)
        assert result.mean_diff == pytest.approx(1.0)
        assert result.sd_diff == pytest.approx(0.0)
        assert result.lower == pytest.approx(1.0) and result.upper == pytest.approx(1.0)
        np.testing.assert_allclose(result.means, b + 0.5)

    def test_limits_are_two_standard_deviations(self):
        result = diagnostics.bland_altman(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.0]))
        assert result.mean_diff == 2.0 and result.sd_diff == pytest.approx(1.0)
        assert (result.lower, result.upper) == pytest.approx((0.0, 4.0))

    def test_frame_layout(self):
        frame = diagnostics.bland_altman(np.array([1.0, 2.0]), np.array([2.0, 2.0])).as_frame()
        assert list(frame.columns) == ["mean", "diff", "mean_diff", "lower", "upper"]
        assert len(frame) == 2

    def test_length_mismatch(self):
        with pytest.raises(DataValidationError):
            diagnostics.bland_altman(np.array([1.0, 2.0]), np.array([1.0]))

    def test_needs_two_pairs(self):
        with pytest.raises(DataValidationError):
            diagnostics.bland_altman(np.array([1.0]), np.array([1.0]))


# =============================================================================
# FMI and indicator proportions
# =============================================================================

class TestFmiTables:

    def test_fmi_of_pooled_mean(self):
        ds = build_dataset([variable("v")], {"v": ["1", "2", "", "4"]})
        frame = diagnostics.fmi_table(_completed(ds, [3.0, 5.0]))
        row = frame.iloc[0]
        assert row["estimand"] == "v"
        assert row["q_bar"] == pytest.approx(2.75)
        assert row["b"] == pytest.approx(0.125)
        assert row["w"] == pytest.approx((5.0 / 12.0 + 10.0 / 12.0) / 2)
        assert row["fmi"] == pytest.approx(1.5 * 0.125 / (0.625 + 1.5 * 0.125))

    def test_single_table_skips_fmi(self):
        ds = build_dataset([variable("v")], {"v": ["1", "2", "", "4"]})
        assert diagnostics.fmi_table(_completed(ds, [3.0])).empty

    def test_indicator_rates(self):
        ds = build_dataset([variable("s", "semicontinuous")], {"s": ["0", "5", "0", "3", "", ""]})
        completed = _completed(ds, [np.array([0.0, 7.0]), np.array([2.0, 0.0])])
        row = diagnostics.indicator_props(ds, completed).iloc[0]
        assert row["prop_positive_obs"] == 0.5
        assert row["prop_positive_imp"] == 0.5
        assert row["n_missing_indicators"] == 2
        assert not row["alert"]

    def test_indicator_alert(self):
        ds = build_dataset([variable("s", "semicontinuous")], {"s": ["0", "5", "0", "3", "", ""]})
        completed = _completed(ds, [np.array([1.0, 7.0]), np.array([2.0, 9.0])])
        row = diagnostics.indicator_props(ds, completed).iloc[0]
        assert row["prop_positive_imp"] == 1.0
        assert row["alert"]

    def test_indicator_table_skips_other_kinds(self):
        ds = build_dataset([variable("v")], {"v": ["1", ""]})
        assert diagnostics.indicator_props(ds, _completed(ds, [1.0, 2.0])).empty


# =============================================================================
# Correlations, aggregates and regressions
# =============================================================================

class TestComparisons:

    def test_identical_sets_give_identical_matrices(self, rng):
        columns = {name: [float(v) for v in rng.standard_normal(50)] for name in ("a", "b", "c")}
        ds = build_dataset([variable("a"), variable("b"), variable("c")], columns)
        completed = _completed(ds, [0.0, 0.0])
        corr_a, corr_b, scatter = diagnostics.correlation_compare(completed, completed, ["a", "b", "c"])
        pd.testing.assert_frame_equal(corr_a, corr_b)
        assert np.isnan(corr_a.loc["a", "b"]) and not np.isnan(corr_a.loc["b", "a"])
        assert len(scatter) == 3
        np.testing.assert_allclose(scatter["r_mi"], scatter["r_hd"])

    def test_correlation_needs_two_variables(self):
        ds = build_dataset([variable("a")], {"a": ["1", "2"]})
        with pytest.raises(DataValidationError):
            diagnostics.correlation_compare(_completed(ds, [1.0]), _completed(ds, [1.0]), ["a"])

    def test_aggregate_counts_not_applicable_as_zero(self):
        ds = build_dataset(
            [variable("has", "categorical", levels=["no", "yes"]), variable("a", restriction="has == 'yes'"),
             variable("b"), variable("debt")],
            {"has": ["no", "yes", "yes"], "a": [".", "10", ""], "b": ["5", "5", "5"], "debt": ["1", "2", "3"]},
        )
        total = diagnostics.aggregate_components(ds, ["a", "b"], ["debt"])
        assert total[0] == 4.0 and total[1] == 13.0
        assert np.isnan(total[2])

    def test_regression_compare_ratios(self):
        names = ("(intercept)", "x")
        obs = CoefficientTable(names, np.array([1.0, 2.0]), np.array([0.5, 0.5]), df_resid=50.0)
        hd = CoefficientTable(names, np.array([1.1, 1.8]), np.array([0.5, 0.25]), df_resid=80.0)
        mi = pool_regression([
            CoefficientTable(names, np.array([1.0, 2.0]), np.array([0.5, 0.5]), df_resid=80.0),
            CoefficientTable(names, np.array([1.0, 2.2]), np.array([0.5, 0.5]), df_resid=80.0),
        ])
        frame = diagnostics.regression_compare(obs, mi, hd).set_index("coefficient")
        assert frame.loc["(intercept)", "overall_var_ratio"] == pytest.approx(1.0)
        assert frame.loc["x", "within_var_ratio"] == pytest.approx(4.0)
        assert frame.loc["x", "mi_est"] == pytest.approx(2.1)
        assert frame.loc["x", "obs_ci_lo"] < 2.0 < frame.loc["x", "obs_ci_hi"]

    def test_regression_compare_needs_one_formula(self):
        obs = CoefficientTable(("(intercept)", "x"), np.zeros(2), np.ones(2))
        hd = CoefficientTable(("(intercept)", "z"), np.zeros(2), np.ones(2))
        mi = pool_regression([obs, obs])
        with pytest.raises(DataValidationError):
            diagnostics.regression_compare(obs, mi, hd)


class TestWeightedSummaries:

    @pytest.mark.parametrize("q, expected", [(0.0, 1.0), (0.25, 1.0), (0.5, 2.0), (0.51, 3.0), (1.0, 4.0)])
    def test_equal_weights(self, q, expected):
        values = np.array([4.0, 1.0, 3.0, 2.0])
        assert diagnostics.weighted_quantiles(values, np.ones(4), [q])[0] == expected

    def test_heavy_weight_moves_the_median(self):
        assert diagnostics.weighted_quantiles(np.array([1.0, 2.0]), np.array([1.0, 3.0]), [0.5])[0] == 2.0

    def test_summary_omits_zeros(self):
        frame = diagnostics.weighted_summary(np.array([0.0, 2.0, 4.0, np.nan]), np.array([5.0, 1.0, 1.0, 1.0]),
                                             omit_zeros=True).set_index("statistic")
        assert frame.loc["n", "value"] == 2
        assert frame.loc["weighted_mean", "value"] == pytest.approx(3.0)

    def test_summary_of_nothing(self):
        with pytest.raises(DataValidationError):
            diagnostics.weighted_summary(np.array([0.0]), omit_zeros=True)

    def test_cycle_trace(self):
        ds = build_dataset([variable("v")], {"v": ["1", ""]})
        completed = _completed(ds, [2.0])
        completed.trace.extend([TraceRecord(0, 1, "v", 2.0, 1), TraceRecord(0, 2, "v", 2.5, 1)])
        frame = diagnostics.cycle_trace(completed)
        assert list(frame.columns) == ["chain", "cycle", "variable", "imputed_mean", "n_imputed"]
        assert list(frame["cycle"]) == [1, 2]


# =============================================================================
# Report files
# =============================================================================

class TestReportWriter:

    def test_provenance_rows(self):
        ds = build_dataset(
            [variable("f", "categorical", levels=["no", "yes"]), variable("v", restriction="f == 'yes'")],
            {"f": ["yes", "no", "yes"], "v": ["1", ".", ""]},
        )
        frame = report_writer.provenance_frame(_completed(ds, [2.0, 3.0]))
        assert list(frame.columns) == ["table", "row", "variable", "chain", "imputed"]
        assert len(frame) == 4
        first = frame[frame["table"] == 1].set_index("row")
        assert first.loc[2, "imputed"] == 0 and first.loc[3, "imputed"] == 1
        assert set(frame["chain"]) == {0, 1}

    def test_completed_tables_and_provenance_files(self, temp_data_dir):
        ds = build_dataset([variable("v")], {"v": ["1.5", ""]})
        paths = report_writer.write_completed_tables(_completed(ds, [2.0, 3.0]), temp_data_dir)
        assert [p.name for p in paths] == ["completed_01.csv", "completed_02.csv"]
        assert paths[1].read_text().splitlines() == ["v", "1.5", "3"]
        assert (Path(temp_data_dir) / config.PROVENANCE_FILE).exists()

    def test_manifest(self, temp_data_dir):
        ds = build_dataset([variable("v")], {"v": ["1", ""]})
        completed = _completed(ds, [2.0, 3.0])
        completed.tables[0].selected_predictors["v"] = {"value": []}
        warnings = WarningLog()
        warnings.add(WarningStage.IMPUTE, "ridge fallback", variable="v", chain=1, cycle=2)
        manifest = report_writer.build_manifest(command="impute", settings={"m": 2}, warnings=warnings,
                                                completed=completed, outputs=["completed_01.csv"])
        assert manifest["tool"] == "chainimp" and manifest["version"] == config.APP_VERSION
        assert manifest["imputation_order"] == ["v"]
        assert set(manifest["selected_predictors"]) == {"table_01", "table_02"}
        assert manifest["warnings"][0] == {"stage": "impute", "variable": "v", "chain": 1, "cycle": 2,
                                           "message": "ridge fallback"}

        path = report_writer.write_manifest(manifest, temp_data_dir)
        assert json.loads(path.read_text())["command"] == "impute"

    def test_manifest_echoes_variables_and_clipped_draws(self):
        variables = [
            variable("owns", "categorical", levels=["no", "yes"]),
            variable("value", transform="signed-cube-root", restriction="owns == 'yes'",
                     bounds_low="lo", bounds_high="hi", min_value=0),
        ]
        ds = build_dataset(variables, {"owns": ["yes", "yes"], "value": ["10", ""], "lo": ["", "5"], "hi": ["", "50"]})
        warnings = WarningLog()
        warnings.count_clipped("value", 2)
        other = WarningLog()
        other.count_clipped("value", 1)
        other.count_clipped("owns", 0)
        warnings.extend(other)
        manifest = report_writer.build_manifest(command="impute", settings={}, warnings=warnings,
                                                completed=_completed(ds, [20.0, 30.0]))
        assert manifest["clipped_draws"] == {"value": 3}
        echoed = {v["name"]: v for v in manifest["variables"]}
        assert echoed["owns"]["kind"] == "categorical" and echoed["owns"]["levels"] == ["no", "yes"]
        assert echoed["value"]["transform"] == "signed-cube-root"
        assert echoed["value"]["restriction"] == "owns == 'yes'"
        assert echoed["value"]["bounds_source"] == ["lo", "hi"]
        assert echoed["value"]["min_value"] == 0
        assert echoed["owns"]["restriction"] is None
        json.dumps(manifest)

    def test_report_decimals(self, temp_data_dir):
        path = report_writer.write_frame(pd.DataFrame({"x": [1.23456]}), Path(temp_data_dir) / "r.csv", decimals=2)
        assert path.read_text().splitlines() == ["x", "1.23"]
