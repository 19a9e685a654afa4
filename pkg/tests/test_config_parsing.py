"""
Test Group: Config Document Parsing

Covers the JSON config layer:
- Variable specs (kinds, levels, transforms, bounds columns, eligibility)
- Restriction expressions and their level resolution
- Engine settings precedence (defaults < document < CLI overrides)
- Rejection of malformed documents
"""

import json
import os

import pytest

from src import config as global_config
from src.domain.enums import BooleanOp, ChainMode, ComparisonOp, Eligibility, TransformKind, VariableKind
from src.domain.errors import ConfigError, DataValidationError
from src.domain.variables import BooleanExpression, Comparison
from src.parsers.config_parser import parse_config_document
from src.parsers.restriction_parser import parse_restriction

from tests.support import build_config, variable


# =============================================================================
# Restriction expressions
# =============================================================================

class TestRestrictionParser:
    """Tokenizing and precedence of skip-pattern rules."""

    def test_single_comparison(self):
        rule = parse_restriction("n_homes >= 2")
        assert rule.expression == Comparison("n_homes", ComparisonOp.GE, "2")
        assert rule.depends_on == frozenset({"n_homes"})

    def test_and_binds_tighter_than_or(self):
        rule = parse_restriction("a == 1 OR b == 1 AND c == 1")
        assert isinstance(rule.expression, BooleanExpression)
        assert rule.expression.op == BooleanOp.OR
        left, right = rule.expression.operands
        assert left == Comparison("a", ComparisonOp.EQ, "1")
        assert isinstance(right, BooleanExpression) and right.op == BooleanOp.AND

    def test_parentheses_group(self):
        rule = parse_restriction("(a == 1 OR b == 1) AND c != 'x'")
        assert rule.expression.op == BooleanOp.AND
        assert rule.depends_on == frozenset({"a", "b", "c"})

    def test_symbolic_operators_and_quoted_labels(self):
        rule = parse_restriction("owns == \"yes\" && value > 0")
        first, second = rule.expression.operands
        assert first.constant == "yes"
        assert second.op == ComparisonOp.GT

    @pytest.mark.parametrize("text", ["", "   ", "a ==", "a == 1 AND", "(a == 1", "a = 1", "a == 1 b"])
    def test_malformed_expressions_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_restriction(text)


# =============================================================================
# Variable specs
# =============================================================================

class TestVariableSpecs:
    """Building typed VariableSpecs from the document."""

    def test_kinds_and_defaults(self):
        cfg = build_config([
            variable("age"),
            variable("educ", "categorical", levels=["low", "high"]),
            variable("kids", "count"),
            variable("stocks", "semicontinuous", transform="signed-cube-root", min_value=0),
        ])
        kinds = [s.kind for s in cfg.variables]
        assert kinds == [VariableKind.CONTINUOUS, VariableKind.CATEGORICAL, VariableKind.COUNT, VariableKind.SEMICONTINUOUS]
        assert cfg.spec("age").transform == TransformKind.NONE
        assert cfg.spec("age").eligibility == Eligibility.IMPUTED_AND_PREDICTOR
        assert cfg.spec("stocks").transform == TransformKind.SIGNED_CUBE_ROOT
        assert cfg.spec("stocks").static_bounds() == (0.0, float("inf"))

    def test_restriction_constant_resolves_to_level_index(self):
        cfg = build_config([
            variable("owns", "categorical", levels=["no", "yes"]),
            variable("value", restriction="owns == 'yes'"),
        ])
        assert cfg.spec("value").restriction.expression == Comparison("owns", ComparisonOp.EQ, 1.0)

    def test_numeric_restriction_constant_becomes_float(self):
        cfg = build_config([variable("stocks"), variable("abroad", restriction="stocks > 50000")])
        assert cfg.spec("abroad").restriction.expression.constant == 50000.0

    def test_unknown_level_in_restriction(self):
        with pytest.raises(DataValidationError, match="Unknown level 'maybe'"):
            build_config([
                variable("owns", "categorical", levels=["no", "yes"]),
                variable("value", restriction="owns == 'maybe'"),
            ])

    def test_unknown_column_in_restriction(self):
        with pytest.raises(DataValidationError, match="unknown column 'ghost'"):
            build_config([variable("value", restriction="ghost == 1")])

    def test_self_restriction_rejected(self):
        with pytest.raises(DataValidationError, match="own restriction"):
            build_config([variable("value", restriction="value > 0")])

    def test_cyclic_restrictions_rejected(self):
        with pytest.raises(DataValidationError, match="Cyclic restriction graph"):
            build_config([variable("a", restriction="b > 0"), variable("b", restriction="a > 0")])

    def test_categorical_needs_two_levels(self):
        with pytest.raises(DataValidationError, match="at least 2 levels"):
            build_config([variable("flag", "categorical", levels=["only"])])

    def test_bounds_on_count_rejected(self):
        with pytest.raises(DataValidationError, match="Bounds are only allowed"):
            build_config([variable("kids", "count", min_value=0)])

    def test_transform_on_categorical_rejected(self):
        with pytest.raises(DataValidationError, match="Transform"):
            build_config([variable("g", "categorical", levels=["a", "b"], transform="signed-cube-root")])

    def test_bounds_columns_come_in_pairs(self):
        with pytest.raises(ConfigError, match="bounds_low and bounds_high"):
            build_config([variable("stocks", bounds_low="stocks_lo")])

    def test_numeric_sentinels_are_stringified(self):
        cfg = build_config([variable("income", missing_sentinels=[999999, -1.0])])
        assert cfg.spec("income").missing_sentinels == ("999999", "-1")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError, match="kind must be one of"):
            build_config([variable("x", "ordinal")])

    def test_duplicate_variable_names(self):
        with pytest.raises(DataValidationError, match="Duplicate column"):
            build_config([variable("x"), variable("x")])

    def test_empty_variable_list_rejected(self):
        with pytest.raises(ConfigError):
            build_config([])

    def test_unexpected_key_rejected(self):
        with pytest.raises(ConfigError):
            build_config([variable("x", colour="red")])

    def test_id_column_clashing_with_variable(self):
        with pytest.raises(DataValidationError, match="also declared as variables"):
            build_config([variable("id"), variable("x")], id_column="id")


# =============================================================================
# Recode rules and diagnostics section
# =============================================================================

class TestRecodeAndDiagnostics:

    def test_flag_column_is_registered(self):
        cfg = build_config(
            [variable("income")],
            recode=[{"variable": "income", "flag_column": "income_flag", "imputed_codes": [2, 3]}],
        )
        assert cfg.flag_columns == ["income_flag"]
        assert cfg.recode_rules[0].imputed_codes == frozenset({"2", "3"})

    def test_recode_needs_exactly_one_condition(self):
        with pytest.raises(ConfigError, match="exactly one"):
            build_config([variable("income")], recode=[{"variable": "income"}])

    def test_recode_of_unknown_variable(self):
        with pytest.raises(DataValidationError, match="unknown variable"):
            build_config([variable("income")], recode=[{"variable": "wage", "sentinel": -9}])

    def test_diagnostics_section(self):
        cfg = build_config(
            [variable("a"), variable("b"), variable("d")],
            diagnostics={
                "correlation_variables": ["a", "b"],
                "aggregate": {"name": "total", "components": ["a", "b"], "negative_components": ["d"]},
                "summary_variable": "total",
                "regression": {"response": "a", "predictors": ["b"]},
                "indicator_alert_threshold": 0.2,
            },
        )
        settings = cfg.diagnostics
        assert settings.aggregate_name == "total"
        assert settings.aggregate_components == ["a", "b"]
        assert settings.negative_components == ["d"]
        assert settings.regression_response == "a"
        assert settings.indicator_alert_threshold == 0.2

    def test_diagnostics_defaults(self):
        settings = build_config([variable("a")]).diagnostics
        assert settings.correlation_variables == []
        assert settings.summary_variable is None
        assert settings.indicator_alert_threshold == global_config.INDICATOR_ALERT_THRESHOLD


# =============================================================================
# Engine settings precedence
# =============================================================================

class TestEngineSettings:

    def test_builtin_defaults(self):
        engine = build_config([variable("x")]).engine_config()
        assert engine.m == global_config.DEFAULT_M
        assert engine.burn_in_cycles == global_config.DEFAULT_BURN_IN_CYCLES
        assert engine.between_cycles == global_config.DEFAULT_BETWEEN_CYCLES
        assert engine.chain_mode == ChainMode.INDEPENDENT_CHAINS
        assert engine.seed == global_config.DEFAULT_SEED
        assert engine.selection.max_predictors == global_config.MAX_PREDICTORS

    def test_document_then_overrides(self):
        cfg = build_config([variable("x")], engine={"m": 3, "seed": 7, "chain_mode": "single-chain-thinned"})
        engine = cfg.engine_config({"m": 5, "seed": None, "min_r2_increase": 0.02})
        assert engine.m == 5
        assert engine.seed == 7
        assert engine.chain_mode == ChainMode.SINGLE_CHAIN_THINNED
        assert engine.selection.min_r2_increase == 0.02

    @pytest.mark.parametrize("overrides", [{"m": 0}, {"burn_in_cycles": 0}, {"threads": 0}, {"min_r2_increase": 1.5}])
    def test_invalid_settings(self, overrides):
        with pytest.raises(ConfigError):
            build_config([variable("x")]).engine_config(overrides)

    def test_unknown_chain_mode_in_document(self):
        with pytest.raises(ConfigError, match="chain_mode"):
            build_config([variable("x")], engine={"chain_mode": "parallel"})

    def test_as_dict_is_json_ready(self):
        echo = build_config([variable("x")]).engine_config().as_dict()
        assert echo["chain_mode"] == global_config.DEFAULT_CHAIN_MODE
        json.dumps(echo)


class TestConfigFile:

    def test_reads_json_file(self, temp_data_dir):
        path = os.path.join(temp_data_dir, "config.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"variables": [{"name": "x", "kind": "continuous"}]}, f)
        assert parse_config_document(path).variables[0].name == "x"

    def test_missing_file(self, temp_data_dir):
        with pytest.raises(ConfigError, match="not found"):
            parse_config_document(os.path.join(temp_data_dir, "absent.json"))

    def test_invalid_json(self, temp_data_dir):
        path = os.path.join(temp_data_dir, "broken.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write("{\"variables\": [")
        with pytest.raises(ConfigError):
            parse_config_document(path)
