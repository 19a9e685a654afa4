# src/parsers/config_parser.py
import logging
from dataclasses import dataclass, field, KW_ONLY
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from src.domain.enums import ChainMode, Eligibility, TransformKind, VariableKind
from src.domain.errors import ConfigError, DataValidationError
from src.domain.run_config import EngineConfig, SelectionConfig
from src.domain.variables import Comparison, RecodeRule, RestrictionRule, VariableSpec
from src.processing.restrictions import restriction_order

from .raw_models import RawConfigDocument, RawDiagnosticsSection, RawVariableConfig
from .restriction_parser import parse_restriction

logger = logging.getLogger(__name__)


@dataclass
class DiagnosticsSettings:
    correlation_variables: List[str] = field(default_factory=list)
    aggregate_name: str = "net_worth"
    aggregate_components: List[str] = field(default_factory=list)
    negative_components: List[str] = field(default_factory=list)
    summary_variable: Optional[str] = None
    regression_response: Optional[str] = None
    regression_predictors: List[str] = field(default_factory=list)
    indicator_alert_threshold: float = 0.10


@dataclass
class ImputationConfig:
    """Domain view of one config document: typed variable specs plus run settings."""
    variables: List[VariableSpec]

    _: KW_ONLY
    recode_rules: List[RecodeRule] = field(default_factory=list)
    id_column: Optional[str] = None
    weight_column: Optional[str] = None
    flag_columns: List[str] = field(default_factory=list)
    engine_settings: Dict[str, Any] = field(default_factory=dict) # Only the keys the document sets
    diagnostics: DiagnosticsSettings = field(default_factory=DiagnosticsSettings)

    def spec(self, name: str) -> VariableSpec:
        for spec in self.variables:
            if spec.name == name:
                return spec
        raise DataValidationError(f"Unknown column '{name}'.")

    def engine_config(self, overrides: Optional[Dict[str, Any]] = None) -> EngineConfig:
        """Built-in defaults, then the document's engine section, then `overrides` (CLI flags; None means unset)."""
        merged: Dict[str, Any] = dict(self.engine_settings)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

        selection_keys = {"min_r2_increase", "max_predictors"}
        selection = SelectionConfig(**{k: merged.pop(k) for k in list(merged) if k in selection_keys})
        if "chain_mode" in merged and not isinstance(merged["chain_mode"], ChainMode):
            merged["chain_mode"] = ChainMode(merged["chain_mode"])
        try:
            return EngineConfig(selection=selection, **merged)
        except TypeError as e:
            raise ConfigError(f"Invalid engine settings {sorted(merged)}: {e}") from e


def _resolve_constants(rule: RestrictionRule, owner: str, kinds: Dict[str, RawVariableConfig]) -> RestrictionRule:
    def _resolve(node: Comparison) -> Comparison:
        raw = kinds.get(node.variable)
        if raw is None:
            raise DataValidationError(f"Restriction of '{owner}' references unknown column '{node.variable}'.")
        token = str(node.constant)
        if raw.kind == VariableKind.CATEGORICAL.value:
            levels = raw.levels or []
            if token not in levels:
                raise DataValidationError(
                    f"Unknown level '{token}' for categorical variable '{node.variable}' in restriction of '{owner}'."
                )
            return Comparison(node.variable, node.op, float(levels.index(token)))
        try:
            return Comparison(node.variable, node.op, float(token))
        except ValueError:
            raise DataValidationError(
                f"Restriction of '{owner}' compares non-categorical '{node.variable}' with non-numeric '{token}'."
            )
    return rule.map_constants(_resolve)


def _build_variable(raw: RawVariableConfig, kinds: Dict[str, RawVariableConfig]) -> VariableSpec:
    restriction = None
    if raw.restriction is not None:
        restriction = _resolve_constants(parse_restriction(raw.restriction), raw.name, kinds)
    bounds_source = (raw.bounds_low, raw.bounds_high) if raw.bounds_low is not None else None
    return VariableSpec(
        raw.name, VariableKind(raw.kind),
        levels=tuple(raw.levels or ()),
        transform=TransformKind(raw.transform),
        restriction=restriction,
        bounds_source=bounds_source,
        min_value=raw.min_value,
        max_value=raw.max_value,
        eligibility=Eligibility(raw.eligibility),
        missing_sentinels=tuple(raw.missing_sentinels),
    )


def _build_diagnostics(raw: RawDiagnosticsSection) -> DiagnosticsSettings:
    settings = DiagnosticsSettings(
        correlation_variables=list(raw.correlation_variables),
        summary_variable=raw.summary_variable,
        indicator_alert_threshold=raw.indicator_alert_threshold,
    )
    if raw.aggregate is not None:
        settings.aggregate_name = raw.aggregate.name
        settings.aggregate_components = list(raw.aggregate.components)
        settings.negative_components = list(raw.aggregate.negative_components)
    if raw.regression is not None:
        settings.regression_response = raw.regression.response
        settings.regression_predictors = list(raw.regression.predictors)
    return settings


def build_imputation_config(document: RawConfigDocument) -> ImputationConfig:
    names = [v.name for v in document.variables]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise DataValidationError(f"Duplicate column(s) in config: {duplicates}")

    kinds = {v.name: v for v in document.variables}
    variables = [_build_variable(raw, kinds) for raw in document.variables]
    restriction_order(variables) # Rejects cycles up front

    recode_rules = []
    for raw_rule in document.recode:
        if raw_rule.variable not in kinds:
            raise DataValidationError(f"Recode rule references unknown variable '{raw_rule.variable}'.")
        recode_rules.append(RecodeRule(
            raw_rule.variable,
            sentinel=raw_rule.sentinel,
            flag_column=raw_rule.flag_column,
            imputed_codes=frozenset(raw_rule.imputed_codes),
            edited_codes=frozenset(raw_rule.edited_codes),
        ))

    flag_columns = list(document.flag_columns)
    for rule in recode_rules:
        if rule.flag_column is not None and rule.flag_column not in flag_columns:
            flag_columns.append(rule.flag_column)

    reserved = {document.id_column, document.weight_column, *flag_columns} - {None}
    clashes = sorted(reserved & set(names))
    if clashes:
        raise DataValidationError(f"Id/weight/flag column(s) {clashes} are also declared as variables.")

    engine_settings = {k: v for k, v in document.engine.dict().items() if v is not None}
    config = ImputationConfig(
        variables,
        recode_rules=recode_rules,
        id_column=document.id_column,
        weight_column=document.weight_column,
        flag_columns=flag_columns,
        engine_settings=engine_settings,
        diagnostics=_build_diagnostics(document.diagnostics),
    )
    logger.info(
        f"Config parsed: {len(variables)} variables, "
        f"{sum(1 for v in variables if v.restriction is not None)} restricted, {len(recode_rules)} recode rules."
    )
    return config


def parse_config_document(source: Union[str, Path, Dict[str, Any]]) -> ImputationConfig:
    """Accepts a path to a JSON document or an already-decoded mapping."""
    try:
        if isinstance(source, dict):
            document = RawConfigDocument.parse_obj(source)
        else:
            path = Path(source)
            if not path.is_file():
                raise ConfigError(f"Config file not found: {path}")
            document = RawConfigDocument.parse_raw(path.read_text(encoding="utf-8-sig"))
    except ValidationError as e:
        raise ConfigError(f"Config document is invalid: {e}") from e
    return build_imputation_config(document)
