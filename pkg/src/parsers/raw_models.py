# src/parsers/raw_models.py
from typing import Any, List, Optional

from pydantic import BaseModel, Field, root_validator, validator

from src import config as global_config
from src.domain.enums import ChainMode, Eligibility, TransformKind, VariableKind


def _as_token(v: Any) -> str:
    """Config values like 999999 or 1 are compared against raw CSV tokens."""
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v).strip()


class RawVariableConfig(BaseModel):
    name: str
    kind: str
    levels: Optional[List[str]] = None
    transform: str = TransformKind.NONE.value
    restriction: Optional[str] = None
    bounds_low: Optional[str] = None # CSV column holding the per-cell lower bracket
    bounds_high: Optional[str] = None
    min_value: Optional[float] = None
    max_value: Optional[float] = None
    eligibility: str = Eligibility.IMPUTED_AND_PREDICTOR.value
    missing_sentinels: List[str] = Field(default_factory=list)

    @validator('name', pre=True)
    def strip_name(cls, v: Any) -> str:
        return str(v).strip()

    @validator('kind')
    def validate_kind(cls, v: str) -> str:
        allowed = [k.value for k in VariableKind]
        if v not in allowed:
            raise ValueError(f"kind must be one of {allowed}, got '{v}'")
        return v

    @validator('transform')
    def validate_transform(cls, v: str) -> str:
        allowed = [t.value for t in TransformKind]
        if v not in allowed:
            raise ValueError(f"transform must be one of {allowed}, got '{v}'")
        return v

    @validator('eligibility')
    def validate_eligibility(cls, v: str) -> str:
        allowed = [e.value for e in Eligibility]
        if v not in allowed:
            raise ValueError(f"eligibility must be one of {allowed}, got '{v}'")
        return v

    @validator('levels', 'missing_sentinels', pre=True, each_item=True)
    def stringify_tokens(cls, v: Any) -> str:
        return _as_token(v)

    @validator('restriction', 'bounds_low', 'bounds_high', pre=True)
    def blank_to_none(cls, v: Any) -> Optional[str]:
        if v is None or str(v).strip() == "":
            return None
        return str(v).strip()

    @root_validator(skip_on_failure=True)
    def bounds_come_in_pairs(cls, values):
        if (values.get('bounds_low') is None) != (values.get('bounds_high') is None):
            raise ValueError(f"variable '{values.get('name')}': bounds_low and bounds_high must be given together")
        return values

    class Config:
        extra = 'forbid'


class RawRecodeRule(BaseModel):
    variable: str
    sentinel: Optional[str] = None
    flag_column: Optional[str] = None
    imputed_codes: List[str] = Field(default_factory=list) # Flag codes meaning "imputed by another method"
    edited_codes: List[str] = Field(default_factory=list) # Documented only; edited values stay observed

    @validator('sentinel', pre=True)
    def stringify_sentinel(cls, v: Any) -> Optional[str]:
        return None if v is None else _as_token(v)

    @validator('imputed_codes', 'edited_codes', pre=True, each_item=True)
    def stringify_codes(cls, v: Any) -> str:
        return _as_token(v)

    @root_validator(skip_on_failure=True)
    def one_condition(cls, values):
        has_sentinel = values.get('sentinel') is not None
        has_flag = values.get('flag_column') is not None
        if has_sentinel == has_flag:
            raise ValueError(f"recode rule for '{values.get('variable')}' needs exactly one of sentinel / flag_column")
        if has_flag and not values.get('imputed_codes'):
            raise ValueError(f"recode rule for '{values.get('variable')}' with flag_column needs imputed_codes")
        return values

    class Config:
        extra = 'forbid'


class RawEngineSection(BaseModel):
    m: Optional[int] = None
    burn_in_cycles: Optional[int] = None
    between_cycles: Optional[int] = None
    chain_mode: Optional[str] = None
    seed: Optional[int] = None
    min_r2_increase: Optional[float] = None
    max_predictors: Optional[int] = None

    @validator('chain_mode')
    def validate_chain_mode(cls, v: Optional[str]) -> Optional[str]:
        allowed = [c.value for c in ChainMode]
        if v is not None and v not in allowed:
            raise ValueError(f"chain_mode must be one of {allowed}, got '{v}'")
        return v

    class Config:
        extra = 'forbid'


class RawAggregateSection(BaseModel):
    name: str = "net_worth"
    components: List[str]
    negative_components: List[str] = Field(default_factory=list) # Debts, subtracted

    class Config:
        extra = 'forbid'


class RawRegressionSection(BaseModel):
    response: str
    predictors: List[str]

    class Config:
        extra = 'forbid'


class RawDiagnosticsSection(BaseModel):
    correlation_variables: List[str] = Field(default_factory=list)
    aggregate: Optional[RawAggregateSection] = None
    summary_variable: Optional[str] = None
    regression: Optional[RawRegressionSection] = None
    indicator_alert_threshold: float = global_config.INDICATOR_ALERT_THRESHOLD

    class Config:
        extra = 'forbid'


class RawConfigDocument(BaseModel):
    variables: List[RawVariableConfig]
    recode: List[RawRecodeRule] = Field(default_factory=list)
    id_column: Optional[str] = None
    weight_column: Optional[str] = None
    flag_columns: List[str] = Field(default_factory=list)
    engine: RawEngineSection = Field(default_factory=RawEngineSection)
    diagnostics: RawDiagnosticsSection = Field(default_factory=RawDiagnosticsSection)

    @validator('variables')
    def at_least_one_variable(cls, v: List[RawVariableConfig]) -> List[RawVariableConfig]:
        if not v:
            raise ValueError("config must declare at least one variable")
        return v

    class Config:
        extra = 'forbid'
