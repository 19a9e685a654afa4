# src/domain/run_config.py
from dataclasses import dataclass, field, asdict
from typing import Any, Dict

from src import config as global_config
from .enums import ChainMode
from .errors import ConfigError


@dataclass(frozen=True)
class SelectionConfig:
    min_r2_increase: float = global_config.MIN_R2_INCREASE
    max_predictors: int = global_config.MAX_PREDICTORS
    collinearity_tol: float = global_config.COLLINEARITY_TOL

    def __post_init__(self):
        if not 0.0 < self.min_r2_increase < 1.0:
            raise ConfigError(f"min_r2_increase must lie in (0, 1), got {self.min_r2_increase}")
        if self.max_predictors < 1:
            raise ConfigError(f"max_predictors must be >= 1, got {self.max_predictors}")
        if self.collinearity_tol <= 0:
            raise ConfigError(f"collinearity_tol must be positive, got {self.collinearity_tol}")


@dataclass(frozen=True)
class EngineConfig:
    m: int = global_config.DEFAULT_M
    burn_in_cycles: int = global_config.DEFAULT_BURN_IN_CYCLES
    between_cycles: int = global_config.DEFAULT_BETWEEN_CYCLES
    chain_mode: ChainMode = ChainMode(global_config.DEFAULT_CHAIN_MODE)
    seed: int = global_config.DEFAULT_SEED
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    threads: int = global_config.DEFAULT_THREADS

    def __post_init__(self):
        if not isinstance(self.chain_mode, ChainMode):
            raise TypeError(f"EngineConfig.chain_mode must be a ChainMode, got {type(self.chain_mode)}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.burn_in_cycles < 1:
            raise ConfigError(f"burn_in_cycles must be >= 1, got {self.burn_in_cycles}")
        if self.between_cycles < 1:
            raise ConfigError(f"between_cycles must be >= 1, got {self.between_cycles}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def as_dict(self) -> Dict[str, Any]:
        echo = asdict(self)
        echo["chain_mode"] = self.chain_mode.value
        return echo
