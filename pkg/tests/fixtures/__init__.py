"""
Test Fixtures Module

YAML-based scenario tables (restriction_scenarios.yaml, pooling_scenarios.yaml)
for input/output cases with clear parameter variations. Use load_yaml_spec()
to read a file and the parse_* functions to turn it into dataclasses for
pytest.mark.parametrize.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional
from dataclasses import dataclass, field
import math
import yaml


FIXTURES_DIR = Path(__file__).parent

STATE_CODES = {"O": 0, "M": 1, "N": 2, "I": 3}


@dataclass
class RestrictionScenario:
    """Variables, raw column tokens and the cell states expected after restriction sync."""
    id: str
    description: str
    variables: List[Dict[str, Any]]
    columns: Dict[str, List[str]]
    expected_states: Dict[str, List[int]]


@dataclass
class PoolingScenario:
    id: str
    description: str
    estimates: List[float]
    variances: List[float]
    expected: Dict[str, float] = field(default_factory=dict)
    complete_df: Optional[float] = None


def _float(value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf"):
        return math.inf
    return float(value)


def load_yaml_spec(filename: str) -> Dict[str, Any]:
    """
    Load a YAML scenario file.

    Args:
        filename: Name of the YAML file in the fixtures directory

    Returns:
        Parsed YAML content as a dictionary
    """
    filepath = FIXTURES_DIR / filename
    with open(filepath, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def parse_restriction_scenarios(spec_data: Dict[str, Any]) -> List[RestrictionScenario]:
    scenarios = []
    for item in spec_data.get("scenarios", []):
        scenarios.append(RestrictionScenario(
            id=item["id"],
            description=item.get("description", ""),
            variables=item["variables"],
            columns={name: ["" if t is None else str(t) for t in tokens] for name, tokens in item["columns"].items()},
            expected_states={name: [STATE_CODES[s] for s in states] for name, states in item["expected_states"].items()},
        ))
    return scenarios


def parse_pooling_scenarios(spec_data: Dict[str, Any]) -> List[PoolingScenario]:
    scenarios = []
    for item in spec_data.get("scenarios", []):
        scenarios.append(PoolingScenario(
            id=item["id"],
            description=item.get("description", ""),
            estimates=[float(v) for v in item["estimates"]],
            variances=[float(v) for v in item["variances"]],
            expected={k: _float(v) for k, v in item.get("expected", {}).items()},
            complete_df=item.get("complete_df"),
        ))
    return scenarios


def get_restriction_scenarios() -> List[RestrictionScenario]:
    return parse_restriction_scenarios(load_yaml_spec("restriction_scenarios.yaml"))


def get_pooling_scenarios() -> List[PoolingScenario]:
    return parse_pooling_scenarios(load_yaml_spec("pooling_scenarios.yaml"))
