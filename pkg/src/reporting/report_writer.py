# src/reporting/report_writer.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src import config as global_config
from src.domain.chain import CompletedSet
from src.domain.enums import CellState
from src.domain.results import WarningLog
from src.domain.variables import VariableSpec
from src.parsers.dataset_loader import serialize_dataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_frame(frame: pd.DataFrame, destination: PathLike, decimals: Optional[int] = None, index: bool = False) -> Path:
    """CSV with NaN written blank; `decimals` rounds the float columns."""
    if decimals is not None:
        frame = frame.round(decimals)
    path = Path(destination)
    frame.to_csv(path, index=index, na_rep="",
                 float_format=None if decimals is not None else "%" + global_config.FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_profile(profile: pd.DataFrame, destination: PathLike) -> Path:
    return write_frame(profile, destination, decimals=global_config.REPORT_DECIMALS)


def provenance_frame(completed: CompletedSet) -> pd.DataFrame:
    """
    One row per (table, cell not observed in the source): row number (1-based),
    variable, chain and whether the cell holds an imputed value (0 when it
    ended up not-applicable).
    """
    source = completed.source
    rows, cols = np.nonzero(source.states != CellState.OBSERVED)
    names = np.array(source.names, dtype=object)
    parts: List[pd.DataFrame] = []
    for k, table in enumerate(completed.tables):
        parts.append(pd.DataFrame({
            "table": k + 1,
            "row": rows + 1,
            "variable": names[cols],
            "chain": table.chain_index,
            "imputed": (table.states[rows, cols] == CellState.IMPUTED).astype(int),
        }))
    if not parts:
        return pd.DataFrame(columns=["table", "row", "variable", "chain", "imputed"])
    return pd.concat(parts, ignore_index=True)


def write_completed_tables(completed: CompletedSet, out_dir: PathLike) -> List[Path]:
    out = ensure_dir(out_dir)
    paths = []
    for k in range(completed.m):
        path = out / global_config.COMPLETED_FILE_TEMPLATE.format(index=k + 1)
        serialize_dataset(completed.dataset(k), path)
        paths.append(path)
    write_frame(provenance_frame(completed), out / global_config.PROVENANCE_FILE)
    logger.info(f"Wrote {completed.m} completed tables and provenance to {out}")
    return paths


def write_trace(trace: pd.DataFrame, out_dir: PathLike) -> Path:
    return write_frame(trace, Path(out_dir) / global_config.TRACE_FILE)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return None if np.isnan(value) else float(value)
    if isinstance(value, (Path, set, frozenset)):
        return str(value) if isinstance(value, Path) else sorted(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def variable_settings(variables: Sequence[VariableSpec]) -> List[Dict[str, Any]]:
    """Resolved per-variable configuration as the run used it."""
    return [
        {
            "name": spec.name,
            "kind": spec.kind.value,
            "levels": list(spec.levels),
            "transform": spec.transform.value,
            "restriction": spec.restriction.source if spec.restriction is not None else None,
            "bounds_source": list(spec.bounds_source) if spec.bounds_source is not None else None,
            "min_value": spec.min_value,
            "max_value": spec.max_value,
            "eligibility": spec.eligibility.value,
            "missing_sentinels": list(spec.missing_sentinels),
        }
        for spec in variables
    ]


def build_manifest(*, command: str, settings: Dict[str, Any], warnings: WarningLog,
                   completed: Optional[CompletedSet] = None, inputs: Optional[Dict[str, Any]] = None,
                   outputs: Sequence[str] = (), notes: Sequence[str] = ()) -> Dict[str, Any]:
    manifest: Dict[str, Any] = {
        "tool": "chainimp",
        "version": global_config.APP_VERSION,
        "command": command,
        "inputs": inputs or {},
        "settings": settings,
        "outputs": list(outputs),
        "warnings": warnings.as_dicts(),
        "clipped_draws": dict(warnings.clipped_draws),
        "notes": list(notes),
    }
    if completed is not None:
        manifest["variables"] = variable_settings(completed.source.variables)
        manifest["imputation_order"] = list(completed.order)
        manifest["selected_predictors"] = {
            f"table_{k + 1:02d}": table.selected_predictors for k, table in enumerate(completed.tables)
        }
    return manifest


def write_manifest(manifest: Dict[str, Any], out_dir: PathLike) -> Path:
    path = ensure_dir(out_dir) / global_config.MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2, default=_json_default, sort_keys=False) + "\n", encoding="utf-8")
    logger.info(f"Run manifest written to {path}")
    return path
