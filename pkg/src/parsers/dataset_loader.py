# src/parsers/dataset_loader.py
import io
import logging
from pathlib import Path
from typing import IO, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src import config as global_config
from src.domain.dataset import Dataset
from src.domain.enums import CellState, VariableKind
from src.domain.errors import DataValidationError
from src.domain.variables import VariableSpec

from .config_parser import ImputationConfig

logger = logging.getLogger(__name__)

CsvSource = Union[str, Path, IO[str]]


def read_csv_table(source: CsvSource, encoding: str = "utf-8-sig") -> Tuple[List[str], pd.DataFrame]:
    """
    Reads a CSV as raw string tokens (no NA inference). Returns the header and
    the body; the header is taken verbatim so duplicate names can be reported
    instead of silently renamed.
    """
    try:
        raw = pd.read_csv(
            source, header=None, dtype=str, keep_default_na=False, na_filter=False,
            encoding=encoding, skipinitialspace=True,
        )
    except FileNotFoundError:
        raise DataValidationError(f"Data file not found: {source}")
    except pd.errors.EmptyDataError:
        raise DataValidationError(f"Data file is empty: {source}")
    except pd.errors.ParserError as e:
        raise DataValidationError(f"Data file is not a rectangular CSV: {e}")

    header = [str(h).strip() for h in raw.iloc[0].tolist()]
    duplicates = sorted({h for h in header if header.count(h) > 1})
    if duplicates:
        raise DataValidationError(f"Duplicate column(s) in CSV header: {duplicates}")
    body = raw.iloc[1:].reset_index(drop=True)
    body.columns = header
    return header, body.apply(lambda col: col.str.strip())


def _require(header: List[str], name: str, role: str) -> None:
    if name not in header:
        raise DataValidationError(f"Unknown column '{name}': {role} is absent from the CSV header.")


def _to_float(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        return np.nan


def _parse_numbers(tokens: pd.Series, column: str) -> np.ndarray:
    # float() is correctly rounded; pd.to_numeric can be off by one ulp on 17-digit input
    numbers = tokens.map(_to_float).to_numpy(dtype=float)
    bad = np.isnan(numbers) | np.isinf(numbers)
    if bad.any():
        first = tokens.iloc[int(np.nonzero(bad)[0][0])]
        raise DataValidationError(f"Non-numeric value '{first}' in column '{column}'.")
    return numbers


def parse_variable_column(spec: VariableSpec, tokens: pd.Series) -> Tuple[np.ndarray, np.ndarray]:
    n = len(tokens)
    values = np.full(n, np.nan)
    states = np.full(n, CellState.OBSERVED, dtype=np.int8)

    missing = tokens.isin(global_config.MISSING_TOKENS).to_numpy() | tokens.isin(spec.missing_sentinels).to_numpy()
    not_applicable = (tokens == global_config.NOT_APPLICABLE_TOKEN).to_numpy()
    states[missing] = CellState.MISSING
    states[not_applicable] = CellState.NOT_APPLICABLE
    valued = ~missing & ~not_applicable

    if spec.kind == VariableKind.CATEGORICAL:
        mapping = {label: float(i) for i, label in enumerate(spec.levels)}
        mapped = tokens[valued].map(mapping)
        if mapped.isna().any():
            first = tokens[valued][mapped.isna()].iloc[0]
            raise DataValidationError(
                f"Unknown level '{first}' for categorical variable '{spec.name}' (levels: {list(spec.levels)})."
            )
        values[valued] = mapped.to_numpy(dtype=float)
        return values, states

    numbers = _parse_numbers(tokens[valued], spec.name)
    numeric_sentinels = pd.to_numeric(pd.Series(list(spec.missing_sentinels), dtype=object), errors="coerce").dropna()
    if len(numeric_sentinels):
        # "999999.0" in the file still matches a 999999 sentinel
        hit = np.isin(numbers, numeric_sentinels.to_numpy(dtype=float))
        valued_idx = np.nonzero(valued)[0]
        states[valued_idx[hit]] = CellState.MISSING
        valued[valued_idx[hit]] = False
        numbers = numbers[~hit]

    if spec.kind == VariableKind.COUNT and np.any((numbers < 0) | (numbers != np.round(numbers))):
        first = numbers[(numbers < 0) | (numbers != np.round(numbers))][0]
        raise DataValidationError(f"Non-integer value {first:g} in count column '{spec.name}'.")
    values[valued] = numbers
    return values, states


def _parse_bound(tokens: pd.Series, column: str, fill: float) -> np.ndarray:
    absent = tokens.isin(global_config.MISSING_TOKENS).to_numpy() | (tokens == global_config.NOT_APPLICABLE_TOKEN).to_numpy()
    out = np.full(len(tokens), fill)
    out[~absent] = _parse_numbers(tokens[~absent], column)
    return out


def dataset_from_frame(header: List[str], body: pd.DataFrame, config: ImputationConfig) -> Dataset:
    n_rows, n_vars = len(body), len(config.variables)
    values = np.full((n_rows, n_vars), np.nan)
    states = np.empty((n_rows, n_vars), dtype=np.int8)
    lower = np.full((n_rows, n_vars), -np.inf)
    upper = np.full((n_rows, n_vars), np.inf)

    consumed = set()
    for j, spec in enumerate(config.variables):
        _require(header, spec.name, "config variable")
        values[:, j], states[:, j] = parse_variable_column(spec, body[spec.name])
        consumed.add(spec.name)
        if spec.bounds_source is not None:
            low_col, high_col = spec.bounds_source
            _require(header, low_col, f"lower bounds column of '{spec.name}'")
            _require(header, high_col, f"upper bounds column of '{spec.name}'")
            lower[:, j] = _parse_bound(body[low_col], low_col, -np.inf)
            upper[:, j] = _parse_bound(body[high_col], high_col, np.inf)
            consumed.update(spec.bounds_source)

    row_ids = None
    if config.id_column is not None:
        _require(header, config.id_column, "id column")
        row_ids = body[config.id_column].to_numpy(dtype=object)
        consumed.add(config.id_column)

    weights = None
    if config.weight_column is not None:
        _require(header, config.weight_column, "weight column")
        weights = _parse_numbers(body[config.weight_column], config.weight_column)
        consumed.add(config.weight_column)

    passthrough: Dict[str, np.ndarray] = {}
    for flag in config.flag_columns:
        _require(header, flag, "flag column")
        passthrough[flag] = body[flag].to_numpy(dtype=object)
        consumed.add(flag)

    ignored = [h for h in header if h not in consumed]
    if ignored:
        logger.debug(f"CSV columns not declared in the config are ignored: {ignored}")

    return Dataset(
        list(config.variables), values, states, lower, upper,
        row_ids=row_ids, id_column=config.id_column,
        weights=weights, weight_column=config.weight_column,
        passthrough=passthrough,
    )


def load_dataset(source: CsvSource, config: ImputationConfig) -> Dataset:
    header, body = read_csv_table(source)
    ds = dataset_from_frame(header, body, config)
    logger.info(f"Loaded {ds.n_rows} rows x {ds.n_vars} variables from {source if isinstance(source, (str, Path)) else 'stream'}.")
    return ds


def load_dataset_from_text(text: str, config: ImputationConfig) -> Dataset:
    return load_dataset(io.StringIO(text), config)


def _format_number(value: float) -> str:
    return format(float(value), global_config.FLOAT_FORMAT)


def _cell_tokens(spec: VariableSpec, values: np.ndarray, states: np.ndarray) -> List[str]:
    tokens: List[str] = []
    for value, state in zip(values, states):
        if state == CellState.MISSING:
            tokens.append("")
        elif state == CellState.NOT_APPLICABLE:
            tokens.append(global_config.NOT_APPLICABLE_TOKEN)
        elif spec.kind == VariableKind.CATEGORICAL:
            tokens.append(spec.levels[int(value)])
        elif spec.kind == VariableKind.COUNT:
            tokens.append(str(int(value)))
        else:
            tokens.append(_format_number(value))
    return tokens


def _bound_tokens(bounds: np.ndarray) -> List[str]:
    return ["" if np.isinf(b) else _format_number(b) for b in bounds]


def dataset_to_frame(ds: Dataset) -> pd.DataFrame:
    columns: Dict[str, List[str]] = {}
    if ds.row_ids is not None:
        columns[ds.id_column or "row_id"] = [str(r) for r in ds.row_ids]
    for j, spec in enumerate(ds.variables):
        columns[spec.name] = _cell_tokens(spec, ds.values[:, j], ds.states[:, j])
        if spec.bounds_source is not None:
            low_col, high_col = spec.bounds_source
            columns[low_col] = _bound_tokens(ds.lower[:, j])
            columns[high_col] = _bound_tokens(ds.upper[:, j])
    if ds.weights is not None:
        columns[ds.weight_column or "weight"] = [_format_number(w) for w in ds.weights]
    for flag, column in ds.passthrough.items():
        columns[flag] = [str(v) for v in column]
    return pd.DataFrame(columns)


def serialize_dataset(ds: Dataset, destination: Optional[Union[str, Path]] = None) -> str:
    """
    Writes the table back in the load format: empty token for Missing, '.'
    for NotApplicable, labels for categorical cells, 17 significant digits
    for reals, bounds columns next to their variable.
    """
    text = dataset_to_frame(ds).to_csv(index=False)
    if destination is not None:
        Path(destination).write_text(text, encoding="utf-8")
        logger.debug(f"Wrote {ds.n_rows} rows to {destination}")
    return text
