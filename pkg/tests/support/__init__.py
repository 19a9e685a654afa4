"""
Test Support Module

This module consolidates the test infrastructure:
- CSV and config document creators
- Dataset builders (from column lists or the synthetic survey generator)
"""

from tests.support.csv_creators import (
    create_csv_string,
    create_columns_csv_string,
    variable,
    config_document,
    write_inputs,
)

from tests.support.builders import (
    build_config,
    build_dataset,
    load_survey,
    simulated_dataset,
    linear_columns,
    column_values,
)

__all__ = [
    "create_csv_string",
    "create_columns_csv_string",
    "variable",
    "config_document",
    "write_inputs",
    "build_config",
    "build_dataset",
    "load_survey",
    "simulated_dataset",
    "linear_columns",
    "column_values",
]
