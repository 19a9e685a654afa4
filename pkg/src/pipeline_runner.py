# src/pipeline_runner.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import src.config as config
from src.domain.chain import CompletedSet, CompletedTable
from src.domain.dataset import Dataset
from src.domain.enums import CellState, DfMethod, TransformKind, VariableKind, WarningStage
from src.domain.errors import DataValidationError
from src.domain.results import PooledEstimate, WarningLog
from src.engine import hotdeck, imputation_engine
from src.inference.analysis import analysis_frame, fit_analysis_ols, observed_only
from src.inference.pooling import pool_regression, pool_scalar
from src.parsers.config_parser import DiagnosticsSettings, ImputationConfig, parse_config_document
from src.parsers.dataset_loader import load_dataset
from src.processing.recoding import recode_missing
from src.processing.restrictions import check_observed_consistency, missingness_pattern, missingness_profile, sync_restrictions
from src.processing.transforms import outlier_screen, skewness_report, to_model_scale
from src.reporting import diagnostics, report_writer
from src.simulation.synthetic_survey import generate

logger = logging.getLogger(__name__)


class PreparedInput:
    """
    A loaded, recoded and restriction-synchronized dataset together with the
    config it was read with and the warnings raised while loading.
    """
    def __init__(self, imputation_config: ImputationConfig, dataset: Dataset, warnings: WarningLog,
                 inconsistencies: Dict[str, int], data_path: str, config_path: str):
        self.config = imputation_config
        self.dataset = dataset
        self.warnings = warnings
        self.inconsistencies = inconsistencies
        self.data_path = data_path
        self.config_path = config_path

    def inputs_echo(self) -> Dict[str, Any]:
        return {"data": self.data_path, "config": self.config_path,
                "rows": self.dataset.n_rows, "variables": self.dataset.names}


def prepare_input(data_path: str, config_path: str) -> PreparedInput:
    """Config -> CSV load -> recodes -> restriction sync -> consistency check."""
    logger.info(f"Reading config {config_path} and data {data_path}...")
    imputation_config = parse_config_document(config_path)
    ds = load_dataset(data_path, imputation_config)
    ds = recode_missing(ds, imputation_config.recode_rules)
    ds = sync_restrictions(ds)

    warnings = WarningLog()
    inconsistencies = check_observed_consistency(ds)
    for name, count in inconsistencies.items():
        warnings.add(WarningStage.LOAD, f"{count} observed values on rows where the restriction is false; kept as observed.",
                     variable=name)
    return PreparedInput(imputation_config, ds, warnings, inconsistencies, str(data_path), str(config_path))


def run_profile(data_path: str, config_path: str, out_path: Optional[str] = None) -> Tuple[PreparedInput, pd.DataFrame]:
    prepared = prepare_input(data_path, config_path)
    profile = missingness_profile(prepared.dataset)
    if out_path is not None:
        out = Path(out_path)
        report_writer.ensure_dir(out.parent)
        report_writer.write_profile(profile, out)
        stem = out.with_suffix("")
        report_writer.write_frame(missingness_pattern(prepared.dataset), f"{stem}_patterns.csv")
        report_writer.write_frame(skewness_report(prepared.dataset), f"{stem}_skewness.csv")
        report_writer.write_frame(outlier_screen(prepared.dataset), f"{stem}_outliers.csv")
    return prepared, profile


def run_imputation(data_path: str, config_path: str, overrides: Dict[str, Any], out_dir: str) -> CompletedSet:
    prepared = prepare_input(data_path, config_path)
    engine_config = prepared.config.engine_config(overrides)
    completed = imputation_engine.run(prepared.dataset, engine_config)

    report_writer.write_completed_tables(completed, out_dir)
    report_writer.write_trace(diagnostics.cycle_trace(completed), out_dir)
    warnings = WarningLog()
    warnings.extend(prepared.warnings)
    warnings.extend(completed.warnings)
    manifest = report_writer.build_manifest(
        command="impute", settings=engine_config.as_dict(), warnings=warnings, completed=completed,
        inputs=prepared.inputs_echo(),
        outputs=[config.COMPLETED_FILE_TEMPLATE.format(index=k + 1) for k in range(completed.m)]
                + [config.PROVENANCE_FILE, config.TRACE_FILE],
    )
    report_writer.write_manifest(manifest, out_dir)
    return completed


def run_hotdeck(data_path: str, config_path: str, seed: Optional[int], out_dir: str) -> CompletedSet:
    prepared = prepare_input(data_path, config_path)
    seed = seed if seed is not None else prepared.config.engine_config().seed
    completed = hotdeck.hotdeck_impute(prepared.dataset, seed)

    report_writer.write_completed_tables(completed, out_dir)
    warnings = WarningLog()
    warnings.extend(prepared.warnings)
    warnings.extend(completed.warnings)
    manifest = report_writer.build_manifest(
        command="hotdeck", settings={"seed": seed}, warnings=warnings, completed=completed,
        inputs=prepared.inputs_echo(),
        outputs=[config.COMPLETED_FILE_TEMPLATE.format(index=1), config.PROVENANCE_FILE],
    )
    report_writer.write_manifest(manifest, out_dir)
    return completed


def run_pooling(estimates_path: str, df_method: DfMethod = DfMethod.LARGE_SAMPLE,
                out_path: Optional[str] = None) -> List[PooledEstimate]:
    """
    Pools a long table of complete-data results with columns imputation,
    estimand, estimate, variance (and complete_df for barnard-rubin).
    """
    try:
        table = pd.read_csv(estimates_path)
    except FileNotFoundError:
        raise DataValidationError(f"Estimates file not found: {estimates_path}")
    required = ["imputation", "estimand", "estimate", "variance"]
    absent = [c for c in required if c not in table.columns]
    if absent:
        raise DataValidationError(f"Estimates file lacks column(s) {absent}; expected {required}.")
    if df_method == DfMethod.BARNARD_RUBIN and "complete_df" not in table.columns:
        raise DataValidationError("df method barnard-rubin needs a complete_df column.")

    pooled = []
    for estimand, group in table.groupby("estimand", sort=False):
        complete_df = float(group["complete_df"].iloc[0]) if df_method == DfMethod.BARNARD_RUBIN else None
        pooled.append(pool_scalar(
            group["estimate"].to_numpy(dtype=float), group["variance"].to_numpy(dtype=float),
            estimand=str(estimand), compute_fmi=len(group) > 1, df_method=df_method, complete_df=complete_df,
        ))
    if out_path is not None:
        report_writer.write_frame(pd.DataFrame([p.as_row() for p in pooled]), out_path)
    return pooled


def load_completed_set(source: Dataset, imputation_config: ImputationConfig, directory: str) -> CompletedSet:
    """
    Reads completed_XX.csv tables written by an impute/hotdeck run. A cell
    counts as imputed when it holds a value that was not observed in `source`.
    """
    paths = sorted(Path(directory).glob("completed_*.csv"))
    if not paths:
        raise DataValidationError(f"No completed tables found in {directory}")
    tables = []
    for k, path in enumerate(paths):
        ds = load_dataset(path, imputation_config)
        if ds.n_rows != source.n_rows:
            raise DataValidationError(f"{path.name} has {ds.n_rows} rows, the source has {source.n_rows}.")
        states = ds.states.copy()
        states[(source.states != CellState.OBSERVED) & (states == CellState.OBSERVED)] = CellState.IMPUTED
        still_missing = int(np.sum(states == CellState.MISSING))
        if still_missing:
            logger.warning(f"{path.name} still holds {still_missing} missing cells.")
        tables.append(CompletedTable(ds.values.copy(), states, k, 0))
    return CompletedSet(source, tables)


def _analysis_table(ds: Dataset, settings: DiagnosticsSettings, names: Sequence[str],
                    model_scale: bool) -> pd.DataFrame:
    """Analysis columns plus the configured aggregate; on the model scale the aggregate is cube-rooted."""
    aggregate = settings.aggregate_name if settings.aggregate_components else None
    frame = analysis_frame(ds, [n for n in names if n != aggregate], model_scale=model_scale)
    if aggregate is not None and aggregate in names:
        total = diagnostics.aggregate_components(ds, settings.aggregate_components, settings.negative_components)
        frame[aggregate] = to_model_scale(TransformKind.SIGNED_CUBE_ROOT, total) if model_scale else total
    return frame[list(names)]


def _summary_values(ds: Dataset, settings: DiagnosticsSettings, name: str) -> np.ndarray:
    return _analysis_table(ds, settings, [name], model_scale=False)[name].to_numpy(dtype=float)


def run_diagnostics(data_path: str, config_path: str, mi_dir: str, hd_dir: str, out_dir: str) -> Dict[str, pd.DataFrame]:
    """Full comparison of a multiply imputed set against a hot-deck set over the same input."""
    prepared = prepare_input(data_path, config_path)
    source = prepared.dataset
    settings = prepared.config.diagnostics
    mi_set = load_completed_set(source, prepared.config, mi_dir)
    hd_set = load_completed_set(source, prepared.config, hd_dir)
    mi_tables, hd_table = mi_set.datasets(), hd_set.dataset(0)
    warnings = WarningLog()
    warnings.extend(prepared.warnings)
    out = report_writer.ensure_dir(out_dir)
    reports: Dict[str, pd.DataFrame] = {}

    summary_variable = settings.summary_variable or next(
        (s.name for s in source.variables if s.is_imputed and s.kind != VariableKind.CATEGORICAL), None)
    if summary_variable is not None:
        observed = _summary_values(observed_only(source), settings, summary_variable)
        parts = []
        for method, tables in (("mi", mi_tables), ("hd", [hd_table])):
            part = diagnostics.summary_compare(observed, [_summary_values(d, settings, summary_variable) for d in tables])
            part.insert(0, "method", method)
            parts.append(part)
        reports["summary"] = pd.concat(parts, ignore_index=True)

        mi_rows = np.mean([_summary_values(d, settings, summary_variable) for d in mi_tables], axis=0)
        hd_rows = _summary_values(hd_table, settings, summary_variable)
        keep = ~np.isnan(mi_rows) & ~np.isnan(hd_rows)
        reports["bland_altman"] = diagnostics.bland_altman(mi_rows[keep], hd_rows[keep]).as_frame()

    if mi_set.m >= 2:
        reports["fmi"] = diagnostics.fmi_table(mi_set)
    else:
        warnings.add(WarningStage.DIAGNOSE, "FMI needs at least two completed tables; fmi.csv skipped.")
    reports["indicator_props"] = diagnostics.indicator_props(source, mi_set, settings.indicator_alert_threshold)

    correlation_variables = settings.correlation_variables or [
        s.name for s in source.variables if s.is_predictor and s.kind != VariableKind.CATEGORICAL]
    if len(correlation_variables) >= 2:
        corr_mi, corr_hd, scatter = diagnostics.correlation_compare(mi_set, hd_set, correlation_variables)
        report_writer.write_frame(corr_mi, out / "corr_method_a.csv", index=True)
        report_writer.write_frame(corr_hd, out / "corr_method_b.csv", index=True)
        reports["corr_scatter"] = scatter

    if settings.regression_response is not None:
        response, predictors = settings.regression_response, list(settings.regression_predictors)
        names = [response, *predictors]
        obs_fit = fit_analysis_ols(_analysis_table(observed_only(source), settings, names, True), response, predictors)
        mi_fits = [fit_analysis_ols(_analysis_table(d, settings, names, True), response, predictors) for d in mi_tables]
        hd_fit = fit_analysis_ols(_analysis_table(hd_table, settings, names, True), response, predictors)
        reports["regression_compare"] = diagnostics.regression_compare(obs_fit, pool_regression(mi_fits), hd_fit)

    for name, frame in reports.items():
        report_writer.write_frame(frame, out / f"{name}.csv")
    manifest = report_writer.build_manifest(
        command="diagnose", settings={"mi_dir": str(mi_dir), "hd_dir": str(hd_dir), "m": mi_set.m},
        warnings=warnings, inputs=prepared.inputs_echo(),
        outputs=[f"{name}.csv" for name in reports] + (["corr_method_a.csv", "corr_method_b.csv"]
                                                       if len(correlation_variables) >= 2 else []),
        notes=[config.CORRELATION_AVERAGING_NOTE],
    )
    report_writer.write_manifest(manifest, out)
    logger.info(f"Diagnostics written to {out}")
    return reports


def run_simulation(kind: str, n_rows: int, seed: int, out_dir: str, **options: Any) -> Tuple[Path, Path]:
    survey = generate(kind, n_rows, seed, **options)
    out = report_writer.ensure_dir(out_dir)
    data_path = out / "data.csv"
    config_path = out / "config.json"
    data_path.write_text(survey.csv_text, encoding="utf-8")
    config_path.write_text(json.dumps(survey.config, indent=2) + "\n", encoding="utf-8")
    survey.truth.to_csv(out / "truth.csv", index=False, float_format="%" + config.FLOAT_FORMAT)
    logger.info(f"Simulated survey written to {out}")
    return data_path, config_path
