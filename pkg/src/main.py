# src/main.py
import argparse
import logging
import os
import sys
from typing import List, Optional

import src.config as config
from src.cli import engine_overrides, parse_arguments, simulation_options
from src.domain.enums import DfMethod
from src.domain.errors import DataValidationError, NumericalError
from src.pipeline_runner import run_diagnostics, run_hotdeck, run_imputation, run_pooling, run_profile, run_simulation
from src.reporting.console_reporter import print_missingness_profile, print_pooled_estimates, print_run_summary

logger = logging.getLogger(__name__)

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def setup_logging():
    """Root logging setup; the level comes from the CHAINIMP_LOG environment variable."""
    requested = os.environ.get(config.LOG_ENV_VAR, config.DEFAULT_LOG_LEVEL).strip().upper()
    level = requested if requested in VALID_LOG_LEVELS else config.DEFAULT_LOG_LEVEL
    logging.basicConfig(level=getattr(logging, level), format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    if level != requested:
        logger.warning(f"Invalid {config.LOG_ENV_VAR} '{requested}'. Using {config.DEFAULT_LOG_LEVEL}.")


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "profile":
        prepared, profile = run_profile(args.data, args.config, args.out)
        print_missingness_profile(profile, prepared.inconsistencies)
    elif args.command == "impute":
        completed = run_imputation(args.data, args.config, engine_overrides(args), args.out_dir)
        print_run_summary(completed, args.out_dir)
    elif args.command == "hotdeck":
        completed = run_hotdeck(args.data, args.config, args.seed, args.out_dir)
        print_run_summary(completed, args.out_dir)
    elif args.command == "pool":
        pooled = run_pooling(args.estimates, DfMethod(args.df_method), args.out)
        print_pooled_estimates(pooled)
    elif args.command == "diagnose":
        reports = run_diagnostics(args.data, args.config, args.mi_dir, args.hd_dir, args.out_dir)
        print(f"\nDiagnostics written to {args.out_dir}: {', '.join(sorted(reports))}")
    elif args.command == "simulate":
        data_path, config_path = run_simulation(args.kind, args.rows, args.seed, args.out_dir, **simulation_options(args))
        print(f"\nSimulated survey: {data_path} with config {config_path}")
    return EXIT_OK


def main_application(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point. Exit codes: 0 success, 1 validation error
    (bad data, config or flags), 2 numerical failure.
    """
    setup_logging()
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        # argparse already printed the usage text
        return EXIT_OK if e.code == 0 else EXIT_VALIDATION

    logger.info(f"chainimp {config.APP_VERSION}: {args.command}")
    try:
        status = dispatch(args)
    except (DataValidationError, argparse.ArgumentTypeError) as e:
        logger.error(f"{e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.critical(f"Numerical failure: {e}", exc_info=True)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as e:
        logger.error(f"{e}")
        return EXIT_VALIDATION
    logger.info("Processing finished.")
    return status


if __name__ == "__main__":
    sys.exit(main_application())
