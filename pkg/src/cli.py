# src/cli.py
import argparse
from typing import Any, Dict, List, Optional

import src.config as config
from src.domain.enums import ChainMode, DfMethod
from src.simulation.synthetic_survey import MECHANISMS, SIMULATION_KINDS


def _add_input_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="Path to the survey CSV file.")
    parser.add_argument("--config", required=True, help="Path to the variable config JSON file.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainimp",
        description="Chained-equation multiple imputation for survey tables. Set CHAINIMP_LOG for verbosity.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    profile = sub.add_parser("profile", help="Print the apparent and true missingness per variable.")
    _add_input_arguments(profile)
    profile.add_argument("--out", default=None, help="Also write the profile (and pattern/skewness/outlier tables) to this CSV.")

    impute = sub.add_parser("impute", help="Run the chained-equation engine and write M completed tables.")
    _add_input_arguments(impute)
    impute.add_argument("--m", type=int, default=None, help=f"Number of completed tables (default {config.DEFAULT_M}).")
    impute.add_argument("--burn-in", dest="burn_in_cycles", type=int, default=None,
                        help=f"Cycles before the first table is taken (default {config.DEFAULT_BURN_IN_CYCLES}).")
    impute.add_argument("--between", dest="between_cycles", type=int, default=None,
                        help=f"Cycles between tables in single-chain-thinned mode (default {config.DEFAULT_BETWEEN_CYCLES}).")
    impute.add_argument("--chain-mode", dest="chain_mode", choices=[c.value for c in ChainMode], default=None,
                        help=f"Chain layout (default {config.DEFAULT_CHAIN_MODE}).")
    impute.add_argument("--seed", type=int, default=None, help=f"Master seed (default {config.DEFAULT_SEED}).")
    impute.add_argument("--threads", type=int, default=None, help="Maximum chains run in parallel; output does not depend on it.")
    impute.add_argument("--min-r2", dest="min_r2_increase", type=float, default=None,
                        help=f"Minimum R^2 gain to admit a predictor (default {config.MIN_R2_INCREASE}).")
    impute.add_argument("--max-predictors", dest="max_predictors", type=int, default=None,
                        help=f"Predictor cap per model (default {config.MAX_PREDICTORS}).")
    impute.add_argument("--out-dir", default=config.DEFAULT_OUTPUT_DIR, help="Directory for the completed tables and manifest.")

    hot = sub.add_parser("hotdeck", help="Run the univariate random hot deck (one completed table).")
    _add_input_arguments(hot)
    hot.add_argument("--seed", type=int, default=None, help="Seed (defaults to the config/engine seed).")
    hot.add_argument("--out-dir", default=config.DEFAULT_OUTPUT_DIR, help="Directory for the completed table and manifest.")

    pool = sub.add_parser("pool", help="Apply the combining rules to per-table estimates.")
    pool.add_argument("--estimates", required=True, help="CSV with columns imputation,estimand,estimate,variance[,complete_df].")
    pool.add_argument("--df-method", dest="df_method", choices=[d.value for d in DfMethod], default=DfMethod.LARGE_SAMPLE.value,
                      help="Reference degrees of freedom.")
    pool.add_argument("--out", default=None, help="Write the pooled table to this CSV.")

    diagnose = sub.add_parser("diagnose", help="Compare a multiply imputed set against a hot-deck set.")
    _add_input_arguments(diagnose)
    diagnose.add_argument("--mi-dir", required=True, help="Output directory of an impute run.")
    diagnose.add_argument("--hd-dir", required=True, help="Output directory of a hotdeck run.")
    diagnose.add_argument("--out-dir", default="diagnostics", help="Report directory.")

    simulate = sub.add_parser("simulate", help="Write a synthetic survey (data.csv, config.json, truth.csv).")
    simulate.add_argument("--kind", choices=SIMULATION_KINDS, required=True)
    simulate.add_argument("--rows", type=int, default=2000)
    simulate.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    simulate.add_argument("--out-dir", default="simulated")
    simulate.add_argument("--missing-rate", dest="missing_rate", type=float, default=None)
    simulate.add_argument("--rho", type=float, default=None, help="Correlation of the bivariate kind.")
    simulate.add_argument("--mechanism", choices=MECHANISMS, default=None)
    simulate.add_argument("--extra-vars", dest="n_extra", type=int, default=None, help="Extra covariates of the wealth kind.")
    simulate.add_argument("--revealed-share", dest="revealed_share", type=float, default=None,
                          help="Share of skip_pattern holders with a missing filter answer who still report the amount.")
    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parses command line arguments for the application."""
    return build_parser().parse_args(argv)


def engine_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """CLI flags that override the config engine section; unset flags are None and do not override."""
    keys = ("m", "burn_in_cycles", "between_cycles", "chain_mode", "seed", "threads", "min_r2_increase", "max_predictors")
    return {k: getattr(args, k) for k in keys}


def simulation_options(args: argparse.Namespace) -> Dict[str, Any]:
    allowed = {
        "bivariate": ("rho", "missing_rate", "mechanism"),
        "skip_pattern": ("missing_rate", "mechanism", "revealed_share"),
        "wealth": ("missing_rate", "mechanism", "n_extra"),
    }[args.kind]
    keys = ("rho", "missing_rate", "mechanism", "n_extra", "revealed_share")
    given = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    unsupported = sorted(set(given) - set(allowed))
    if unsupported:
        raise argparse.ArgumentTypeError(f"Option(s) {unsupported} do not apply to --kind {args.kind}.")
    return given
