# src/simulation/synthetic_survey.py
"""
Synthetic survey generator. Each kind returns the CSV text, the matching
config document (a JSON-ready dict) and the complete table the missing cells
were masked from, so simulation checks can compare against the truth.
"""
import logging
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, special

from src import config as global_config

logger = logging.getLogger(__name__)

SIMULATION_KINDS = ("bivariate", "skip_pattern", "wealth")
MECHANISMS = ("MCAR", "MAR")

# Unfolding-bracket ladder for amounts reported as a range
BRACKET_EDGES = np.array([0.0, 1e3, 5e3, 1e4, 5e4, 1e5, 2.5e5, 5e5, 1e6, np.inf])


class SimulatedSurvey(NamedTuple):
    csv_text: str
    config: Dict[str, Any]
    truth: pd.DataFrame


def _format(value: float) -> str:
    return format(float(value), global_config.FLOAT_FORMAT)


def _tokens(values: np.ndarray, missing: np.ndarray, not_applicable: Optional[np.ndarray] = None,
            labels: Optional[List[str]] = None, integer: bool = False) -> List[str]:
    out = []
    for r, value in enumerate(values):
        if not_applicable is not None and not_applicable[r]:
            out.append(global_config.NOT_APPLICABLE_TOKEN)
        elif missing[r]:
            out.append("")
        elif labels is not None:
            out.append(labels[int(value)])
        elif integer:
            out.append(str(int(value)))
        else:
            out.append(_format(value))
    return out


def missingness_probabilities(driver: np.ndarray, rate: float, mechanism: str, strength: float = 1.5) -> np.ndarray:
    """
    Per-row probability of a cell going missing. MCAR is flat; MAR is
    logistic in the standardized driver with the intercept solved so the
    expected rate equals `rate`.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"missing rate must lie in [0, 1), got {rate}")
    if mechanism not in MECHANISMS:
        raise ValueError(f"mechanism must be one of {MECHANISMS}, got '{mechanism}'")
    n = driver.size
    if mechanism == "MCAR" or rate == 0.0:
        return np.full(n, rate)
    z = (driver - driver.mean()) / (driver.std() or 1.0)
    intercept = optimize.brentq(lambda a: special.expit(a + strength * z).mean() - rate, -50.0, 50.0)
    return special.expit(intercept + strength * z)


def _bracket_of(values: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(BRACKET_EDGES, values, side="right") - 1
    idx = np.clip(idx, 0, BRACKET_EDGES.size - 2)
    return np.column_stack([BRACKET_EDGES[idx], BRACKET_EDGES[idx + 1]])


def _bracket_tokens(values: np.ndarray, bracketed: np.ndarray) -> Tuple[List[str], List[str]]:
    brackets = _bracket_of(np.abs(values))
    low = ["" if not b else _format(brackets[r, 0]) for r, b in enumerate(bracketed)]
    high = ["" if not b or np.isinf(brackets[r, 1]) else _format(brackets[r, 1]) for r, b in enumerate(bracketed)]
    return low, high


def generate_bivariate(n_rows: int, rng: np.random.Generator, *, rho: float = 0.6, missing_rate: float = 0.3,
                       mechanism: str = "MCAR", mean_y: float = 10.0) -> SimulatedSurvey:
    """x fully observed, y = mean_y + rho x + sqrt(1 - rho^2) e with missing y."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    x = rng.standard_normal(n_rows)
    y = mean_y + rho * x + np.sqrt(1.0 - rho ** 2) * rng.standard_normal(n_rows)
    missing = rng.random(n_rows) < missingness_probabilities(x, missing_rate, mechanism)

    frame = pd.DataFrame({"x": _tokens(x, np.zeros(n_rows, bool)), "y": _tokens(y, missing)})
    config = {
        "variables": [
            {"name": "x", "kind": "continuous"},
            {"name": "y", "kind": "continuous"},
        ],
        "diagnostics": {"correlation_variables": ["x", "y"], "summary_variable": "y",
                        "regression": {"response": "y", "predictors": ["x"]}},
    }
    return SimulatedSurvey(frame.to_csv(index=False), config, pd.DataFrame({"x": x, "y": y}))


def generate_skip_pattern(n_rows: int, rng: np.random.Generator, *, missing_rate: float = 0.2,
                          mechanism: str = "MCAR", bracket_share: float = 0.5,
                          revealed_share: float = 0.5) -> SimulatedSurvey:
    """
    Nested skip pattern: `has_stocks` (no/yes) filters `stocks`, which in
    turn filters `stocks_abroad` (asked only when stocks exceed 50000).
    Half of the missing amounts come with an unfolding bracket. When the
    filter answer is missing for a holder, `revealed_share` of those rows
    still report the amount, so the filter has to be imputed consistently
    with an observed amount.
    """
    age = rng.uniform(25, 85, n_rows)
    income = np.exp(10.5 + 0.01 * (age - 50) + 0.6 * rng.standard_normal(n_rows))
    log_income = np.log(income)
    has_stocks = (rng.random(n_rows) < special.expit(-6.0 + 0.55 * log_income)).astype(float)
    stocks = np.where(has_stocks == 1, np.exp(1.2 * log_income - 3.0 + 1.0 * rng.standard_normal(n_rows)), 0.0)
    asked_abroad = stocks > 50000
    stocks_abroad = np.where(asked_abroad, stocks * special.expit(-1.0 + 0.5 * rng.standard_normal(n_rows)), 0.0)

    # A missing filter hides the amounts it gates except on revealed rows; an amount never asked is not applicable
    filter_missing = rng.random(n_rows) < missingness_probabilities(log_income, missing_rate / 2, mechanism)
    revealed = filter_missing & (has_stocks == 1) & (rng.random(n_rows) < revealed_share)
    stocks_na = ~filter_missing & (has_stocks == 0)
    stocks_missing = (filter_missing & ~revealed) | (
        (has_stocks == 1) & (rng.random(n_rows) < missingness_probabilities(log_income, missing_rate, mechanism))
    )
    stocks_observed = ~stocks_na & ~stocks_missing
    abroad_na = stocks_na | (stocks_observed & ~asked_abroad)
    abroad_missing = stocks_missing | (stocks_observed & asked_abroad & (rng.random(n_rows) < missing_rate))
    bracketed = stocks_missing & ~filter_missing & (rng.random(n_rows) < bracket_share)

    low, high = _bracket_tokens(stocks, bracketed)
    frame = pd.DataFrame({
        "age": _tokens(age, np.zeros(n_rows, bool)),
        "income": _tokens(income, np.zeros(n_rows, bool)),
        "has_stocks": _tokens(has_stocks, filter_missing, labels=["no", "yes"]),
        "stocks": _tokens(stocks, stocks_missing, stocks_na),
        "stocks_lo": low,
        "stocks_hi": high,
        "stocks_abroad": _tokens(stocks_abroad, abroad_missing, abroad_na),
    })
    config = {
        "variables": [
            {"name": "age", "kind": "continuous"},
            {"name": "income", "kind": "continuous", "transform": "signed-cube-root", "min_value": 0},
            {"name": "has_stocks", "kind": "categorical", "levels": ["no", "yes"]},
            {"name": "stocks", "kind": "continuous", "transform": "signed-cube-root",
             "restriction": "has_stocks == 'yes'", "bounds_low": "stocks_lo", "bounds_high": "stocks_hi",
             "min_value": 0},
            {"name": "stocks_abroad", "kind": "continuous", "transform": "signed-cube-root",
             "restriction": "stocks > 50000", "min_value": 0},
        ],
        "diagnostics": {"correlation_variables": ["age", "income", "stocks", "stocks_abroad"],
                        "summary_variable": "stocks"},
    }
    truth = pd.DataFrame({"age": age, "income": income, "has_stocks": has_stocks,
                          "stocks": stocks, "stocks_abroad": stocks_abroad})
    return SimulatedSurvey(frame.to_csv(index=False), config, truth)


def generate_wealth(n_rows: int, rng: np.random.Generator, *, missing_rate: float = 0.1,
                    mechanism: str = "MAR", n_extra: int = 0) -> SimulatedSurvey:
    """
    Household wealth survey: demographics, income, a count, semicontinuous
    asset and debt components, home ownership filtering home value, brackets
    on stocks and home value, sampling weights and an id column. `n_extra`
    adds continuous covariates correlated with income.
    """
    age = rng.uniform(25, 85, n_rows)
    educ = rng.choice(3, size=n_rows, p=[0.3, 0.45, 0.25]).astype(float)
    n_kids = rng.poisson(np.clip(2.2 - 0.02 * (age - 40), 0.2, None)).astype(float)
    log_income = 10.2 + 0.35 * educ + 0.015 * (age - 50) + 0.55 * rng.standard_normal(n_rows)
    income = np.exp(log_income)

    def semicontinuous(p_intercept: float, p_slope: float, scale: float, slope: float) -> np.ndarray:
        positive = rng.random(n_rows) < special.expit(p_intercept + p_slope * (log_income - 10.5))
        amount = np.exp(scale + slope * (log_income - 10.5) + 1.1 * rng.standard_normal(n_rows))
        return np.where(positive, amount, 0.0)

    checking = semicontinuous(2.0, 1.0, 8.0, 0.9)
    stocks = semicontinuous(-0.8, 1.4, 10.0, 1.3)
    debt = semicontinuous(0.3, 0.2, 9.0, 0.8)
    owns_home = (rng.random(n_rows) < special.expit(-1.0 + 0.04 * (age - 40) + 0.8 * (log_income - 10.5))).astype(float)
    home_value = np.where(owns_home == 1, np.exp(12.0 + 0.6 * (log_income - 10.5) + 0.5 * rng.standard_normal(n_rows)), 0.0)
    weights = np.exp(0.3 * rng.standard_normal(n_rows)) * 1000.0

    extras = {}
    for e in range(n_extra):
        extras[f"z{e + 1:03d}"] = 0.5 * (log_income - log_income.mean()) + rng.standard_normal(n_rows)

    def mask(driver: np.ndarray, rate: float) -> np.ndarray:
        return rng.random(n_rows) < missingness_probabilities(driver, rate, mechanism)

    income_missing = mask(age, missing_rate / 2)
    educ_missing = rng.random(n_rows) < missing_rate / 5
    checking_missing = mask(age, missing_rate)
    stocks_missing = mask(age, missing_rate)
    debt_missing = mask(age, missing_rate / 2)
    owns_missing = rng.random(n_rows) < missing_rate / 5
    home_na = ~owns_missing & (owns_home == 0)
    home_missing = owns_missing | ((owns_home == 1) & mask(age, missing_rate))

    stocks_low, stocks_high = _bracket_tokens(stocks, stocks_missing & (stocks > 0) & (rng.random(n_rows) < 0.5))
    home_low, home_high = _bracket_tokens(home_value, home_missing & ~owns_missing & (rng.random(n_rows) < 0.5))

    none = np.zeros(n_rows, bool)
    columns = {
        "id": [f"H{r + 1:06d}" for r in range(n_rows)],
        "age": _tokens(np.round(age), none, integer=True),
        "educ": _tokens(educ, educ_missing, labels=["lower", "middle", "higher"]),
        "n_kids": _tokens(n_kids, none, integer=True),
        "income": _tokens(income, income_missing),
        "checking": _tokens(checking, checking_missing),
        "stocks": _tokens(stocks, stocks_missing),
        "stocks_lo": stocks_low,
        "stocks_hi": stocks_high,
        "owns_home": _tokens(owns_home, owns_missing, labels=["no", "yes"]),
        "home_value": _tokens(home_value, home_missing, home_na),
        "home_lo": home_low,
        "home_hi": home_high,
        "debt": _tokens(debt, debt_missing),
        "wt": [_format(w) for w in weights],
    }
    for name, values in extras.items():
        columns[name] = _tokens(values, none)
    frame = pd.DataFrame(columns)

    variables = [
        {"name": "age", "kind": "continuous"},
        {"name": "educ", "kind": "categorical", "levels": ["lower", "middle", "higher"]},
        {"name": "n_kids", "kind": "count"},
        {"name": "income", "kind": "continuous", "transform": "signed-cube-root", "min_value": 0},
        {"name": "checking", "kind": "semicontinuous", "transform": "signed-cube-root", "min_value": 0},
        {"name": "stocks", "kind": "semicontinuous", "transform": "signed-cube-root",
         "bounds_low": "stocks_lo", "bounds_high": "stocks_hi", "min_value": 0},
        {"name": "owns_home", "kind": "categorical", "levels": ["no", "yes"]},
        {"name": "home_value", "kind": "continuous", "transform": "signed-cube-root",
         "restriction": "owns_home == 'yes'", "bounds_low": "home_lo", "bounds_high": "home_hi", "min_value": 0},
        {"name": "debt", "kind": "semicontinuous", "transform": "signed-cube-root", "min_value": 0},
    ]
    variables += [{"name": name, "kind": "continuous"} for name in extras]
    config = {
        "variables": variables,
        "id_column": "id",
        "weight_column": "wt",
        "diagnostics": {
            "correlation_variables": ["income", "checking", "stocks", "home_value", "debt"],
            "aggregate": {"name": "net_worth", "components": ["checking", "stocks", "home_value"],
                          "negative_components": ["debt"]},
            "summary_variable": "net_worth",
            "regression": {"response": "income", "predictors": ["age", "n_kids", "checking", "stocks"]},
        },
    }
    truth = pd.DataFrame({"age": np.round(age), "educ": educ, "n_kids": n_kids, "income": income,
                          "checking": checking, "stocks": stocks, "owns_home": owns_home,
                          "home_value": home_value, "debt": debt, "wt": weights, **extras})
    return SimulatedSurvey(frame.to_csv(index=False), config, truth)


def generate(kind: str, n_rows: int, seed: int, **options: Any) -> SimulatedSurvey:
    """Dispatches to the generator for `kind`; `options` are passed through."""
    if n_rows < 2:
        raise ValueError(f"n_rows must be at least 2, got {n_rows}")
    rng = np.random.default_rng(seed)
    generators = {"bivariate": generate_bivariate, "skip_pattern": generate_skip_pattern, "wealth": generate_wealth}
    try:
        generator = generators[kind]
    except KeyError:
        raise ValueError(f"Unknown simulation kind '{kind}'; expected one of {SIMULATION_KINDS}")
    survey = generator(n_rows, rng, **options)
    logger.info(f"Simulated {kind} survey: {n_rows} rows (seed {seed}).")
    return survey
