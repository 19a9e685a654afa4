# src/engine/regressors.py
"""
Model fits per variable type and posterior-predictive draws.

Linear models use a flat prior: sigma^2 ~ RSS / chi2(n-p), beta | sigma ~
N(beta_hat, sigma^2 (X'X)^-1). GLMs are fitted by Newton/IRLS and drawn from
the asymptotic normal around the MLE.
"""
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit, ndtr, ndtri

from src import config as global_config
from src.domain.enums import GlmFamily
from src.domain.errors import DegenerateSampleError, GlmConvergenceError, RankDeficientError
from src.domain.results import GlmFit, LinearFit

logger = logging.getLogger(__name__)

WarnCallback = Callable[[str], None]

RANK_TOL = 1e-10 # Relative to the largest |R_ii| of the pivoted QR


def _warn(callback: Optional[WarnCallback], message: str) -> None:
    if callback is not None:
        callback(message)
    else:
        logger.warning(message)


# --- Linear ---

def fit_linear(X: np.ndarray, y: np.ndarray, column_names: Sequence[str] = ()) -> LinearFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise DegenerateSampleError(f"Linear fit needs more rows than columns, got n={n}, p={p}.")

    q, r, pivot = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0 or diag.min() <= RANK_TOL * diag[0]:
        raise RankDeficientError(
            f"Design is rank deficient after screening (min |R_ii| = {diag.min():.3g}, max = {diag[0]:.3g})."
        )

    beta_pivoted = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[pivot] = beta_pivoted
    resid = y - X @ beta
    r_inv = linalg.solve_triangular(r, np.eye(p))
    return LinearFit(beta, r_inv, pivot, float(resid @ resid), n, p, column_names=tuple(column_names))


def draw_linear_coefficients(fit: LinearFit, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """One draw of (beta, sigma) from the flat-prior posterior. RSS is floored so a perfect fit still yields sigma > 0."""
    if fit.df_resid < 1:
        raise DegenerateSampleError(f"Posterior draw needs n - p >= 1, got {fit.df_resid}.")
    sigma2 = max(fit.rss, global_config.RSS_FLOOR) / rng.chisquare(fit.df_resid)
    sigma = float(np.sqrt(sigma2))
    beta = fit.beta_hat + sigma * fit.coefficient_shift(rng.standard_normal(fit.p))
    return beta, sigma


def truncated_normal(mu: np.ndarray, sigma: float, lo: np.ndarray, hi: np.ndarray,
                     rng: np.random.Generator, warn: Optional[WarnCallback] = None) -> np.ndarray:
    """
    Inverse-CDF draws from N(mu, sigma^2) restricted to [lo, hi]. Works in the
    lower tail (the interval is mirrored when it lies above the mean) so the
    CDF differences keep their precision. Intervals carrying less than
    TRUNCATION_MIN_MASS fall back to the bound nearest to mu.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), mu.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), mu.shape)
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=mu.shape)

    if sigma <= 0.0:
        return np.clip(mu, lo, hi)

    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    flip = a > 0
    a_, b_ = np.where(flip, -b, a), np.where(flip, -a, b)
    cdf_a, cdf_b = ndtr(a_), ndtr(b_)
    mass = cdf_b - cdf_a

    z = ndtri(np.clip(cdf_a + u * mass, np.finfo(float).tiny, 1.0 - np.finfo(float).eps))
    z = np.where(flip, -z, z)
    draws = mu + sigma * z

    point = lo == hi
    negligible = (mass < global_config.TRUNCATION_MIN_MASS) & ~point
    if np.any(negligible):
        _warn(warn, f"{int(negligible.sum())} truncated draw(s) had negligible interval mass; nearest bound used.")
        nearest = np.where(mu < lo, lo, hi)
        draws = np.where(negligible, nearest, draws)
    draws = np.where(point, lo, draws)
    return np.clip(draws, lo, hi)


def draw_linear_predictive(fit: LinearFit, x_new: np.ndarray, rng: np.random.Generator,
                           bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                           warn: Optional[WarnCallback] = None) -> np.ndarray:
    """Posterior-predictive draws for the rows of x_new, truncated to `bounds` when given."""
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    beta, sigma = draw_linear_coefficients(fit, rng)
    mu = x_new @ beta
    if bounds is None:
        return mu + sigma * rng.standard_normal(mu.shape)
    lo, hi = bounds
    return truncated_normal(mu, sigma, lo, hi, rng, warn)


# --- GLM ---

class _Objective:
    """Penalized log-likelihood, score and information for one family."""

    def __init__(self, X: np.ndarray, y: np.ndarray, family: GlmFamily, n_classes: int, ridge: float):
        self.X = X
        self.family = family
        self.p = X.shape[1]
        self.k = n_classes - 1 if family == GlmFamily.MULTINOMIAL else 1
        self.ridge = ridge
        if family == GlmFamily.MULTINOMIAL:
            self.y = np.zeros((X.shape[0], self.k))
            rows = np.nonzero(y > 0)[0]
            self.y[rows, y[rows].astype(int) - 1] = 1.0
        else:
            self.y = y.astype(float)
        # Column 0 is the intercept; it is never penalized
        penalty = np.ones((self.p, self.k))
        penalty[0, :] = 0.0
        self.penalty = penalty.ravel(order="F")

    def _eta(self, beta: np.ndarray) -> np.ndarray:
        clamp = global_config.LINEAR_PREDICTOR_CLAMP
        if self.family == GlmFamily.MULTINOMIAL:
            return np.clip(self.X @ beta.reshape((self.p, self.k), order="F"), -clamp, clamp)
        return np.clip(self.X @ beta, -clamp, clamp)

    def loglike(self, beta: np.ndarray) -> float:
        eta = self._eta(beta)
        if self.family == GlmFamily.BERNOULLI:
            ll = np.sum(self.y * eta - np.logaddexp(0.0, eta))
        elif self.family == GlmFamily.POISSON:
            ll = np.sum(self.y * eta - np.exp(eta))
        else:
            log_norm = np.logaddexp.reduce(np.column_stack([np.zeros(eta.shape[0]), eta]), axis=1)
            ll = np.sum(self.y * eta) - np.sum(log_norm)
        return float(ll - 0.5 * self.ridge * np.sum(self.penalty * beta ** 2))

    def score_and_information(self, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X = self.X
        eta = self._eta(beta)
        if self.family == GlmFamily.MULTINOMIAL:
            expo = np.exp(eta - eta.max(axis=1, keepdims=True).clip(min=0.0))
            base = np.exp(-eta.max(axis=1, keepdims=True).clip(min=0.0))
            probs = expo / (base + expo.sum(axis=1, keepdims=True))
            score = (X.T @ (self.y - probs)).ravel(order="F")
            info = np.empty((self.p * self.k, self.p * self.k))
            for a in range(self.k):
                for b in range(a, self.k):
                    weight = probs[:, a] * ((a == b) - probs[:, b])
                    block = (X * weight[:, None]).T @ X
                    info[a * self.p:(a + 1) * self.p, b * self.p:(b + 1) * self.p] = block
                    info[b * self.p:(b + 1) * self.p, a * self.p:(a + 1) * self.p] = block.T
        else:
            mean = expit(eta) if self.family == GlmFamily.BERNOULLI else np.exp(eta)
            weight = mean * (1.0 - mean) if self.family == GlmFamily.BERNOULLI else mean
            score = X.T @ (self.y - mean)
            info = (X * weight[:, None]).T @ X
        score = score - self.ridge * self.penalty * beta
        info = info + np.diag(self.ridge * self.penalty)
        return score, info


def _initial_beta(y: np.ndarray, family: GlmFamily, p: int, n_classes: int) -> np.ndarray:
    if family == GlmFamily.BERNOULLI:
        rate = np.clip(y.mean(), 1e-3, 1 - 1e-3)
        beta = np.zeros(p)
        beta[0] = np.log(rate / (1 - rate))
        return beta
    if family == GlmFamily.POISSON:
        beta = np.zeros(p)
        beta[0] = np.log(max(y.mean(), 1e-3))
        return beta
    counts = np.bincount(y.astype(int), minlength=n_classes).astype(float) + 0.5
    beta = np.zeros((p, n_classes - 1))
    beta[0, :] = np.log(counts[1:] / counts[0])
    return beta.ravel(order="F")


def _newton(objective: _Objective, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool, int]:
    n = objective.X.shape[0]
    ll = objective.loglike(beta)
    score, info = objective.score_and_information(beta)
    for iteration in range(1, global_config.IRLS_MAX_ITER + 1):
        if np.max(np.abs(score)) / n < global_config.IRLS_TOL:
            return beta, info, True, iteration - 1
        try:
            step = linalg.solve(info, score, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = linalg.lstsq(info, score)[0]

        # Step halving keeps the penalized likelihood non-decreasing
        for _ in range(30):
            candidate = beta + step
            candidate_ll = objective.loglike(candidate)
            if np.isfinite(candidate_ll) and candidate_ll >= ll - 1e-12 * (1.0 + abs(ll)):
                break
            step = step / 2.0
        else:
            return beta, info, False, iteration

        beta, ll = candidate, candidate_ll
        score, info = objective.score_and_information(beta)
        if np.max(np.abs(step)) < 1e-10:
            return beta, info, True, iteration
    converged = np.max(np.abs(score)) / n < global_config.IRLS_TOL
    return beta, info, bool(converged), global_config.IRLS_MAX_ITER


def _inverse_information(info: np.ndarray) -> np.ndarray:
    cov = linalg.pinvh(info)
    return (cov + cov.T) / 2.0


def fit_glm(X: np.ndarray, y: np.ndarray, family: GlmFamily, column_names: Sequence[str] = ()) -> GlmFit:
    """
    Maximum likelihood by Newton-Raphson (IRLS) with step halving.

    bernoulli: y in {0, 1}. poisson: non-negative counts. multinomial: y are
    level indices; the classes present are re-coded 0..K-1 and modelled as
    K-1 baseline-category logits against the first class present.

    Non-convergence or a coefficient beyond SEPARATION_COEF_LIMIT is treated
    as separation and the model is refitted with a weak ridge penalty on the
    non-intercept terms.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]

    classes: Tuple[int, ...] = ()
    if family == GlmFamily.MULTINOMIAL:
        present = np.unique(y)
        if present.size < 2:
            raise DegenerateSampleError("Multinomial fit needs at least two classes present.")
        classes = tuple(int(c) for c in present)
        y = np.searchsorted(present, y).astype(float)
        n_classes = present.size
    elif family == GlmFamily.BERNOULLI:
        if not np.all((y == 0) | (y == 1)):
            raise DegenerateSampleError("Bernoulli fit needs a 0/1 response.")
        classes = (0, 1)
        n_classes = 2
    else:
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DegenerateSampleError("Poisson fit needs non-negative integer responses.")
        n_classes = 1

    start = _initial_beta(y, family, p, n_classes)
    beta, info, converged, iterations = _newton(_Objective(X, y, family, n_classes, 0.0), start)
    ridge_applied = False
    if not converged or np.max(np.abs(beta)) > global_config.SEPARATION_COEF_LIMIT:
        logger.debug(
            f"{family.value} fit: converged={converged}, max|beta|={np.max(np.abs(beta)):.3g}; "
            f"refitting with ridge {global_config.SEPARATION_RIDGE}."
        )
        beta, info, converged, iterations = _newton(
            _Objective(X, y, family, n_classes, global_config.SEPARATION_RIDGE), start
        )
        ridge_applied = True
        if not np.all(np.isfinite(beta)):
            raise GlmConvergenceError(f"{family.value} fit diverged even with ridge penalty.")

    beta_hat = beta.reshape((p, n_classes - 1), order="F") if family == GlmFamily.MULTINOMIAL else beta
    return GlmFit(
        beta_hat, _inverse_information(info), family, converged, iterations,
        ridge_applied=ridge_applied, classes=classes, column_names=tuple(column_names),
    )


def _covariance_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        eigvals, eigvecs = linalg.eigh(cov)
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def draw_glm_coefficients(fit: GlmFit, rng: np.random.Generator) -> np.ndarray:
    flat = fit.beta_hat.ravel(order="F")
    draw = flat + _covariance_factor(fit.cov_hat) @ rng.standard_normal(flat.size)
    return draw.reshape(fit.beta_hat.shape, order="F")


def _linear_predictor(fit: GlmFit, x_new: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    beta = draw_glm_coefficients(fit, rng)
    clamp = global_config.LINEAR_PREDICTOR_CLAMP
    return np.clip(x_new @ beta, -clamp, clamp)


def class_probabilities(fit: GlmFit, x_new: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Per-row class probabilities under one coefficient draw. Columns follow
    fit.classes for multinomial fits and (0, 1) for bernoulli fits.
    """
    if fit.family == GlmFamily.POISSON:
        raise ValueError("class_probabilities needs a bernoulli or multinomial fit.")
    eta = _linear_predictor(fit, x_new, rng)
    if fit.family == GlmFamily.BERNOULLI:
        p = expit(eta).reshape(-1)
        return np.column_stack([1.0 - p, p])

    logits = np.column_stack([np.zeros(eta.shape[0]), eta])
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    return probs / probs.sum(axis=1, keepdims=True)


def sample_classes(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One column index per row of a probability matrix."""
    n_rows, n_classes = probs.shape
    if n_classes == 2:
        return (rng.random(n_rows) < probs[:, 1]).astype(int)
    cumulative = np.cumsum(probs, axis=1)
    u = rng.random(n_rows)[:, None]
    return np.minimum((u >= cumulative).sum(axis=1), n_classes - 1)


def draw_glm_predictive(fit: GlmFit, x_new: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draws beta* ~ N(beta_hat, cov_hat), then the response for each row of
    x_new. Returns 0/1 (bernoulli), counts (poisson) or the original level
    indices (multinomial).
    """
    if fit.family == GlmFamily.POISSON:
        eta = _linear_predictor(fit, x_new, rng)
        return rng.poisson(np.exp(eta)).astype(float)

    picked = sample_classes(class_probabilities(fit, x_new, rng), rng)
    if fit.family == GlmFamily.BERNOULLI:
        return picked.astype(float)
    return np.asarray(fit.classes, dtype=float)[picked]
