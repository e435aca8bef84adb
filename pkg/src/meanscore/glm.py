"""Canonical-link generalised linear models.

Only the two canonical families needed for trial outcomes are provided:
identity link with Gaussian errors and logit link with Bernoulli errors.
Offsets equal to ``-inf`` are accepted for the logit family and force the
fitted mean (and its derivative) to zero for that row.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    ConvergenceError,
    InsufficientDataError,
    InvalidDeltaError,
    SeparationError,
    SingularDesignError,
)

MAX_ITER = 100
STEP_TOL = 1e-10
SCORE_TOL = 1e-8
SEPARATION_BOUND = 30.0


@dataclass(frozen=True)
class GlmFamily:
    """Canonical-link family: inverse link ``h``, its derivative and the variance function."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("identity", "logit"):
            raise ValueError(f"unknown family {self.kind!r}; expected 'identity' or 'logit'")

    @classmethod
    def from_name(cls, name):
        aliases = {
            "identity": "identity",
            "gaussian": "identity",
            "linear": "identity",
            "logit": "logit",
            "binomial": "logit",
            "bernoulli": "logit",
            "logistic": "logit",
        }
        try:
            return cls(aliases[name.lower()])
        except KeyError:
            raise ValueError(f"unknown family {name!r}") from None

    @property
    def is_identity(self):
        return self.kind == "identity"

    def h(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.is_identity:
            return eta.copy()
        # expit(-inf) is exactly 0.0 without warnings
        return expit(eta)

    def hprime(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.is_identity:
            return np.ones_like(eta)
        mu = expit(eta)
        return mu * (1.0 - mu)

    def varfun(self, mu, sigma2=1.0):
        mu = np.asarray(mu, dtype=float)
        if self.is_identity:
            return np.full_like(mu, sigma2)
        return mu * (1.0 - mu)

    def __str__(self):
        return self.kind


IDENTITY = GlmFamily("identity")
LOGIT = GlmFamily("logit")


@dataclass(frozen=True, eq=False)
class GlmFit:
    beta: np.ndarray
    linear_predictors: np.ndarray
    fitted_means: np.ndarray
    residual_variance: float | None
    converged: bool
    iterations: int
    family: GlmFamily
    score_norm: float = 0.0


def _column_names(p, names):
    if names is None:
        return [f"x{j}" for j in range(p)]
    names = list(names)
    if len(names) != p:
        raise ValueError("names must have one entry per column of X")
    return names


def check_full_rank(X, weights=None, names=None):
    """Raise SingularDesignError naming the first column that is a linear
    combination of the preceding ones on the positively weighted rows."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    names = _column_names(p, names)
    if weights is not None:
        keep = np.asarray(weights) > 0
        Xw = X[keep] * np.sqrt(np.asarray(weights, dtype=float)[keep])[:, None]
    else:
        Xw = X
    if Xw.shape[0] < p:
        raise SingularDesignError(names[min(Xw.shape[0], p - 1)],
                                  f"only {Xw.shape[0]} usable rows for {p} coefficients")
    if np.linalg.matrix_rank(Xw) == p:
        return
    for j in range(p):
        if np.linalg.matrix_rank(Xw[:, : j + 1]) <= j:
            raise SingularDesignError(names[j])
    raise SingularDesignError(names[-1])


def _mean_and_derivative(family, eta, sentinel):
    mu = family.h(np.where(sentinel, 0.0, eta))
    hp = family.hprime(np.where(sentinel, 0.0, eta))
    mu[sentinel] = 0.0
    hp[sentinel] = 0.0
    return mu, hp


def fit_glm(y, X, family, weights=None, offset=None, names=None, max_iter=MAX_ITER):
    """Solve the weighted canonical-link score equation by Newton-Raphson.

    Parameters
    ----------
    y : array_like, shape (n,)
        Response. For the logit family values may be fractional in [0, 1].
    X : array_like, shape (n, p)
        Design matrix.
    family : GlmFamily
    weights : array_like, optional
        Non-negative case weights; rows with zero weight are ignored.
    offset : array_like, optional
        Fixed addition to the linear predictor. ``-inf`` is allowed for the
        logit family.
    names : sequence of str, optional
        Column names used in error messages.

    Returns
    -------
    GlmFit

    Raises
    ------
    SingularDesignError
        If X is rank deficient on the weighted support.
    SeparationError
        If a logit coefficient exceeds 30 in absolute value.
    ConvergenceError
        If the iteration limit is reached.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a matrix with one row per element of y")
    n, p = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    sentinel = np.isneginf(off)
    if family.is_identity and sentinel.any():
        raise InvalidDeltaError("an offset of -inf is only meaningful for the logit family")
    off = np.where(sentinel, 0.0, off)
    active = w > 0
    if np.any(~np.isfinite(y[active])):
        raise ValueError("y contains non-finite values on positively weighted rows")

    check_full_rank(X, w, names)
    # zero-weight rows may carry NaN outcomes; keep them out of the arithmetic
    yw = np.where(active, y, 0.0)

    if family.is_identity:
        sw = np.sqrt(w)
        beta = np.linalg.lstsq(X * sw[:, None], (yw - off) * sw, rcond=None)[0]
    else:
        beta = np.zeros(p)

    score_norm = np.inf
    for it in range(1, max_iter + 1):
        eta = X @ beta + off
        mu, hp = _mean_and_derivative(family, eta, sentinel)
        score = X.T @ (w * (yw - mu))
        score_norm = float(np.linalg.norm(score))
        info = X.T @ ((w * hp)[:, None] * X)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise ConvergenceError("information matrix became singular", beta, it) from None
        rel = np.max(np.abs(step)) / max(np.max(np.abs(beta)), 1.0)
        # the second clause accepts a fit whose Newton step has stalled at machine precision
        if (rel < STEP_TOL and score_norm < SCORE_TOL) or (it > 1 and rel < 1e-14):
            break
        beta = beta + step
        if not family.is_identity and np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficients diverging (max |beta| = {np.max(np.abs(beta)):.3g}); "
                "perfect separation suspected", beta, it)
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations (score norm {score_norm:.3g})",
            beta, max_iter)

    eta = X @ beta + off
    mu, _ = _mean_and_derivative(family, eta, sentinel)
    eta = np.where(sentinel, -np.inf, eta)
    sigma2 = None
    if family.is_identity and w.sum() > p:
        sigma2 = residual_variance(yw - off, X, beta, w)
    return GlmFit(beta=beta, linear_predictors=eta, fitted_means=mu,
                  residual_variance=sigma2, converged=True, iterations=it,
                  family=family, score_norm=score_norm)


def residual_variance(y, X, beta, weights=None):
    """Degrees-of-freedom corrected residual variance of a linear fit."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    p = X.shape[1]
    sw = w.sum()
    if sw <= p:
        raise InsufficientDataError(f"sum of weights {sw:g} does not exceed {p} parameters")
    active = w > 0
    resid = np.where(active, y - X @ np.asarray(beta, dtype=float), 0.0)
    return float(np.sum(w * resid**2) / (sw - p))


def glm_sandwich(y, X, beta, family, weights=None, offset=None, cluster=None):
    """Uncorrected robust variance ``B^-1 C B^-T`` of a fitted GLM.

    ``weights`` multiply each row's score, so the meat uses squared weights.
    Rows with zero weight contribute nothing. With ``cluster`` the meat sums
    scores within clusters before taking outer products.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n = len(y)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    sentinel = np.isneginf(off)
    eta = X @ beta + np.where(sentinel, 0.0, off)
    mu, hp = _mean_and_derivative(family, eta, sentinel)
    resid = np.where(w > 0, y - mu, 0.0)
    bread = X.T @ ((w * hp)[:, None] * X)
    scores = (w * resid)[:, None] * X
    if cluster is not None:
        scores = sum_by_cluster(scores, cluster)
    meat = scores.T @ scores
    binv = np.linalg.inv(bread)
    V = binv @ meat @ binv.T
    return 0.5 * (V + V.T)


def model_based_variance(X, beta, family, sigma2=None, weights=None):
    """Inverse information ``(X^T W X)^-1``, scaled by ``sigma2`` for the identity link."""
    X = np.asarray(X, dtype=float)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    hp = family.hprime(X @ beta)
    info = X.T @ ((w * hp)[:, None] * X)
    V = np.linalg.inv(info)
    if family.is_identity:
        V = V * (1.0 if sigma2 is None else sigma2)
    return V


def sum_by_cluster(rows, cluster):
    """Sum the rows of a matrix within clusters; output ordered by sorted cluster id."""
    rows = np.asarray(rows, dtype=float)
    _, inverse = np.unique(np.asarray(cluster), return_inverse=True)
    out = np.zeros((inverse.max() + 1, rows.shape[1]))
    np.add.at(out, inverse, rows)
    return out
