"""Comparator estimators: multiple imputation and selection model with IPW."""

import math

import numpy as np
from scipy import stats

from ..data import DeltaSpec
from ..errors import (
    ExtremeWeightError,
    MeanScoreError,
    MultipleImputationError,
    SelectionModelConvergenceError,
)
from ..estimator import fit_pattern_model
from ..glm import LOGIT, fit_glm, model_based_variance
from ..inference import DEFAULT_LEVEL, IntervalEstimate, standard_analysis

MAX_WEIGHT = 1e6


def rubin_combine(estimates, variances, level=DEFAULT_LEVEL):
    """Pool completed-data estimates: mean, ``W + (1 + 1/m) B`` and Rubin's degrees of freedom."""
    q = np.asarray(estimates, dtype=float)
    u = np.asarray(variances, dtype=float)
    m = len(q)
    qbar = math.fsum(q) / m
    W = math.fsum(u) / m
    B = float(np.var(q, ddof=1)) if m > 1 else 0.0
    T = W + (1 + 1 / m) * B
    if B > 0:
        df = (m - 1) * (1 + W / ((1 + 1 / m) * B)) ** 2
        q_level = stats.t.ppf(0.5 + level / 2, df)
    else:
        df = math.inf
        q_level = stats.norm.ppf(0.5 + level / 2)
    se = math.sqrt(T)
    return IntervalEstimate(qbar, se, qbar - q_level * se, qbar + q_level * se, df, level, 1.0)


def run_mi(data, delta, m=30, family=LOGIT, rng=None, coef=1, level=DEFAULT_LEVEL):
    """Multiple imputation from the pattern-mixture model with an offset ``Delta``.

    Each imputation draws the pattern-model coefficients from their
    asymptotic normal distribution (and, for the identity link, the residual
    variance from its scaled chi-square), imputes missing outcomes from the
    family distribution and fits the substantive model.
    """
    if m < 2:
        raise ValueError("at least two imputations are needed")
    rng = rng if rng is not None else np.random.default_rng()
    delta = delta or DeltaSpec.mar()
    obs = data.observed
    XP = data.XP
    pattern = fit_pattern_model(data, family)
    beta_hat = pattern.beta
    sigma2 = pattern.residual_variance
    cov = model_based_variance(XP[obs], beta_hat, family, sigma2=sigma2)
    chol = np.linalg.cholesky(cov)
    d, sentinel = delta.evaluate(data)
    mis = ~obs
    df_resid = data.n_obs - data.p_P

    estimates, variances, failures = [], [], 0
    for _ in range(m):
        scale = 1.0
        s2 = sigma2
        if family.is_identity:
            s2 = sigma2 * df_resid / rng.chisquare(df_resid)
            scale = math.sqrt(s2 / sigma2)
        beta = beta_hat + scale * (chol @ rng.standard_normal(len(beta_hat)))
        mean = family.h(XP[mis] @ beta + d[mis])
        mean[sentinel[mis]] = 0.0
        y = data.y.copy()
        if family.is_identity:
            y[mis] = mean + math.sqrt(s2) * rng.standard_normal(mis.sum())
        else:
            y[mis] = rng.binomial(1, mean)
        try:
            fit = fit_glm(y, data.XS, family)
            s2_fit = fit.residual_variance
            V = model_based_variance(data.XS, fit.beta, family, sigma2=s2_fit)
        except MeanScoreError:
            failures += 1
            continue
        estimates.append(fit.beta[coef])
        variances.append(V[coef, coef])
    if len(estimates) < 2:
        raise MultipleImputationError(f"{failures} of {m} imputations failed")
    return rubin_combine(estimates, variances, level)


def solve_response_model(r, X, offset_y=None, max_iter=100, tol=1e-10):
    """Solve ``sum_i x_i {r_i / expit(a'x_i + o_i) - 1} = 0`` by damped Newton.

    ``offset_y`` supplies ``Delta* y_i`` and is only read where ``r_i = 1``,
    so missing outcomes never enter.
    """
    r = np.asarray(r, dtype=float)
    X = np.asarray(X, dtype=float)
    obs = r == 1
    off = np.zeros(len(r))
    if offset_y is not None:
        off[obs] = np.asarray(offset_y, dtype=float)[obs]

    def equation(a):
        p = np.exp(-np.logaddexp(0.0, -(X[obs] @ a + off[obs])))
        F = X[obs].T @ (1.0 / p) - X.sum(axis=0)
        J = -X[obs].T @ (((1 - p) / p)[:, None] * X[obs])
        return F, J

    try:
        alpha = fit_glm(r, X, LOGIT).beta
    except MeanScoreError:
        alpha = np.zeros(X.shape[1])
    F, J = equation(alpha)
    norm = np.linalg.norm(F)
    for _ in range(max_iter):
        if norm < tol:
            return alpha, norm
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-8:
            trial = alpha - t * step
            F_new, J_new = equation(trial)
            norm_new = np.linalg.norm(F_new)
            if np.isfinite(norm_new) and norm_new < norm:
                break
            t *= 0.5
        else:
            break
        alpha, F, J, norm = trial, F_new, J_new, norm_new
    if norm < tol:
        return alpha, norm
    raise SelectionModelConvergenceError(
        f"response-model equation not solved (residual norm {norm:.3g})", alpha, max_iter)


def run_sm_ipw(data, delta_star, family=LOGIT, coef=1, level=DEFAULT_LEVEL):
    """Selection model with stabilised inverse probability weights.

    The response model uses ``(XS, XA)`` plus ``delta_star * y``; the
    numerator model uses ``XS`` alone with no outcome term. The substantive
    model is fitted to complete cases and its sandwich variance ignores
    uncertainty in the response-model coefficients.
    """
    obs = data.observed
    y0 = np.where(obs, data.y, 0.0)
    r = data.r
    alpha, _ = solve_response_model(r, data.XP, delta_star * y0)
    gamma, _ = solve_response_model(r, data.XS)
    p_den = np.exp(-np.logaddexp(0.0, -(data.XP[obs] @ alpha + delta_star * y0[obs])))
    p_num = np.exp(-np.logaddexp(0.0, -(data.XS[obs] @ gamma)))
    w_obs = p_num / p_den
    if np.max(w_obs) > MAX_WEIGHT:
        raise ExtremeWeightError(f"stabilised weight {np.max(w_obs):.3g} exceeds {MAX_WEIGHT:g}")
    weights = np.zeros(data.n)
    weights[obs] = w_obs
    _, _, ci = standard_analysis(data.y, data.XS, family, coef=coef, level=level,
                                 weights=weights)
    return ci
