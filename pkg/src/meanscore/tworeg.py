"""Two-regression fast path for linear models without auxiliary variables.

With the identity link and ``x_P = x_S`` the stacked equations separate:
``beta_P`` comes from complete-case least squares and ``beta_S - beta_P``
from least squares of ``(1 - r) * Delta`` on ``x_S`` over all rows.
"""

from dataclasses import dataclass
import math

import numpy as np

from .data import DeltaSpec
from .errors import IllConditionedVarianceError, InvalidDeltaError, UnsupportedModelError
from .glm import IDENTITY, check_full_rank, sum_by_cluster
from .inference import DEFAULT_LEVEL, clustered_df, confidence_interval


@dataclass(frozen=True, eq=False)
class TwoRegFit:
    beta_P: np.ndarray
    beta_diff: np.ndarray
    beta_S: np.ndarray
    V_P: np.ndarray
    V_diff: np.ndarray
    V_small: np.ndarray
    V_large: np.ndarray
    n_eff: float
    n: int
    n_obs: int
    m_eff: float | None = None
    cluster_summary: object = None

    @property
    def p_S(self):
        return len(self.beta_S)

    @property
    def clustered(self):
        return self.cluster_summary is not None

    @property
    def df(self):
        return clustered_df(self.m_eff) if self.clustered else self.n_eff - self.p_S

    def corrected_cov(self):
        return self.V_small

    def interval(self, coef=1, level=DEFAULT_LEVEL):
        return confidence_interval(self.beta_S[coef], self.V_small[coef, coef], IDENTITY,
                                   self.n_eff, self.p_S, level, clustered=self.clustered,
                                   m_eff=self.m_eff, corrected=True)


def ols_with_sandwich(y, X, cluster=None):
    """Least-squares coefficients and the uncorrected (HC0 or cluster) sandwich."""
    XtX_inv = np.linalg.inv(X.T @ X)
    beta = XtX_inv @ (X.T @ y)
    scores = (y - X @ beta)[:, None] * X
    if cluster is not None:
        scores = sum_by_cluster(scores, cluster)
    V = XtX_inv @ (scores.T @ scores) @ XtX_inv
    return beta, 0.5 * (V + V.T)


def fit_two_linreg(data, delta=None, family=None):
    """Fit the two-regression estimator with per-component corrected sandwich variances."""
    from .cluster import cluster_neff_tworeg, summarise_clusters

    delta = delta or DeltaSpec.mar()
    if family is not None and not family.is_identity:
        raise UnsupportedModelError("the two-regression method requires the identity link")
    if data.XA.shape[1] > 0:
        raise UnsupportedModelError("the two-regression method does not allow auxiliary variables")
    if delta.has_sentinel:
        raise InvalidDeltaError("the two-regression method requires a finite Delta")
    data.check_covariates()
    X = data.XS
    p = X.shape[1]
    obs = data.observed
    check_full_rank(X[obs], names=data.names_S)
    n, n_obs = data.n, data.n_obs
    d, _ = delta.evaluate(data)
    target = np.where(obs, 0.0, d)
    cl = data.cluster
    summary = None if cl is None else summarise_clusters(data)
    beta_P, V_P = ols_with_sandwich(data.y[obs], X[obs], None if cl is None else cl[obs])
    beta_diff, V_diff = ols_with_sandwich(target, X, cl)
    if summary is None:
        V_P = n_obs / (n_obs - p) * V_P
        V_diff = n / (n - p) * V_diff
        V_small = V_P + V_diff
        V_large = (n_obs - p) / n_obs * V_P + (n - p) / n * V_diff
        n_eff = min(max(neff_determinant(V_small, V_large, p, n=n), n_obs), n)
        m_eff = None
    else:
        m, m_obs = summary.m, summary.m_obs
        V_P = (n_obs - 1) / (n_obs - p) * m_obs / (m_obs - 1) * V_P
        V_diff = (n - 1) / (n - p) * m / (m - 1) * V_diff
        V_small = V_P + V_diff
        n_eff, m_eff, V_large = cluster_neff_tworeg(
            V_small, V_diff, V_P, (n, n_obs, m, m_obs), p, return_large=True)
        summary = summary.with_m_eff(m_eff)
    return TwoRegFit(beta_P=beta_P, beta_diff=beta_diff, beta_S=beta_P + beta_diff,
                     V_P=V_P, V_diff=V_diff, V_small=V_small, V_large=V_large,
                     n_eff=float(n_eff), n=n, n_obs=n_obs, m_eff=m_eff,
                     cluster_summary=summary)


def log_det_ratio(V_num, V_den):
    """``log|V_num| - log|V_den|`` for positive definite matrices."""
    s1, ld1 = np.linalg.slogdet(V_num)
    s2, ld2 = np.linalg.slogdet(V_den)
    if s1 <= 0 or s2 <= 0 or not (np.isfinite(ld1) and np.isfinite(ld2)):
        raise IllConditionedVarianceError("variance matrix has non-positive determinant")
    return ld1 - ld2


def neff_determinant(V_small, V_large, p, n=math.inf):
    """Solve ``|V_small| = (n_eff / (n_eff - p))^p |V_large|`` for ``n_eff``.

    Returns ``n`` when the determinant ratio is indistinguishable from one.
    """
    rho = math.exp(log_det_ratio(V_small, V_large) / p)
    if rho <= 1 + 1e-12:
        return float(n)
    return p * rho / (rho - 1)
