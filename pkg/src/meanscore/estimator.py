"""Mean score estimator with joint sandwich variance.

The pattern-mixture model is fitted to complete cases, missing outcomes
are replaced by their expectation under the departure ``Delta`` and the
substantive model is refitted to the completed outcome. Both steps are
treated as one stacked estimating equation for the variance.
"""

from dataclasses import dataclass

import numpy as np

from . import cluster as _cluster
from .data import DeltaSpec
from .errors import DegenerateInfluenceError, InvalidDeltaError, VarianceSingularError
from .glm import GlmFamily, fit_glm, sum_by_cluster
from .inference import (DEFAULT_LEVEL, clustered_df, confidence_interval, p_star,
                        small_sample_factor)


@dataclass(frozen=True, eq=False)
class MeanScoreFit:
    beta_S: np.ndarray
    beta_P: np.ndarray
    B: np.ndarray
    C: np.ndarray
    V: np.ndarray
    V_S: np.ndarray
    U: np.ndarray
    n_eff: float
    I_mis: float
    I_mis_star: float
    ytilde: np.ndarray
    family: GlmFamily
    n: int
    n_obs: int
    sigma2_P: float | None = None
    m_eff: float | None = None
    cluster_summary: object = None
    delta: DeltaSpec | None = None

    @property
    def p_S(self):
        return len(self.beta_S)

    @property
    def p_star(self):
        return p_star(self.family, self.p_S)

    @property
    def clustered(self):
        return self.cluster_summary is not None

    @property
    def df(self):
        if not self.family.is_identity:
            return np.inf
        if self.clustered:
            return clustered_df(self.m_eff)
        return self.n_eff - self.p_star

    def corrected_cov(self):
        f = small_sample_factor(self.n_eff, self.p_star, self.clustered, self.m_eff)
        return f * self.V_S

    def interval(self, coef=1, level=DEFAULT_LEVEL):
        return confidence_interval(self.beta_S[coef], self.V_S[coef, coef], self.family,
                                   self.n_eff, self.p_star, level,
                                   clustered=self.clustered, m_eff=self.m_eff)


def fit_pattern_model(data, family):
    """Complete-case GLM of y on (XS, XA)."""
    obs = data.observed
    return fit_glm(data.y[obs], data.XP[obs], family, names=data.names_P)


def _mnar_linear_predictor(data, beta_P, delta):
    d, sentinel = delta.evaluate(data)
    return data.XP @ beta_P + d, sentinel


def compute_ytilde(data, beta_P, delta, family):
    """Observed y, or ``h(beta_P' x_P + Delta)`` for missing rows (0 under the -inf sentinel)."""
    if delta.has_sentinel and family.is_identity:
        raise InvalidDeltaError("Delta = -inf is only defined for binary outcomes")
    eta, sentinel = _mnar_linear_predictor(data, beta_P, delta)
    imputed = family.h(eta)
    imputed[sentinel] = 0.0
    return np.where(data.observed, data.y, imputed)


def solve_substantive(data, ytilde, family):
    ytilde = np.asarray(ytilde, dtype=float)
    if np.any(np.isnan(ytilde)):
        raise ValueError("completed outcome contains missing values")
    return fit_glm(ytilde, data.XS, family, names=data.names_S)


def score_rows(data, beta_S, beta_P, delta, family):
    """Per-individual stacked scores ``U_i = (U_Si, U_Pi)``, shape (n, p_S + p_P)."""
    ytilde = compute_ytilde(data, beta_P, delta, family)
    e_S = ytilde - family.h(data.XS @ beta_S)
    obs = data.observed
    XP = data.XP
    e_P = np.zeros(data.n)
    e_P[obs] = data.y[obs] - family.h(XP[obs] @ beta_P)
    return np.hstack([e_S[:, None] * data.XS, e_P[:, None] * XP])


def bread(data, beta_S, beta_P, delta, family):
    """Negative Jacobian of the stacked score, assembled blockwise."""
    XS, XP = data.XS, data.XP
    p_S, p_P = XS.shape[1], XP.shape[1]
    obs = data.observed
    eta_mis, sentinel = _mnar_linear_predictor(data, beta_P, delta)
    hp_mis = family.hprime(eta_mis)
    hp_mis[sentinel] = 0.0
    hp_mis[obs] = 0.0
    hp_S = family.hprime(XS @ beta_S)
    hp_P = np.where(obs, family.hprime(XP @ beta_P), 0.0)
    B = np.zeros((p_S + p_P, p_S + p_P))
    B[:p_S, :p_S] = XS.T @ (hp_S[:, None] * XS)
    B[:p_S, p_S:] = -XS.T @ (hp_mis[:, None] * XP)
    B[p_S:, p_S:] = XP.T @ (hp_P[:, None] * XP)
    return B


def _sandwich(B, C):
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        raise VarianceSingularError("bread matrix of the stacked equations is singular") from None
    if not np.all(np.isfinite(Binv)) or np.linalg.cond(B) > 1e14:
        raise VarianceSingularError("bread matrix of the stacked equations is singular")
    V = Binv @ C @ Binv.T
    return 0.5 * (V + V.T)


def assemble_sandwich(data, beta_S, beta_P, delta, family, cluster=None):
    """Return ``(B, C, V)`` with ``V = B^-1 C B^-T``.

    With ``cluster`` the meat is built from cluster-summed scores.
    """
    B = bread(data, beta_S, beta_P, delta, family)
    U = score_rows(data, beta_S, beta_P, delta, family)
    if cluster is not None:
        U = sum_by_cluster(U, cluster)
    C = U.T @ U
    return B, C, _sandwich(B, C)


def _conditional_variance(data, beta_P, delta, family, sigma2_P):
    """Variance of a missing outcome under the pattern-mixture model."""
    if family.is_identity:
        return np.full(data.n, sigma2_P)
    eta, sentinel = _mnar_linear_predictor(data, beta_P, delta)
    var = family.varfun(family.h(eta))
    var[sentinel] = 0.0
    return var


def influence_ratio(data, B, U, V_S, beta_S, beta_P, delta, family, sigma2_P=None):
    """Return ``(I_mis, I_mis_star)``: influence of the missing individuals as
    analysed and as it would be had their outcomes been observed."""
    p_S = data.p_S
    mis = data.r == 0
    if not mis.any():
        return 0.0, 0.0
    VSinv = np.linalg.inv(V_S)
    dbeta = np.linalg.solve(B, U[mis].T)[:p_S]          # p_S x n_mis
    I_mis = float(np.einsum("ij,ik,kj->", dbeta, VSinv, dbeta))
    BSSinv = np.linalg.inv(B[:p_S, :p_S])
    XS = data.XS[mis]
    G = XS @ BSSinv.T                                    # rows: B_SS^-1 x_i
    quad = np.einsum("ij,jk,ik->i", G, VSinv, G)
    ytilde = compute_ytilde(data, beta_P, delta, family)[mis]
    resid2 = (ytilde - family.h(XS @ beta_S)) ** 2
    var = _conditional_variance(data, beta_P, delta, family, sigma2_P)[mis]
    I_star = float(np.sum((resid2 + var) * quad))
    return I_mis, I_star


def _ratio(I_mis, I_star, tol=1e-12):
    if I_star <= tol * max(I_mis, 1.0):
        if I_mis <= tol:
            return 1.0
        raise DegenerateInfluenceError(
            f"missing-data influence {I_mis:g} with zero full-data influence")
    return I_mis / I_star


def effective_count(n_obs, n_mis, ratio):
    """``n_obs + ratio * n_mis`` clamped to ``[n_obs, n_obs + n_mis]``."""
    return float(min(max(n_obs + ratio * n_mis, n_obs), n_obs + n_mis))


def influence_neff(data, fit, family=None):
    """Effective sample size from the influence of the missing individuals.

    Returns ``(n_eff, I_mis, I_mis_star)``.
    """
    family = family or fit.family
    return _neff(data, fit.B, fit.U, fit.V_S, fit.beta_S, fit.beta_P, fit.delta, family,
                 fit.sigma2_P)


def _neff(data, B, U, V_S, beta_S, beta_P, delta, family, sigma2_P):
    if data.n_mis == 0:
        return float(data.n), 0.0, 0.0
    I_mis, I_star = influence_ratio(data, B, U, V_S, beta_S, beta_P, delta, family, sigma2_P)
    ratio = _ratio(I_mis, I_star)
    return effective_count(data.n_obs, data.n_mis, ratio), I_mis, I_star


def fit_mean_score(data, family, delta=None):
    """Fit the mean score estimator and its stacked sandwich variance.

    Parameters
    ----------
    data : TrialDataset
        If ``data.cluster`` is set the meat of the sandwich, the small-sample
        factor and the degrees of freedom use clusters.
    family : GlmFamily
    delta : DeltaSpec, optional
        Departure from MAR for missing individuals; MAR by default.

    Returns
    -------
    MeanScoreFit
    """
    delta = delta or DeltaSpec.mar()
    if delta.has_sentinel and family.is_identity:
        raise InvalidDeltaError("Delta = -inf is only defined for binary outcomes")
    data.check_covariates()
    pattern = fit_pattern_model(data, family)
    beta_P = pattern.beta
    ytilde = compute_ytilde(data, beta_P, delta, family)
    beta_S = solve_substantive(data, ytilde, family).beta
    B = bread(data, beta_S, beta_P, delta, family)
    U = score_rows(data, beta_S, beta_P, delta, family)
    if data.cluster is None:
        C = U.T @ U
    else:
        C = _cluster.clustered_C(data, U, data.cluster)
    V = _sandwich(B, C)
    p_S = data.p_S
    V_S = V[:p_S, :p_S]
    sigma2_P = pattern.residual_variance if family.is_identity else None
    n_eff, I_mis, I_star = _neff(data, B, U, V_S, beta_S, beta_P, delta, family, sigma2_P)
    m_eff = summary = None
    if data.cluster is not None:
        summary = _cluster.summarise_clusters(data)
        n_eff, m_eff = _cluster.cluster_neff(I_mis, I_star, summary, data.n_obs, data.n_mis)
        summary = summary.with_m_eff(m_eff)
    fit = MeanScoreFit(beta_S=beta_S, beta_P=beta_P, B=B, C=C, V=V, V_S=V_S, U=U,
                       n_eff=n_eff, I_mis=I_mis, I_mis_star=I_star, ytilde=ytilde,
                       family=family, n=data.n, n_obs=data.n_obs, sigma2_P=sigma2_P,
                       m_eff=m_eff, cluster_summary=summary, delta=delta)
    return fit
