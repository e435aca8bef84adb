"""Small-sample corrected standard errors and confidence intervals."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .errors import DegenerateCorrectionError, DegreesOfFreedomError
from .glm import fit_glm, glm_sandwich

DEFAULT_LEVEL = 0.95


@dataclass(frozen=True)
class IntervalEstimate:
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    df: float
    level: float
    correction_factor: float
    n_eff: float | None = None
    m_eff: float | None = None

    def covers(self, value):
        return self.ci_low <= value <= self.ci_high


def p_star(family, p_S):
    """Number of parameters charged by the correction: all of them for linear regression, else 1."""
    return p_S if family.is_identity else 1


def small_sample_factor(n_eff, p_star, clustered=False, m_eff=None):
    """Variance inflation ``n/(n-p*)``, or ``(n-1)/(n-p*) * m/(m-1)`` for clustered data."""
    if n_eff <= p_star:
        raise DegenerateCorrectionError(f"effective sample size {n_eff:g} <= {p_star} parameters")
    if not clustered:
        return n_eff / (n_eff - p_star)
    if m_eff is None or m_eff <= 1:
        raise DegenerateCorrectionError(f"effective cluster count {m_eff} must exceed 1")
    return (n_eff - 1) / (n_eff - p_star) * (m_eff / (m_eff - 1))


def clustered_df(m_eff):
    """t degrees of freedom for clustered linear models: floor(m_eff), at least 2, minus one."""
    return max(math.floor(m_eff + 1e-9), 2) - 1


def confidence_interval(estimate, variance, family, n_eff, p_star, level=DEFAULT_LEVEL,
                        clustered=False, m_eff=None, corrected=False):
    """Corrected standard error and interval for one coefficient.

    ``variance`` is the uncorrected sandwich variance unless ``corrected``
    is true, in which case it already includes the small-sample factor
    (as for the two-regression engine) and is used as is.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    f = 1.0 if corrected else small_sample_factor(n_eff, p_star, clustered, m_eff)
    se = math.sqrt(f * variance)
    if family.is_identity:
        df = clustered_df(m_eff) if clustered else n_eff - p_star
        if df <= 0:
            raise DegreesOfFreedomError(f"non-positive degrees of freedom {df}")
        q = stats.t.ppf(0.5 + level / 2, df)
    else:
        df = math.inf
        q = stats.norm.ppf(0.5 + level / 2)
    return IntervalEstimate(float(estimate), se, float(estimate - q * se), float(estimate + q * se),
                            float(df), level, f, n_eff, m_eff)


def standard_analysis(y, X, family, coef=1, level=DEFAULT_LEVEL, weights=None, cluster=None):
    """Conventional GLM analysis with the corrected sandwich variance.

    Rows with NaN outcome are dropped (complete-case analysis). Returns the
    fit, the uncorrected sandwich matrix and the interval for ``coef``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    keep = ~np.isnan(y)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)[keep]
    y, X = y[keep], X[keep]
    if cluster is not None:
        cluster = np.asarray(cluster)[keep]
    fit = fit_glm(y, X, family, weights=weights)
    V = glm_sandwich(y, X, fit.beta, family, weights=weights, cluster=cluster)
    n = len(y)
    ps = p_star(family, X.shape[1])
    if cluster is None:
        ci = confidence_interval(fit.beta[coef], V[coef, coef], family, n, ps, level)
    else:
        m = len(np.unique(cluster))
        ci = confidence_interval(fit.beta[coef], V[coef, coef], family, n, ps, level,
                                 clustered=True, m_eff=m)
    return fit, V, ci
