"""Clustered-data variance, small-sample counts and effective cluster numbers."""

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import InsufficientClustersError, SchemaError
from .glm import sum_by_cluster
from .tworeg import log_det_ratio


@dataclass(frozen=True)
class ClusterSummary:
    m: int
    m_obs: int
    m_mis: int
    m_eff: float | None = None

    def with_m_eff(self, m_eff):
        return replace(self, m_eff=float(m_eff))


def summarise_clusters(data):
    """Count clusters, and those with at least one observed outcome."""
    if data.cluster is None:
        raise SchemaError("dataset has no cluster identifiers")
    ids, inverse = np.unique(data.cluster, return_inverse=True)
    observed_per_cluster = np.bincount(inverse, weights=data.r, minlength=len(ids))
    m = len(ids)
    m_obs = int(np.sum(observed_per_cluster > 0))
    return ClusterSummary(m=m, m_obs=m_obs, m_mis=m - m_obs)


def clustered_C(data, U_rows, cluster):
    """Meat ``sum_c U_c U_c^T`` with ``U_c`` the sum of the score rows in cluster c."""
    U_rows = np.asarray(U_rows, dtype=float)
    if len(cluster) != U_rows.shape[0]:
        raise ValueError("cluster must have one id per score row")
    Uc = sum_by_cluster(U_rows, cluster)
    return Uc.T @ Uc


def cluster_neff(I_mis, I_mis_star, summary, n_obs, n_mis):
    """Effective sample size and effective number of clusters from the influence ratio."""
    from .estimator import _ratio, effective_count

    if n_mis == 0:
        return float(n_obs), float(summary.m)
    ratio = _ratio(I_mis, I_mis_star)
    n_eff = effective_count(n_obs, n_mis, ratio)
    m_eff = effective_count(summary.m_obs, summary.m_mis, ratio)
    return n_eff, m_eff


def cluster_neff_tworeg(V_small, V_diff, V_P, counts, p, return_large=False):
    """Effective sample size and cluster count for the clustered two-regression method.

    ``V_P`` and ``V_diff`` are the clustered, small-sample corrected variances
    and ``counts`` is ``(n, n_obs, m, m_obs)``. The cluster-count equation
    ``|V_small| = (m_eff/(m_eff-1))^p |V_large_n|`` is solved first; the
    sample-size equation
    ``|V_small| = ((n_eff-1)/(n_eff-p) * m_eff/(m_eff-1))^p |V_large|``
    is then solved with that ``m_eff``.
    """
    n, n_obs, m, m_obs = counts
    if m_obs <= 1:
        raise InsufficientClustersError(f"{m_obs} clusters with observed outcomes; need at least 2")
    V_large = ((n_obs - p) / (n_obs - 1) * (m_obs - 1) / m_obs * V_P
               + (n - p) / (n - 1) * (m - 1) / m * V_diff)
    V_large_n = (m_obs - 1) / m_obs * V_P + (m - 1) / m * V_diff

    rho_m = math.exp(log_det_ratio(V_small, V_large_n) / p)
    m_eff = m if rho_m <= 1 + 1e-12 else rho_m / (rho_m - 1)
    cluster_factor = m_eff / (m_eff - 1)
    rho_n = math.exp(log_det_ratio(V_small, V_large) / p) / cluster_factor
    if p == 1 or rho_n <= 1 + 1e-12:
        # with a single parameter the sample-size factor is identically one
        n_eff = float(n)
    else:
        n_eff = (rho_n * p - 1) / (rho_n - 1)
    n_eff = min(max(n_eff, n_obs), n)
    m_eff = min(max(m_eff, m_obs), m)
    if return_large:
        return n_eff, m_eff, V_large
    return n_eff, m_eff
