"""Data builders and independent reference computations shared by the tests."""

import numpy as np
from scipy.special import expit

from meanscore import TrialDataset


def make_trial(seed, n=200, family="identity", n_cov=1, n_aux=0, miss=(0.15, 0.3),
               n_clusters=None):
    """Simulated two-arm trial with MNAR-looking missingness.

    ``miss`` gives the approximate missing fraction in (control, intervention).
    """
    rng = np.random.default_rng(seed)
    z = np.tile([0, 1], n // 2 + 1)[:n]
    rng.shuffle(z)
    cov = rng.standard_normal((n, n_cov))
    aux = rng.standard_normal((n, n_aux))
    eta = 0.3 + 0.8 * z + cov.sum(axis=1) * 0.5 + aux.sum(axis=1) * 0.7
    if family == "identity":
        y = eta + rng.standard_normal(n)
    else:
        y = rng.binomial(1, expit(eta)).astype(float)
    p_miss = np.where(z == 1, miss[1], miss[0])
    missing = rng.random(n) < p_miss
    # keep at least a few observed rows per arm
    for arm in (0, 1):
        idx = np.flatnonzero(z == arm)
        missing[idx[:3]] = False
    y = np.where(missing, np.nan, y)
    cluster = None
    if n_clusters is not None:
        cluster = rng.integers(0, n_clusters, size=n)
    return TrialDataset.from_arrays(
        y, z, covariates=cov if n_cov else None, auxiliary=aux if n_aux else None,
        cluster=cluster)


def two_arm_counts(n0, n1, mis0, mis1, mean0=1.0, mean1=2.0, seed=0, binary=False):
    """No-covariate trial with exact per-arm sizes and missing counts."""
    rng = np.random.default_rng(seed)
    z = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    if binary:
        y = rng.binomial(1, np.where(z == 1, 0.6, 0.4)).astype(float)
    else:
        y = np.where(z == 1, mean1, mean0) + rng.standard_normal(n0 + n1)
    y[:mis0] = np.nan
    y[n0:n0 + mis1] = np.nan
    return TrialDataset.from_arrays(y, z)


def newton_oracle(y, X, logit, offset=None, iters=200):
    """Plain Newton-Raphson written independently of the package."""
    n, p = X.shape
    off = np.zeros(n) if offset is None else offset
    if not logit:
        return np.linalg.solve(X.T @ X, X.T @ (y - off))
    beta = np.zeros(p)
    for _ in range(iters):
        mu = 1.0 / (1.0 + np.exp(-(X @ beta + off)))
        grad = X.T @ (y - mu)
        hess = X.T @ (X * (mu * (1 - mu))[:, None])
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < 1e-14:
            break
    return beta


def inv_link(eta, logit):
    return 1.0 / (1.0 + np.exp(-eta)) if logit else eta


def stacked_score(theta, data, delta_rows, sentinel, logit):
    """Total stacked score sum_i U_i(beta_S, beta_P), written from the definitions."""
    p_S = data.p_S
    bS, bP = theta[:p_S], theta[p_S:]
    XS, XP = data.XS, data.XP
    obs = data.r == 1
    imputed = inv_link(XP @ bP + delta_rows, logit)
    imputed = np.where(sentinel, 0.0, imputed)
    ytilde = np.where(obs, np.nan_to_num(data.y), imputed)
    US = XS.T @ (ytilde - inv_link(XS @ bS, logit))
    eP = np.where(obs, np.nan_to_num(data.y) - inv_link(XP @ bP, logit), 0.0)
    UP = XP.T @ eP
    return np.r_[US, UP]


def fd_jacobian(fun, theta, step=1e-6):
    """Central-difference Jacobian of a vector function."""
    k = len(theta)
    cols = []
    for j in range(k):
        e = np.zeros(k)
        e[j] = step
        cols.append((fun(theta + e) - fun(theta - e)) / (2 * step))
    return np.column_stack(cols)
