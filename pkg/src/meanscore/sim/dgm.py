"""Data-generating mechanisms for the binary-outcome simulation study.

DGMs 1-3 generate the outcome from a pattern-mixture model, DGM 4 from a
selection model. Large calibration draws (one million rows) fix the
response-model intercept, the cross-model sensitivity parameters and the
true value of the treatment coefficient.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import expit

from ..data import TrialDataset
from ..errors import CalibrationError
from ..glm import LOGIT, fit_glm

CALIBRATION_SIZE = 1_000_000
SCENARIOS = ("a", "b", "c", "d")

# SeedSequence spawn keys for the calibration streams
_STREAM_INTERCEPT = 0
_STREAM_CROSS = 1
_STREAM_TRUTH = 2
_STREAM_REPLICATE = 3


@dataclass(frozen=True)
class DgmSpec:
    """One cell of the simulation design.

    ``n`` is the total sample size before deletion. ``alpha1`` is left as
    None to be calibrated so that P(r = 1) equals ``pi_obs``.
    """

    dgm: int
    n: int = 500
    pi_obs: float = 0.75
    alpha_x: float = 1.0
    alpha_z: float = 1.0
    alpha_y: float = 1.0
    beta_1: float = 0.0
    beta_x: float = 1.0
    beta_z: float = 1.0
    beta_r: float = -1.0
    seed: int = 20150101
    scenario: str = ""
    alpha1: float | None = None

    def __post_init__(self):
        if self.dgm not in (1, 2, 3, 4):
            raise ValueError(f"dgm must be 1-4, got {self.dgm}")
        if not 0 < self.pi_obs < 1:
            raise ValueError("pi_obs must lie in (0, 1)")
        if self.n < 4:
            raise ValueError("n must be at least 4")

    @classmethod
    def scenario_spec(cls, dgm, scenario, seed=20150101):
        """Base case ``a`` and its variations: ``b`` n=2000, ``c`` pi_obs=0.5, ``d`` beta_r=-2."""
        changes = {"a": {}, "b": {"n": 2000}, "c": {"pi_obs": 0.5}, "d": {"beta_r": -2.0}}
        try:
            extra = changes[scenario]
        except KeyError:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}") from None
        return cls(dgm=dgm, seed=seed, scenario=scenario, **extra)

    @property
    def label(self):
        return f"{self.dgm}{self.scenario}"

    @property
    def has_covariate(self):
        return self.dgm != 1

    @property
    def x_in_substantive(self):
        return self.dgm in (3, 4)

    def with_n(self, n):
        return replace(self, n=n)


def stream(spec, *key):
    """Counter-based generator keyed by the spec seed and an integer tuple."""
    ss = np.random.SeedSequence(spec.seed, spawn_key=(spec.dgm,) + tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def _covariates(spec, n, rng):
    z = rng.integers(0, 2, size=n)
    x = rng.standard_normal(n) if spec.has_covariate else np.zeros(n)
    return z, x


def _response_linear_predictor(spec, z, x, y=None, alpha1=0.0):
    eta = alpha1 + spec.alpha_z * z
    if spec.has_covariate:
        eta = eta + spec.alpha_x * x
    if spec.dgm == 4:
        eta = eta + spec.alpha_y * y
    return eta


def _outcome_linear_predictor(spec, z, x, r=None):
    eta = spec.beta_1 + spec.beta_z * z
    if spec.has_covariate:
        eta = eta + spec.beta_x * x
    if spec.dgm != 4:
        eta = eta + spec.beta_r * (1 - r)
    return eta


def _draw(spec, n, rng, alpha1):
    """Return ``(z, x, r, y_full)`` following the DGM's generation order."""
    z, x = _covariates(spec, n, rng)
    if spec.dgm == 4:
        y = rng.binomial(1, expit(_outcome_linear_predictor(spec, z, x)))
        r = rng.binomial(1, expit(_response_linear_predictor(spec, z, x, y, alpha1)))
    else:
        r = rng.binomial(1, expit(_response_linear_predictor(spec, z, x, alpha1=alpha1)))
        y = rng.binomial(1, expit(_outcome_linear_predictor(spec, z, x, r)))
    return z, x, r, y.astype(float)


def calibrate_intercept(spec):
    """Response-model intercept giving P(r = 1) = ``pi_obs``, found by bisection."""
    if spec.alpha1 is not None:
        return spec.alpha1
    return _calibrate_intercept(_calibration_key(spec))


def _calibration_key(spec):
    return replace(spec, n=500, scenario="", alpha1=None)


@lru_cache(maxsize=None)
def _calibrate_intercept(spec):
    rng = stream(spec, _STREAM_INTERCEPT)
    z, x = _covariates(spec, CALIBRATION_SIZE, rng)
    y = None
    if spec.dgm == 4:
        y = rng.binomial(1, expit(_outcome_linear_predictor(spec, z, x)))
    base = _response_linear_predictor(spec, z, x, y)

    def rate(a):
        # averaging the response probabilities removes Bernoulli noise from the target
        return float(np.mean(expit(base + a)))

    lo, hi = -20.0, 20.0
    if not rate(lo) < spec.pi_obs < rate(hi):
        raise CalibrationError(f"target response rate {spec.pi_obs} unreachable in [-20, 20]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) < spec.pi_obs:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return 0.5 * (lo + hi)


def analysis_design(spec, z, x):
    """Substantive and auxiliary designs used by every analysis method."""
    cov = x[:, None] if spec.x_in_substantive else None
    aux = x[:, None] if spec.dgm == 2 else None
    return cov, aux


def generate(spec, rng=None, return_full=False):
    """Simulate one trial of size ``spec.n``.

    Returns a TrialDataset; with ``return_full`` also the outcome vector
    before deletion.
    """
    rng = rng if rng is not None else stream(spec, _STREAM_REPLICATE, 0)
    alpha1 = calibrate_intercept(spec)
    z, x, r, y_full = _draw(spec, spec.n, rng, alpha1)
    y = np.where(r == 1, y_full, np.nan)
    cov, aux = analysis_design(spec, z, x)
    data = TrialDataset.from_arrays(
        y, z, covariates=cov, auxiliary=aux,
        covariate_names=("x",) if cov is not None else None,
        auxiliary_names=("x",) if aux is not None else None)
    if return_full:
        return data, y_full
    return data


def _large_draw(spec, key):
    rng = stream(spec, key)
    return _draw(spec, CALIBRATION_SIZE, rng, calibrate_intercept(spec))


def _pattern_design(spec, z, x):
    cols = [np.ones(len(z)), z.astype(float)]
    if spec.has_covariate:
        cols.append(x)
    return np.column_stack(cols)


def calibrate_cross_model(spec):
    """Sensitivity parameter of the model the DGM does not follow.

    For DGM 4 this is the coefficient of ``(1 - r)`` in the pattern-mixture
    model (used by the mean score and imputation methods); for DGMs 1-3 it
    is the coefficient of ``y`` in the logistic response model (used by the
    selection-model method). Both are fitted to one million rows before
    deletion.
    """
    return _calibrate_cross_model(_calibration_key(spec))


@lru_cache(maxsize=None)
def _calibrate_cross_model(spec):
    z, x, r, y = _large_draw(spec, _STREAM_CROSS)
    XP = _pattern_design(spec, z, x)
    if spec.dgm == 4:
        fit = fit_glm(y, np.column_stack([XP, 1.0 - r]), LOGIT)
    else:
        fit = fit_glm(r.astype(float), np.column_stack([XP, y]), LOGIT)
    return float(fit.beta[-1])


def estimand_truth(spec):
    """Treatment coefficient of the substantive model fitted to one million rows before deletion."""
    return _estimand_truth(_calibration_key(spec))


@lru_cache(maxsize=None)
def _estimand_truth(spec):
    z, x, _, y = _large_draw(spec, _STREAM_TRUTH)
    cols = [np.ones(len(z)), z.astype(float)]
    if spec.x_in_substantive:
        cols.append(x)
    return float(fit_glm(y, np.column_stack(cols), LOGIT).beta[1])


def ms_delta(spec):
    """Departure used by the mean score and imputation methods."""
    if spec.dgm == 4:
        return calibrate_cross_model(spec)
    return spec.beta_r


def sm_delta(spec):
    """Response-model log odds ratio per unit of y used by the selection-model method."""
    if spec.dgm == 4:
        return spec.alpha_y
    return calibrate_cross_model(spec)
