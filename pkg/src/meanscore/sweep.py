"""Sensitivity sweeps over departures from MAR."""

from dataclasses import dataclass
import logging

from .data import DeltaSpec
from .errors import MeanScoreError, SchemaError, UnsupportedModelError
from .estimator import fit_mean_score
from .glm import GlmFamily
from .io import PATTERN_ORDER
from .tworeg import fit_two_linreg

log = logging.getLogger(__name__)

# arms (control, intervention) that receive the swept departure
PATTERN_ARMS = {
    "intervention-only": (0.0, 1.0),
    "both-arms": (1.0, 1.0),
    "control-only": (1.0, 0.0),
}


@dataclass(frozen=True)
class SweepRow:
    pattern: str
    delta: float
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    n_eff: float
    engine: str = ""
    error: str | None = None


def _scale(value, on):
    # 0 * -inf must stay 0 for arms outside the pattern
    return value if on else 0.0


def build_delta(pattern, delta, reason_deltas=None):
    """DeltaSpec for one pattern and grid value.

    ``reason_deltas`` maps reasons to a fixed number or to ``"delta"``
    (the swept value); fixed numbers apply in both arms.
    """
    m0, m1 = PATTERN_ARMS[pattern]
    if not reason_deltas:
        return DeltaSpec.per_arm(_scale(delta, m0), _scale(delta, m1))
    mapping = {}
    for reason, value in reason_deltas.items():
        if isinstance(value, str):
            if value.strip().lower() != "delta":
                value = float(value)
            else:
                mapping[reason] = (_scale(delta, m0), _scale(delta, m1))
                continue
        mapping[reason] = float(value)
    return DeltaSpec.per_reason(mapping)


def choose_engine(data, family, delta, engine="auto"):
    eligible = family.is_identity and data.XA.shape[1] == 0 and not delta.has_sentinel
    if engine == "auto":
        return "tworeg" if eligible else "full"
    if engine == "tworeg" and not eligible:
        raise UnsupportedModelError(
            "the two-regression engine needs the identity link, no auxiliaries and finite Delta")
    return engine


def analyse(data, family, delta, engine="auto", level=0.95, coef=None):
    """Treatment-effect interval under ``delta``; returns ``(IntervalEstimate, engine)``."""
    coef = data.arm_index if coef is None else coef
    engine = choose_engine(data, family, delta, engine)
    if engine == "tworeg":
        fit = fit_two_linreg(data, delta, family)
    else:
        fit = fit_mean_score(data, family, delta)
    return fit.interval(coef, level), engine


def check_family(data, family):
    if not family.is_identity:
        obs = data.y[data.observed]
        if not set(obs.tolist()) <= {0.0, 1.0}:
            raise SchemaError("logit family needs a 0/1 outcome")


def run_sweep(data, config):
    """One row per (pattern, delta), ordered by pattern then increasing delta.

    A failure at one grid point is logged and recorded on its row; the
    sweep continues.
    """
    family = GlmFamily.from_name(config.family)
    check_family(data, family)
    choose_engine(data, family, DeltaSpec.mar(), config.engine)
    rows = []
    for pattern in (p for p in PATTERN_ORDER if p in config.patterns):
        for value in config.grid(pattern):
            try:
                delta = build_delta(pattern, value, config.reason_deltas)
                ci, engine = analyse(data, family, delta, config.engine, config.level)
            except MeanScoreError as exc:
                log.error("%s delta=%g: %s", pattern, value, exc)
                nan = float("nan")
                rows.append(SweepRow(pattern, value, nan, nan, nan, nan, nan,
                                     error=f"{type(exc).__name__}: {exc}"))
                continue
            rows.append(SweepRow(pattern, value, ci.estimate, ci.se, ci.ci_low, ci.ci_high,
                                 ci.n_eff, engine))
    return rows
