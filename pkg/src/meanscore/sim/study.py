"""Monte Carlo study runner and report aggregation."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import logging
import math

import numpy as np

from ..data import DeltaSpec
from ..errors import MeanScoreError, StudyError
from ..estimator import fit_mean_score
from ..glm import LOGIT
from ..inference import standard_analysis
from .dgm import (
    _STREAM_REPLICATE,
    DgmSpec,
    estimand_truth,
    generate,
    ms_delta,
    sm_delta,
    stream,
)
from .methods import run_mi, run_sm_ipw

log = logging.getLogger(__name__)

METHODS = ("full", "cc", "ms", "mi", "sm")
METHOD_LABELS = {"full": "Full", "cc": "CC", "ms": "MS", "mi": "MI", "sm": "SM"}
FAILURE_LIMIT = 0.01


@dataclass(frozen=True)
class MethodSummary:
    reps: int
    failures: int
    bias: float
    bias_mce: float
    empse: float
    empse_mce: float
    modse: float
    modse_mce: float
    coverage: float
    coverage_mce: float
    mean_estimate: float


@dataclass(frozen=True)
class SimulationReport:
    label: str
    truth: float
    reps: int
    methods: dict = field(default_factory=dict)
    ms_delta: float | None = None
    sm_delta: float | None = None

    def __getitem__(self, method):
        return self.methods[method]


def summarise(estimates, ses, hits, truth, failures=0):
    """Bias, empirical and model SE, coverage (%) and their Monte Carlo errors."""
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(ses, dtype=float)
    hit = np.asarray(hits, dtype=float)
    R = len(est)
    mean = math.fsum(est) / R
    empse = math.sqrt(math.fsum((est - mean) ** 2) / (R - 1))
    modse = math.fsum(se) / R
    modse_sd = math.sqrt(math.fsum((se - modse) ** 2) / (R - 1))
    cov = 100.0 * math.fsum(hit) / R
    return MethodSummary(
        reps=R, failures=failures, bias=mean - truth, bias_mce=empse / math.sqrt(R),
        empse=empse, empse_mce=empse / math.sqrt(2 * (R - 1)), modse=modse,
        modse_mce=modse_sd / math.sqrt(R), coverage=cov,
        coverage_mce=math.sqrt(cov * (100.0 - cov) / R), mean_estimate=mean)


def analyse_replicate(spec, index, methods, mi_imputations=30, level=0.95):
    """Generate replicate ``index`` of ``spec`` and apply each method.

    Returns a dict ``method -> IntervalEstimate`` (or the exception raised).
    """
    rng = stream(spec, _STREAM_REPLICATE, index)
    data, y_full = generate(spec, rng, return_full=True)
    out = {}
    for method in methods:
        try:
            if method == "full":
                out[method] = standard_analysis(y_full, data.XS, LOGIT, level=level)[2]
            elif method == "cc":
                out[method] = standard_analysis(data.y, data.XS, LOGIT, level=level)[2]
            elif method == "ms":
                delta = DeltaSpec.constant(ms_delta(spec))
                out[method] = fit_mean_score(data, LOGIT, delta).interval(level=level)
            elif method == "mi":
                delta = DeltaSpec.constant(ms_delta(spec))
                out[method] = run_mi(data, delta, m=mi_imputations, rng=rng, level=level)
            elif method == "sm":
                out[method] = run_sm_ipw(data, sm_delta(spec), level=level)
            else:
                raise ValueError(f"unknown method {method!r}")
        except (MeanScoreError, np.linalg.LinAlgError) as exc:
            out[method] = exc
    return out


def run_study(specs, reps, methods=METHODS, workers=1, mi_imputations=30, level=0.95):
    """Run ``reps`` replicates of each spec and aggregate per method.

    Replicate ``i`` of a spec always uses the random stream keyed by
    ``(spec.seed, spec.dgm, i)``, so results do not depend on ``workers``.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    if isinstance(specs, DgmSpec):
        specs = [specs]
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    reports = []
    for spec in specs:
        truth = estimand_truth(spec)
        # calibrations are shared read-only across workers; compute them up front
        d_ms = ms_delta(spec) if {"ms", "mi"} & set(methods) else None
        d_sm = sm_delta(spec) if "sm" in methods else None

        def one(i, spec=spec):
            return analyse_replicate(spec, i, methods, mi_imputations, level)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, range(reps)))
        else:
            results = [one(i) for i in range(reps)]

        summaries = {}
        for method in methods:
            ok = [res[method] for res in results if not isinstance(res[method], Exception)]
            failures = reps - len(ok)
            if failures:
                log.warning("%s %s: %d of %d replicates failed", spec.label, method,
                            failures, reps)
            if failures > FAILURE_LIMIT * reps:
                raise StudyError(f"{spec.label} {method}: {failures} of {reps} replicates failed")
            summaries[method] = summarise(
                [ci.estimate for ci in ok], [ci.se for ci in ok],
                [ci.covers(truth) for ci in ok], truth, failures)
        reports.append(SimulationReport(label=spec.label, truth=truth, reps=reps,
                                        methods=summaries, ms_delta=d_ms, sm_delta=d_sm))
    return reports


REPORT_BLOCKS = (("bias", "bias"), ("empse", "empse"), ("coverage", "coverage"),
                 ("bias_mce", "bias_mce"), ("empse_mce", "empse_mce"),
                 ("coverage_mce", "coverage_mce"), ("modse", "modse"))


def report_rows(reports):
    """Header and rows of the wide report.

    One row per DGM cell and one block of columns per metric, with one
    column per method inside each block.
    """
    methods = list(reports[0].methods)
    header = ["dgm", "reps", "truth"]
    for _, attr in REPORT_BLOCKS:
        header += [f"{attr}_{m}" for m in methods]
    header += [f"failures_{m}" for m in methods]
    rows = []
    for rep in reports:
        row = [rep.label, str(rep.reps), f"{rep.truth:.10g}"]
        for _, attr in REPORT_BLOCKS:
            row += [f"{getattr(rep.methods[m], attr):.10g}" for m in methods]
        row += [str(rep.methods[m].failures) for m in methods]
        rows.append(row)
    return header, rows


def write_report(reports, path):
    header, rows = report_rows(reports)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
