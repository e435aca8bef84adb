"""Monte Carlo laboratory comparing mean score with Full, CC, MI and SM analyses."""

from .dgm import (DgmSpec, calibrate_cross_model, calibrate_intercept, estimand_truth,
                  generate)
from .methods import rubin_combine, run_mi, run_sm_ipw
from .study import METHODS, SimulationReport, report_rows, run_study, write_report

__all__ = [
    "DgmSpec", "METHODS", "SimulationReport", "calibrate_cross_model", "calibrate_intercept",
    "estimand_truth", "generate", "report_rows", "rubin_combine", "run_mi", "run_sm_ipw", "run_study",
    "write_report",
]
