"""Dataset ingestion, baseline mean imputation and result tables."""

from dataclasses import dataclass, field, fields, replace
import csv
import math

import numpy as np
import yaml

from .data import TrialDataset
from .errors import DataError, SchemaError

DEFAULT_MISSING_TOKENS = ("", "NA")
RESULT_HEADER = ("pattern", "delta", "estimate", "se", "ci_low", "ci_high", "n_eff")
PATTERN_ALIASES = {
    "arm1": "intervention-only",
    "intervention-only": "intervention-only",
    "both": "both-arms",
    "both-arms": "both-arms",
    "arm0": "control-only",
    "control-only": "control-only",
}
PATTERN_ORDER = ("intervention-only", "both-arms", "control-only")


@dataclass(frozen=True)
class RunConfig:
    outcome: str = "y"
    arm: str = "arm"
    covariates: tuple = ()
    auxiliaries: tuple = ()
    reason: str | None = None
    cluster: str | None = None
    family: str = "identity"
    delta_grid: tuple = (0.0, 0.0, 1)
    pattern_grids: dict = field(default_factory=dict)
    deltas: tuple | None = None
    patterns: tuple = PATTERN_ORDER
    reason_deltas: dict = field(default_factory=dict)
    level: float = 0.95
    engine: str = "auto"
    impute: tuple = ()
    missing_tokens: tuple = DEFAULT_MISSING_TOKENS
    out: str | None = None

    def __post_init__(self):
        lo, hi, steps = self.delta_grid
        if lo > hi:
            raise SchemaError(f"delta grid minimum {lo} exceeds maximum {hi}")
        if int(steps) < 1:
            raise SchemaError("delta grid needs at least one step")
        if self.engine not in ("auto", "full", "tworeg"):
            raise SchemaError(f"unknown engine {self.engine!r}")
        if not 0 < self.level < 1:
            raise SchemaError("confidence level must lie in (0, 1)")
        unknown = [p for p in self.patterns if p not in PATTERN_ORDER]
        if unknown:
            raise SchemaError(f"unknown patterns {unknown}")

    @classmethod
    def from_mapping(cls, mapping):
        names = {f.name for f in fields(cls)}
        extra = set(mapping) - names
        if extra:
            raise SchemaError(f"unknown configuration keys {sorted(extra)}")
        values = dict(mapping)
        for key in ("covariates", "auxiliaries", "impute", "missing_tokens"):
            if key in values and values[key] is not None:
                v = values[key]
                values[key] = (v,) if isinstance(v, str) else tuple(v)
        if "delta_grid" in values:
            values["delta_grid"] = parse_grid(values["delta_grid"])
        if "pattern_grids" in values:
            values["pattern_grids"] = {
                normalise_pattern(k): parse_grid(v) for k, v in values["pattern_grids"].items()}
        if values.get("deltas") is not None:
            values["deltas"] = tuple(float(v) for v in values["deltas"])
        if "patterns" in values:
            values["patterns"] = parse_patterns(values["patterns"])
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            mapping = yaml.safe_load(fh) or {}
        if not isinstance(mapping, dict):
            raise SchemaError("configuration file must hold a mapping")
        return cls.from_mapping(mapping)

    def updated(self, **overrides):
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(current)

    def grid(self, pattern):
        if self.deltas is not None:
            return sorted(self.deltas)
        lo, hi, steps = self.pattern_grids.get(pattern, self.delta_grid)
        steps = int(steps)
        if steps == 1:
            return [float(lo)]
        return [float(v) for v in np.linspace(lo, hi, steps)]


def parse_grid(value):
    """``"MIN:MAX:STEPS"`` or a 3-sequence into ``(min, max, steps)``."""
    parts = value.split(":") if isinstance(value, str) else list(value)
    if len(parts) != 3:
        raise SchemaError(f"delta grid must be MIN:MAX:STEPS, got {value!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise SchemaError(f"delta grid must be MIN:MAX:STEPS, got {value!r}") from None
    return lo, hi, steps


def normalise_pattern(name):
    try:
        return PATTERN_ALIASES[name]
    except KeyError:
        raise SchemaError(f"unknown pattern {name!r}; use both, arm1, arm0 or all") from None


def parse_patterns(value):
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",")]
    if "all" in value:
        return PATTERN_ORDER
    chosen = {normalise_pattern(v) for v in value}
    return tuple(p for p in PATTERN_ORDER if p in chosen)


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    seen = set()
    for h in header:
        if h in seen:
            raise SchemaError(f"duplicate column name {h!r}")
        seen.add(h)
    for k, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"data row {k + 1} has {len(row)} cells, header has {len(header)}")
    return header, rows


def _parse_number(cell, tokens):
    cell = cell.strip()
    if cell in tokens:
        return math.nan
    return float(cell)


def _covariate_block(name, cells, tokens, impute):
    """Numeric column, or treatment-coded dummies for a categorical one."""
    stripped = [c.strip() for c in cells]
    try:
        values = np.array([_parse_number(c, tokens) for c in stripped])
    except ValueError:
        values = None
    if values is not None:
        if np.isnan(values).any() and name not in impute:
            row = int(np.flatnonzero(np.isnan(values))[0]) + 1
            raise DataError(f"missing value in covariate {name!r} at data row {row}",
                            row=row, column=name)
        return values[:, None], (name,)
    missing = [k for k, c in enumerate(stripped) if c in tokens]
    if missing:
        raise DataError(f"missing value in categorical covariate {name!r} at data row "
                        f"{missing[0] + 1}", row=missing[0] + 1, column=name)
    levels = sorted(set(stripped))
    block = np.array([[1.0 if c == lev else 0.0 for lev in levels[1:]] for c in stripped])
    return block.reshape(len(stripped), len(levels) - 1), tuple(f"{name}={lev}" for lev in levels[1:])


def load_dataset(path, config):
    """Read a delimited file into a TrialDataset following ``config``.

    Empty cells and the configured tokens mark missing values. Numeric
    covariates listed in ``config.impute`` are mean-imputed; any other
    missing covariate cell is an error.
    """
    header, rows = _read_table(path)
    columns = {h: [row[j] for row in rows] for j, h in enumerate(header)}
    needed = [config.outcome, config.arm, *config.covariates, *config.auxiliaries]
    needed += [c for c in (config.reason, config.cluster) if c]
    absent = [c for c in needed if c not in columns]
    if absent:
        raise SchemaError(f"columns not found in {path}: {absent}")
    tokens = tuple(config.missing_tokens)

    try:
        arm_values = np.array([float(c) for c in columns[config.arm]])
    except ValueError:
        raise SchemaError(f"arm column {config.arm!r} must be numeric 0/1") from None
    if not np.all(np.isin(arm_values, (0.0, 1.0))):
        bad = sorted(set(arm_values) - {0.0, 1.0})
        raise SchemaError(f"arm column {config.arm!r} must be binary 0/1; found {bad}")
    z = arm_values.astype(int)

    y = np.empty(len(rows))
    for k, cell in enumerate(columns[config.outcome]):
        try:
            y[k] = _parse_number(cell, tokens)
        except ValueError:
            raise DataError(f"non-numeric outcome {cell!r} at data row {k + 1}",
                            row=k + 1, column=config.outcome) from None

    impute = set(config.impute)
    if "all" in impute:
        impute = set(config.covariates) | set(config.auxiliaries)

    def block(names):
        mats, labels = [], []
        for name in names:
            m, lab = _covariate_block(name, columns[name], tokens, impute)
            mats.append(m)
            labels.extend(lab)
        mat = np.hstack(mats) if mats else np.empty((len(rows), 0))
        return mat, tuple(labels)

    cov, cov_names = block(config.covariates)
    aux, aux_names = block(config.auxiliaries)
    reason = None
    if config.reason:
        reason = np.array([c.strip() or None for c in columns[config.reason]], dtype=object)
    cluster = np.array([c.strip() for c in columns[config.cluster]]) if config.cluster else None
    XS = np.column_stack([np.ones(len(rows)), z.astype(float), cov])
    data = TrialDataset(y=y, r=(~np.isnan(y)).astype(int), z=z, XS=XS, XA=aux, reason=reason,
                        cluster=cluster, names_S=("_cons", config.arm) + cov_names,
                        names_A=aux_names)
    to_impute = [c for c in cov_names + aux_names if c in impute]
    if to_impute:
        data = impute_baseline_mean(data, to_impute)
    return data


def impute_baseline_mean(data, columns):
    """Replace missing entries of the named covariates by their observed mean."""
    XS, XA = data.XS.copy(), data.XA.copy()
    for name in columns:
        if name in data.names_S:
            X, j = XS, data.names_S.index(name)
        elif name in data.names_A:
            X, j = XA, data.names_A.index(name)
        else:
            raise SchemaError(f"{name!r} is not a covariate of the dataset")
        col = X[:, j]
        present = ~np.isnan(col)
        if not present.any():
            raise DataError(f"covariate {name!r} is entirely missing", column=name)
        col[~present] = col[present].mean()
    return replace(data, XS=XS, XA=XA)


def format_number(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    return f"{value:.10g}"


def emit_results(rows, path):
    """Write sweep rows as a comma-separated table (10 significant digits)."""
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_results(rows, fh)


def write_results(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_HEADER)
    for row in rows:
        writer.writerow([row.pattern, format_number(row.delta)]
                        + [format_number(getattr(row, k)) for k in RESULT_HEADER[2:]])


def read_results(path):
    """Parse a table written by :func:`emit_results` into a list of dicts."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != RESULT_HEADER:
            raise SchemaError(f"unexpected header {reader.fieldnames}")
        for rec in reader:
            parsed = {"pattern": rec["pattern"]}
            for k in RESULT_HEADER[1:]:
                parsed[k] = math.nan if rec[k] == "NA" else float(rec[k])
            out.append(parsed)
    return out
