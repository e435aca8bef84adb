"""Trial data container and departure-from-MAR specifications."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DataError, InsufficientDataError, InvalidDeltaError, SchemaError


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Two-arm trial with a possibly missing outcome.

    ``XS`` is the substantive design (intercept, arm, baseline covariates)
    and ``XA`` holds auxiliary covariates used only by the pattern model.
    Missing outcomes are stored as NaN and flagged by ``r == 0``.
    """

    y: np.ndarray
    r: np.ndarray
    z: np.ndarray
    XS: np.ndarray
    XA: np.ndarray
    reason: np.ndarray | None = None
    cluster: np.ndarray | None = None
    names_S: tuple = ()
    names_A: tuple = ()
    arm_index: int = 1

    def __post_init__(self):
        n = len(self.y)
        for name in ("r", "z", "XS", "XA"):
            if len(getattr(self, name)) != n:
                raise SchemaError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        if self.XS.ndim != 2 or self.XA.ndim != 2:
            raise SchemaError("XS and XA must be two-dimensional")
        if not np.all(np.isin(self.z, (0, 1))):
            raise SchemaError("arm indicator must be coded 0/1")
        if not np.all(np.isin(self.r, (0, 1))):
            raise SchemaError("response indicator must be coded 0/1")
        observed = ~np.isnan(self.y)
        if np.any(observed != (self.r == 1)):
            raise SchemaError("y must be present exactly where r == 1")
        if np.any(np.isinf(self.XS)) or np.any(np.isinf(self.XA)):
            raise DataError("covariates must be finite")
        if not np.any(np.all(self.XS == 1.0, axis=0)):
            raise SchemaError("XS must contain an intercept column")
        if not np.array_equal(self.XS[:, self.arm_index], self.z.astype(float)):
            raise SchemaError(f"column {self.arm_index} of XS must equal the arm indicator")
        if self.reason is not None and len(self.reason) != n:
            raise SchemaError("reason must have one entry per row")
        if self.cluster is not None and len(self.cluster) != n:
            raise SchemaError("cluster must have one entry per row")
        if self.n_obs < self.p_P:
            raise InsufficientDataError(
                f"{self.n_obs} observed outcomes for {self.p_P} pattern-model coefficients")
        if not self.names_S:
            object.__setattr__(self, "names_S", tuple(f"s{j}" for j in range(self.p_S)))
        if not self.names_A:
            object.__setattr__(self, "names_A", tuple(f"a{j}" for j in range(self.XA.shape[1])))

    @classmethod
    def from_arrays(cls, y, z, covariates=None, auxiliary=None, reason=None, cluster=None,
                    covariate_names=None, auxiliary_names=None):
        """Build a dataset with design ``(1, z, covariates)``; NaN in ``y`` marks missing."""
        y = np.asarray(y, dtype=float)
        z = np.asarray(z).astype(int)
        n = len(y)
        cov = np.empty((n, 0)) if covariates is None else np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        aux = np.empty((n, 0)) if auxiliary is None else np.asarray(auxiliary, dtype=float)
        if aux.ndim == 1:
            aux = aux[:, None]
        XS = np.column_stack([np.ones(n), z.astype(float), cov])
        names_S = ("_cons", "arm") + tuple(covariate_names or (f"x{j}" for j in range(cov.shape[1])))
        names_A = tuple(auxiliary_names or (f"aux{j}" for j in range(aux.shape[1])))
        r = (~np.isnan(y)).astype(int)
        return cls(y=y, r=r, z=z, XS=XS, XA=aux,
                   reason=None if reason is None else np.asarray(reason, dtype=object),
                   cluster=None if cluster is None else np.asarray(cluster),
                   names_S=names_S, names_A=names_A)

    @property
    def n(self):
        return len(self.y)

    @property
    def n_obs(self):
        return int(self.r.sum())

    @property
    def n_mis(self):
        return self.n - self.n_obs

    @property
    def p_S(self):
        return self.XS.shape[1]

    @property
    def p_P(self):
        return self.XS.shape[1] + self.XA.shape[1]

    @property
    def XP(self):
        return np.hstack([self.XS, self.XA])

    @property
    def names_P(self):
        return tuple(self.names_S) + tuple(self.names_A)

    @property
    def observed(self):
        return self.r == 1

    def check_covariates(self):
        """Raise DataError at the first missing covariate cell."""
        for X, names in ((self.XS, self.names_S), (self.XA, self.names_A)):
            bad = np.argwhere(np.isnan(X))
            if len(bad):
                i, j = bad[0]
                raise DataError(f"missing value in covariate {names[j]!r} at row {i}; "
                                "impute baseline covariates first", row=int(i), column=names[j])

    def take(self, index):
        """Rows selected by an integer index (e.g. a bootstrap resample)."""
        index = np.asarray(index)
        return TrialDataset(
            y=self.y[index], r=self.r[index], z=self.z[index], XS=self.XS[index],
            XA=self.XA[index],
            reason=None if self.reason is None else self.reason[index],
            cluster=None if self.cluster is None else self.cluster[index],
            names_S=self.names_S, names_A=self.names_A, arm_index=self.arm_index)

    def with_outcome(self, y):
        """Copy with a new outcome vector; the response indicator follows NaNs in ``y``."""
        y = np.asarray(y, dtype=float)
        return TrialDataset(
            y=y, r=(~np.isnan(y)).astype(int), z=self.z, XS=self.XS, XA=self.XA,
            reason=self.reason, cluster=self.cluster, names_S=self.names_S,
            names_A=self.names_A, arm_index=self.arm_index)

    def without_auxiliaries(self):
        return TrialDataset(
            y=self.y, r=self.r, z=self.z, XS=self.XS, XA=np.empty((self.n, 0)),
            reason=self.reason, cluster=self.cluster, names_S=self.names_S,
            arm_index=self.arm_index)

    def with_cluster(self, cluster):
        return TrialDataset(
            y=self.y, r=self.r, z=self.z, XS=self.XS, XA=self.XA, reason=self.reason,
            cluster=None if cluster is None else np.asarray(cluster),
            names_S=self.names_S, names_A=self.names_A, arm_index=self.arm_index)


def _check_value(v):
    v = float(v)
    if math.isnan(v) or v == math.inf:
        raise InvalidDeltaError(f"departure {v} is not allowed; use a finite value or -inf")
    return v


@dataclass(frozen=True)
class DeltaSpec:
    """Departure from MAR on the linear-predictor scale for individuals with missing outcome.

    ``-inf`` encodes "missing = failure" for binary outcomes.

    Examples
    --------
    ::

        DeltaSpec.constant(-1.0)
        DeltaSpec.per_arm(0.0, -2.0)          # intervention arm only
        DeltaSpec.per_reason({"lost": 0.0, "refused": (-1.0, -2.0)})
    """

    kind: str
    arm_values: tuple = (0.0, 0.0)
    reason_values: tuple = field(default_factory=tuple)

    @classmethod
    def constant(cls, delta):
        d = _check_value(delta)
        return cls("constant", (d, d))

    @classmethod
    def per_arm(cls, delta0, delta1):
        return cls("per-arm", (_check_value(delta0), _check_value(delta1)))

    @classmethod
    def per_reason(cls, mapping):
        """``mapping`` sends each reason to a scalar or a ``(control, intervention)`` pair."""
        items = []
        for reason, value in mapping.items():
            if np.ndim(value) == 0:
                d0 = d1 = _check_value(value)
            else:
                d0, d1 = (_check_value(v) for v in value)
            items.append((reason, d0, d1))
        return cls("per-reason", (0.0, 0.0), tuple(sorted(items, key=lambda t: str(t[0]))))

    @classmethod
    def mar(cls):
        return cls.constant(0.0)

    @classmethod
    def failure(cls):
        return cls.constant(-math.inf)

    @property
    def values(self):
        if self.kind == "per-reason":
            return tuple(v for _, d0, d1 in self.reason_values for v in (d0, d1))
        return self.arm_values

    @property
    def has_sentinel(self):
        return any(v == -math.inf for v in self.values)

    @property
    def is_zero(self):
        return all(v == 0.0 for v in self.values)

    def evaluate(self, data):
        """Return ``(delta, sentinel)`` arrays of length n.

        ``delta`` is finite everywhere (zero for observed rows and for
        sentinel rows); ``sentinel`` flags missing rows with ``-inf``.
        """
        n = data.n
        missing = data.r == 0
        if self.kind == "per-reason":
            if data.reason is None:
                raise InvalidDeltaError("reason-specific departures need a reason column")
            table = {reason: (d0, d1) for reason, d0, d1 in self.reason_values}
            raw = np.zeros(n)
            for i in np.flatnonzero(missing):
                try:
                    pair = table[data.reason[i]]
                except KeyError:
                    raise InvalidDeltaError(
                        f"no departure given for reason {data.reason[i]!r} (row {i})") from None
                raw[i] = pair[int(data.z[i])]
        else:
            raw = np.where(data.z == 1, self.arm_values[1], self.arm_values[0]).astype(float)
        raw = np.where(missing, raw, 0.0)
        sentinel = np.isneginf(raw)
        return np.where(sentinel, 0.0, raw), sentinel
