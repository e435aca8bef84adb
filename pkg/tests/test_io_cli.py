import json
import math
from pathlib import Path

import numpy as np
import pytest

from meanscore import DeltaSpec, IDENTITY, TrialDataset, fit_mean_score, standard_analysis
from meanscore.cli import main
from meanscore.demo import demo_csv_text, demo_manifest, demo_path, manifest, summarise_rows
from meanscore.errors import DataError, SchemaError
from meanscore.io import (RunConfig, emit_results, impute_baseline_mean, load_dataset,
                          read_results)
from meanscore.sweep import SweepRow, build_delta, run_sweep

GOLDEN = Path(__file__).parent / "golden"


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def demo_config(**kw):
    base = dict(outcome="mcs1", arm="arm", covariates=("mcs0", "centre"), impute=("mcs0",))
    base.update(kw)
    return RunConfig(**base)


# ingestion -------------------------------------------------------------------

def test_load_counts_missing_outcomes(tmp_path):
    path = write_csv(tmp_path, "y,arm\n1.5,0\n,0\n2.5,1\nNA,1\n3.0,1\n")
    data = load_dataset(path, RunConfig(outcome="y", arm="arm"))
    assert (data.n, data.n_obs) == (5, 3)
    np.testing.assert_array_equal(data.r, [1, 0, 1, 0, 1])


def test_load_rejects_non_binary_arm(tmp_path):
    path = write_csv(tmp_path, "y,arm\n1,1\n2,2\n3,1\n")
    with pytest.raises(SchemaError):
        load_dataset(path, RunConfig(outcome="y", arm="arm"))


def test_load_rejects_duplicate_columns(tmp_path):
    path = write_csv(tmp_path, "y,arm,y\n1,0,1\n2,1,2\n")
    with pytest.raises(SchemaError):
        load_dataset(path, RunConfig(outcome="y", arm="arm"))


def test_load_rejects_absent_column(tmp_path):
    path = write_csv(tmp_path, "y,arm\n1,0\n2,1\n")
    with pytest.raises(SchemaError):
        load_dataset(path, RunConfig(outcome="y", arm="arm", covariates=("age",)))


def test_missing_covariate_without_imputation(tmp_path):
    path = write_csv(tmp_path, "y,arm,x\n1,0,0.5\n2,1,\n3,1,1.0\n4,0,2.0\n")
    with pytest.raises(DataError) as info:
        load_dataset(path, RunConfig(outcome="y", arm="arm", covariates=("x",)))
    assert (info.value.row, info.value.column) == (2, "x")


def test_categorical_covariate_dummies(tmp_path):
    path = write_csv(tmp_path, "y,arm,site\n1,0,b\n2,1,a\n3,1,c\n4,0,a\n")
    data = load_dataset(path, RunConfig(outcome="y", arm="arm", covariates=("site",)))
    assert data.names_S == ("_cons", "arm", "site=b", "site=c")
    np.testing.assert_array_equal(data.XS[:, 2:], [[1, 0], [0, 0], [0, 1], [0, 0]])


def test_custom_missing_token(tmp_path):
    path = write_csv(tmp_path, "y,arm\n1,0\n.,1\n2,1\n3,0\n")
    config = RunConfig(outcome="y", arm="arm", missing_tokens=("", "NA", "."))
    assert load_dataset(path, config).n_obs == 3


# imputation ------------------------------------------------------------------

def test_impute_mean_example():
    data = TrialDataset.from_arrays([1.0, 2.0, 3.0], [0, 1, 1], covariates=[1.0, np.nan, 3.0],
                                    covariate_names=["b"])
    out = impute_baseline_mean(data, ["b"])
    np.testing.assert_array_equal(out.XS[:, 2], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(out.y, data.y)
    np.testing.assert_array_equal(out.r, data.r)


def test_impute_no_missing_is_noop():
    data = TrialDataset.from_arrays([1.0, 2.0, 3.0], [0, 1, 1], covariates=[1.0, 5.0, 3.0],
                                    covariate_names=["b"])
    assert np.array_equal(impute_baseline_mean(data, ["b"]).XS, data.XS)


def test_impute_entirely_missing_column():
    data = TrialDataset.from_arrays([1.0, 2.0, 3.0], [0, 1, 1], covariates=[np.nan] * 3,
                                    covariate_names=["b"])
    with pytest.raises(DataError):
        impute_baseline_mean(data, ["b"])


def test_demo_baseline_imputation_preserves_mean():
    raw = load_dataset(demo_path(), demo_config(covariates=("mcs0",), impute=("mcs0",)))
    col = raw.XS[:, 2]
    assert not np.isnan(col).any()
    rows = [r for r in demo_csv_text().splitlines()[1:]]
    base = [float(r.split(",")[3]) for r in rows if r.split(",")[3] != ""]
    assert len(rows) - len(base) == 23
    assert col.mean() == pytest.approx(np.mean(base), rel=1e-12)


# demo data -------------------------------------------------------------------

def test_demo_file_matches_manifest():
    bundled = demo_manifest()
    assert bundled == manifest()
    assert bundled["rows"] == 409
    assert bundled["arms"]["1"]["n"] == 204 and bundled["arms"]["0"]["n"] == 205
    assert bundled["arms"]["1"]["missing_outcome"] == 29
    assert bundled["arms"]["0"]["missing_outcome"] == 13
    data = load_dataset(demo_path(), demo_config())
    assert data.n == 409
    assert int(np.sum((data.z == 1) & (data.r == 0))) == 29
    assert int(np.sum((data.z == 0) & (data.r == 0))) == 13


def test_bundled_demo_is_reproducible():
    assert demo_path().read_text(encoding="utf-8") == demo_csv_text()


def test_demo_centre_counts():
    import csv
    with open(demo_path(), newline="") as fh:
        rows = list(csv.DictReader(fh))
    summary = summarise_rows(rows)
    assert summary["arms"]["1"]["centres"] == {"Amsterdam": 50, "Leipzig": 49, "London": 45,
                                               "Verona": 60}
    assert summary["arms"]["0"]["centres"] == {"Amsterdam": 50, "Leipzig": 48, "London": 47,
                                               "Verona": 60}
    assert summary["arms"]["1"]["missing_baseline"] == 13
    assert summary["arms"]["0"]["missing_baseline"] == 10


# sweep -----------------------------------------------------------------------

def test_sweep_single_zero_point_identical_across_patterns():
    data = load_dataset(demo_path(), demo_config())
    rows = run_sweep(data, demo_config(delta_grid=(0.0, 0.0, 1)))
    assert [r.pattern for r in rows] == ["intervention-only", "both-arms", "control-only"]
    first = rows[0]
    for r in rows[1:]:
        assert (r.estimate, r.se, r.ci_low, r.ci_high, r.n_eff) == (
            first.estimate, first.se, first.ci_low, first.ci_high, first.n_eff)


def test_sweep_mar_reproduces_complete_case():
    config = demo_config(delta_grid=(0.0, 0.0, 1), engine="full")
    data = load_dataset(demo_path(), config)
    row = run_sweep(data, config)[0]
    _, _, ref = standard_analysis(data.y, data.XS, IDENTITY)
    for attr in ("estimate", "se", "ci_low", "ci_high"):
        assert getattr(row, attr) == pytest.approx(getattr(ref, attr), rel=1e-8)


def test_sweep_identity_affine_in_delta():
    data = load_dataset(demo_path(), RunConfig(outcome="mcs1", arm="arm"))
    config = RunConfig(outcome="mcs1", arm="arm", deltas=(0.0, -5.0, -10.0),
                       patterns=("intervention-only",))
    rows = run_sweep(data, config)
    est = {r.delta: r.estimate for r in rows}
    a1 = 29 / 204
    assert (est[-5.0] - est[0.0]) / -5.0 == pytest.approx(a1, abs=1e-10)
    assert (est[-10.0] - est[0.0]) / -10.0 == pytest.approx(a1, abs=1e-10)


def test_sweep_logit_neff_rises_toward_n():
    config = RunConfig(outcome="mcs40", arm="arm", auxiliaries=("mcs0", "centre"),
                       impute=("mcs0",), family="logit", delta_grid=(-6.0, 0.0, 7),
                       patterns=("both-arms",))
    data = load_dataset(demo_path(), config)
    rows = run_sweep(data, config)
    neff = [r.n_eff for r in sorted(rows, key=lambda r: -r.delta)]
    assert all(b > a for a, b in zip(neff, neff[1:]))
    assert neff[-1] > 0.99 * data.n


def test_sweep_patterns_diverge_and_heavier_arm_steeper():
    config = demo_config(delta_grid=(-10.0, 0.0, 6))
    data = load_dataset(demo_path(), config)
    rows = run_sweep(data, config)
    by = {}
    for r in rows:
        by.setdefault(r.pattern, {})[r.delta] = r.estimate
    zero = by["both-arms"][0.0]
    dev = {p: [abs(v[d] - zero) for d in sorted(v, reverse=True)] for p, v in by.items()}
    for values in dev.values():
        assert values[0] == 0.0
        assert all(b > a for a, b in zip(values, values[1:]))
    assert dev["intervention-only"][-1] > dev["control-only"][-1]


def test_sweep_records_errors_and_continues(tmp_path):
    # a missing row without a reason makes the reason-specific departure undefined
    path = write_csv(tmp_path, "y,arm,why\n1,0,\n,0,lost\n2,1,\n,1,\n3,1,\n2,0,\n")
    config = RunConfig(outcome="y", arm="arm", reason="why", deltas=(0.0, -1.0),
                       reason_deltas={"lost": "delta"}, patterns=("both-arms",))
    data = load_dataset(path, config)
    rows = run_sweep(data, config)
    assert len(rows) == 2
    assert all(r.error and "InvalidDeltaError" in r.error for r in rows)
    out = tmp_path / "out.csv"
    emit_results(rows, out)
    assert out.read_text().splitlines()[1] == "both-arms,-1,NA,NA,NA,NA,NA"


def test_reason_mapping_only_in_pattern_arms():
    spec = build_delta("intervention-only", -2.0, {"lost": 0.0, "refused": "delta"})
    table = {r: (d0, d1) for r, d0, d1 in spec.reason_values}
    assert table == {"lost": (0.0, 0.0), "refused": (0.0, -2.0)}


def test_sweep_reason_specific_matches_library(tmp_path):
    config = demo_config(reason="reason", reason_deltas={"lost": 0.0, "withdrew": "delta"},
                         deltas=(-3.0,), patterns=("both-arms",), engine="full")
    data = load_dataset(demo_path(), config)
    row = run_sweep(data, config)[0]
    fit = fit_mean_score(data, IDENTITY, DeltaSpec.per_reason({"lost": 0.0, "withdrew": -3.0}))
    assert row.estimate == pytest.approx(fit.beta_S[1], rel=1e-12)


def test_config_validation():
    with pytest.raises(SchemaError):
        RunConfig(delta_grid=(1.0, 0.0, 3))
    with pytest.raises(SchemaError):
        RunConfig(delta_grid=(0.0, 1.0, 0))
    with pytest.raises(SchemaError):
        RunConfig.from_mapping({"colour": "red"})
    assert RunConfig(delta_grid=(-1.0, 0.0, 3)).grid("both-arms") == [-1.0, -0.5, 0.0]


# output ----------------------------------------------------------------------

def test_emit_three_rows(tmp_path):
    rows = [SweepRow("both-arms", d, 1.0 / 3, 0.1, 0.0, 1.0, 100.0 + d) for d in (0.0, -1.0, -2.0)]
    out = tmp_path / "r.csv"
    emit_results(rows, out)
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "pattern,delta,estimate,se,ci_low,ci_high,n_eff"
    assert lines[1] == "both-arms,0,0.3333333333,0.1,0,1,100"


def test_emit_round_trip(tmp_path):
    rows = run_sweep(load_dataset(demo_path(), demo_config()), demo_config(delta_grid=(-4, 0, 3)))
    out = tmp_path / "r.csv"
    emit_results(rows, out)
    back = read_results(out)
    assert len(back) == len(rows)
    for rec, row in zip(back, rows):
        assert rec["pattern"] == row.pattern
        for k in ("delta", "estimate", "se", "ci_low", "ci_high", "n_eff"):
            assert rec[k] == pytest.approx(getattr(row, k), rel=1e-9)


def test_emit_requires_rows(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "x.csv")


# command line ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["demo_identity", "demo_logit"])
def test_cli_golden_files(tmp_path, name):
    out = tmp_path / "out.csv"
    code = main(["sweep", "demo", "--config", str(GOLDEN / f"{name}.yaml"), "--out", str(out)])
    assert code == 0
    assert out.read_text() == (GOLDEN / f"{name}.csv").read_text()


def test_cli_byte_identical_reruns(tmp_path):
    args = ["sweep", "demo", "--outcome", "mcs1", "--arm", "arm", "--covar", "mcs0",
            "--impute", "mcs0", "--delta-grid", "-10:0:5", "--pattern", "all"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_flags_override_config(tmp_path):
    out = tmp_path / "o.csv"
    code = main(["sweep", "demo", "--config", str(GOLDEN / "demo_identity.yaml"),
                 "--pattern", "arm0", "--deltas", "-1,0", "--out", str(out)])
    assert code == 0
    back = read_results(out)
    assert [r["pattern"] for r in back] == ["control-only"] * 2
    assert [r["delta"] for r in back] == [-1.0, 0.0]


def test_cli_sentinel_values(tmp_path):
    out = tmp_path / "o.csv"
    code = main(["sweep", "demo", "--outcome", "mcs40", "--arm", "arm", "--family", "logit",
                 "--deltas", "-inf,0", "--pattern", "both", "--out", str(out)])
    assert code == 0
    back = read_results(out)
    assert back[0]["delta"] == -math.inf
    assert back[0]["n_eff"] == pytest.approx(409, rel=1e-9)


def test_cli_schema_error_exit_code(tmp_path, capsys):
    path = write_csv(tmp_path, "y,arm\n1,1\n2,2\n3,1\n")
    assert main(["sweep", str(path), "--outcome", "y", "--arm", "arm"]) == 2
    assert "SchemaError" in capsys.readouterr().err


def test_cli_missing_covariate_exit_code(capsys):
    assert main(["sweep", "demo", "--outcome", "mcs1", "--arm", "arm", "--covar", "mcs0"]) == 2
    assert "mcs0" in capsys.readouterr().err


def test_cli_fit_error_exit_code(tmp_path):
    path = write_csv(tmp_path, "y,arm,why\n1,0,\n,0,lost\n2,1,\n,1,\n3,1,\n2,0,\n")
    code = main(["sweep", str(path), "--outcome", "y", "--arm", "arm", "--reason", "why",
                 "--reason-delta", "lost=delta", "--deltas", "0", "--out", str(tmp_path / "o")])
    assert code == 1


def test_cli_tworeg_with_logit_rejected():
    assert main(["sweep", "demo", "--outcome", "mcs40", "--arm", "arm", "--family", "logit",
                 "--engine", "tworeg"]) == 2


def test_cli_describe(capsys):
    assert main(["describe", "demo", "--outcome", "mcs1", "--arm", "arm"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("1,204,175,29,")
    assert lines[2].startswith("0,205,192,13,")


def test_cli_demo_data(tmp_path):
    assert main(["demo-data", str(tmp_path)]) == 0
    assert (tmp_path / "demo_trial.csv").read_text() == demo_csv_text()
    assert json.loads((tmp_path / "demo_trial.json").read_text())["rows"] == 409


def test_cli_simulate_deterministic_across_workers(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["simulate", "--dgm", "1", "--scenario", "a", "--reps", "12",
            "--methods", "full,cc,ms,sm"]
    assert main(base + ["--workers", "1", "--out", str(a)]) == 0
    assert main(base + ["--workers", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0].split(",")
    assert header[:3] == ["dgm", "reps", "truth"]
    assert "coverage_mce_ms" in header
