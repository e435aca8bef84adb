"""Synthetic demonstration trial.

Mimics the published marginal summary of a 409-participant, four-centre
schizophrenia trial: arm sizes, centre counts, baseline and 1-year mental
health scores, and the numbers of missing values. Individual values are
synthetic.
"""

from importlib import resources
from pathlib import Path
import csv
import io
import json

import numpy as np
from scipy.special import expit

DEMO_SEED = 409
CENTRES = ("Amsterdam", "Leipzig", "London", "Verona")
# arm -> per-centre counts, baseline mean/sd, 1-year mean/sd, missing baseline, missing outcome
ARMS = {
    1: {"centres": (50, 49, 45, 60), "base": (38.4, 11.2), "follow": (40.2, 12.0),
        "miss_base": 13, "miss_out": 29},
    0: {"centres": (50, 48, 47, 60), "base": (40.1, 12.1), "follow": (41.3, 11.5),
        "miss_base": 10, "miss_out": 13},
}
COLUMNS = ("id", "arm", "centre", "mcs0", "mcs1", "mcs40", "reason")
CENTRE_SHIFT = (1.0, -1.0, 0.5, -0.5)
REASONS = ("lost", "withdrew")
DEMO_FILE = "demo_trial.csv"
MANIFEST_FILE = "demo_trial.json"


def _weighted_choice(rng, weights, k):
    """Exactly ``k`` indices drawn without replacement, probability ~ weights."""
    return np.sort(rng.choice(len(weights), size=k, replace=False, p=weights / weights.sum()))


def generate_demo(seed=DEMO_SEED):
    """Return the demo table as a list of row dicts keyed by ``COLUMNS``."""
    rng = np.random.default_rng(seed)
    rows = []
    for arm in (1, 0):
        spec = ARMS[arm]
        centre = np.repeat(np.arange(4), spec["centres"])
        n = len(centre)
        b_mean, b_sd = spec["base"]
        f_mean, f_sd = spec["follow"]
        mcs0 = np.clip(rng.normal(b_mean, b_sd, n), 5.0, 75.0)
        slope = 0.5 * f_sd / b_sd
        noise_sd = f_sd * np.sqrt(1 - 0.25)
        shift = np.array(CENTRE_SHIFT)[centre]
        mcs1 = np.clip(f_mean + slope * (mcs0 - b_mean) + shift + rng.normal(0, noise_sd, n),
                       5.0, 75.0)
        # lower scores are more likely to be lost at follow-up
        miss_out = _weighted_choice(rng, expit(-(mcs0 - b_mean) / 10.0), spec["miss_out"])
        miss_base = _weighted_choice(rng, np.ones(n), spec["miss_base"])
        reason = rng.choice(REASONS, size=n)
        order = rng.permutation(n)
        for i in order:
            out_missing = i in miss_out
            rows.append({
                "arm": arm,
                "centre": CENTRES[centre[i]],
                "mcs0": "" if i in miss_base else f"{mcs0[i]:.1f}",
                "mcs1": "" if out_missing else f"{mcs1[i]:.1f}",
                "mcs40": "" if out_missing else str(int(round(mcs1[i], 1) > 40)),
                "reason": reason[i] if out_missing else "",
            })
    rng.shuffle(rows)
    for k, row in enumerate(rows, start=1):
        row["id"] = k
    return rows


def demo_csv_text(seed=DEMO_SEED):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(generate_demo(seed))
    return buf.getvalue()


def summarise_rows(rows):
    """Counts recorded in the manifest, computed from row dicts."""
    out = {"rows": len(rows), "arms": {}}
    for arm in (1, 0):
        sub = [r for r in rows if int(r["arm"]) == arm]
        base = [float(r["mcs0"]) for r in sub if r["mcs0"] != ""]
        follow = [float(r["mcs1"]) for r in sub if r["mcs1"] != ""]
        out["arms"][str(arm)] = {
            "n": len(sub),
            "centres": {c: sum(r["centre"] == c for r in sub) for c in CENTRES},
            "missing_baseline": len(sub) - len(base),
            "missing_outcome": len(sub) - len(follow),
            "mcs0_mean": round(float(np.mean(base)), 4),
            "mcs1_mean": round(float(np.mean(follow)), 4),
            "mcs40_yes": sum(r["mcs40"] == "1" for r in sub),
        }
    return out


def manifest(seed=DEMO_SEED):
    return {"file": DEMO_FILE, "seed": seed, "columns": list(COLUMNS),
            **summarise_rows(generate_demo(seed))}


def write_demo(directory, seed=DEMO_SEED):
    """Write the CSV and its JSON manifest into ``directory``; return both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data_path, manifest_path = directory / DEMO_FILE, directory / MANIFEST_FILE
    data_path.write_text(demo_csv_text(seed), encoding="utf-8")
    manifest_path.write_text(json.dumps(manifest(seed), indent=2) + "\n", encoding="utf-8")
    return data_path, manifest_path


def demo_path():
    """Path of the bundled demo CSV."""
    return resources.files("meanscore") / "resources" / DEMO_FILE


def demo_manifest():
    text = (resources.files("meanscore") / "resources" / MANIFEST_FILE).read_text(encoding="utf-8")
    return json.loads(text)
