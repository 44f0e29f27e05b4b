"""Secondary acceptance: render real simulator CSVs and audit the sidecars.

The input CSVs are produced by the simulator's command-line interface
(its public file interface); the rendered values must match the CSV
contents exactly.
"""

import csv
import json
import subprocess
import sys

import pytest

from marketplots.cli import main as plots_main

POLICIES = ("SQSSI", "SQNSI", "AQGSI", "AQNSI")


def run_simulator(tmp_path, extra):
    cmd = [sys.executable, "-m", "trialmarket.cli"] + extra
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return tmp_path


@pytest.fixture(scope="module")
def scheme1_efficiency(tmp_path_factory):
    out = tmp_path_factory.mktemp("scheme1")
    run_simulator(
        out,
        ["simulate", "--scheme", "1", "--items", "10", "--horizon", "400",
         "--reps", "50", "--seed", "1", "--out", str(out)],
    )
    return out / "efficiency.csv"


@pytest.fixture(scope="module")
def scheme3_profile(tmp_path_factory):
    out = tmp_path_factory.mktemp("scheme3")
    exp = out / "exp.json"
    exp.write_text(json.dumps({
        "figure": "profiles-scheme3-sqssi",
        "num_items": 10,
        "horizon": 400,
        "replications": 50,
        "seed": 3,
    }))
    run_simulator(out, ["simulate", "--experiment", str(exp), "--out", str(out)])
    return out / "profiles-scheme3-sqssi_profile.csv"


def test_scheme1_efficiency_renders_four_lines(scheme1_efficiency, tmp_path):
    out = tmp_path / "scheme1_eff.svg"
    code = plots_main(["--input", str(scheme1_efficiency), "--kind", "efficiency", "--out", str(out)])
    ok = code == 0 and out.exists()
    sidecar = json.loads((tmp_path / "scheme1_eff.svg.values.json").read_text())
    four_lines = set(sidecar["series"]) == set(POLICIES)

    # sidecar values equal the CSV values exactly
    by_policy = {p: {"x": [], "y": []} for p in POLICIES}
    with open(scheme1_efficiency, newline="") as fh:
        for row in csv.DictReader(fh):
            by_policy[row["policy"]]["x"].append(int(row["step"]))
            by_policy[row["policy"]]["y"].append(float(row["mean_cum_purchases"]))
    verbatim = all(
        sidecar["series"][p]["x"] == by_policy[p]["x"]
        and sidecar["series"][p]["y"] == by_policy[p]["y"]
        for p in POLICIES
    )
    print(f"[ACCEPTANCE] plots-scheme1-efficiency: {'PASS' if ok and four_lines and verbatim else 'FAIL'}")
    assert ok and four_lines and verbatim


def test_scheme3_per_class_profile_renders(scheme3_profile, tmp_path):
    out = tmp_path / "scheme3_prof.svg"
    code = plots_main(
        ["--input", str(scheme3_profile), "--kind", "profile", "--out", str(out), "--policies", "SQSSI"]
    )
    ok = code == 0 and out.exists()
    sidecar = json.loads((tmp_path / "scheme3_prof.svg.values.json").read_text())
    has_class_panels = {"class1", "class2"} <= set(sidecar["panels"])

    rows = {}
    with open(scheme3_profile, newline="") as fh:
        for row in csv.DictReader(fh):
            rows[(int(row["item"]), row["class_or_total"])] = float(row["mean_purchases"])
    verbatim = all(
        value == rows[(item, panel)]
        for panel, data in sidecar["panels"].items()
        for item, value in zip(data["items"], data["mean_purchases"])
    )
    print(f"[ACCEPTANCE] plots-scheme3-profile: {'PASS' if ok and has_class_panels and verbatim else 'FAIL'}")
    assert ok and has_class_panels and verbatim
