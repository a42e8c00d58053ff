import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rigidform.cli import fmt_float, main, to_json

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_five_agents(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", SCENARIOS / "five_agents.yaml", "--out", tmp_path)
    assert code == 0
    assert out.strip() == "rigid: true, zero eigenvalues: 3, classification: ExponentiallyStable"
    report = json.loads((tmp_path / "five_agents_analyze.json").read_text())
    assert report["rigid"] is True and report["zero_count"] == 3


def test_analyze_square_cycle(capsys):
    code, out, _ = run(capsys, "analyze", SCENARIOS / "square_cycle.yaml")
    assert code == 0
    assert out.startswith("rigid: false")


def test_malformed_scenario(capsys):
    code, _, err = run(capsys, "analyze", SCENARIOS / "incomplete_clique.yaml")
    assert code == 1
    assert "missing edge (1, 3)" in err


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert run(capsys, "steer", SCENARIOS / "five_agents.yaml", "--rate", "-1")[0] == 1


def test_steer_five_agents(capsys, tmp_path):
    code, out, _ = run(capsys, "steer", SCENARIOS / "five_agents.yaml", "--out", tmp_path)
    assert code == 0 and out.startswith("verified")
    outcome = json.loads((tmp_path / "five_agents_steer_outcome.json").read_text())
    assert outcome["verified"] is True
    assert set(outcome["margins"]) == {"orbit", "endpoint", "settled", "settle_orbit"}
    assert all(v > 0 for v in outcome["margins"].values())
    lines = (tmp_path / "five_agents_steer_trajectory.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["t", "x1_1", "x1_2"]
    assert header[-3:] == ["orbit_distance", "potential", "drift_fit_residual"]
    assert len(header) == 1 + 10 + 3
    # offsets are non-reciprocal, so no potential column values
    assert all(row.split(",")[-2] == "" for row in lines[1:])
    assert (tmp_path / "five_agents_steer_settle.csv").exists()


def test_steer_verification_failure(capsys):
    code, out, _ = run(capsys, "steer", SCENARIOS / "five_agents.yaml", "--epsilon", "0.01")
    assert code == 3 and out.startswith("NOT verified")


def test_steer_identity(capsys, tmp_path):
    code, _, _ = run(capsys, "steer", SCENARIOS / "identity_target.yaml", "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "identity_target_steer_trajectory.csv").read_text().splitlines()[1:]
    coords = {tuple(r.split(",")[1:11]) for r in rows}
    assert len(coords) == 1


def test_steer_half_turn(capsys):
    code, _, err = run(capsys, "steer", SCENARIOS / "half_turn.yaml")
    assert code == 2 and "BranchSingularity" in err


def test_drift_and_compensate_zero(capsys, tmp_path):
    assert run(capsys, "drift", SCENARIOS / "zero_perturbation.yaml", "--out", tmp_path)[0] == 0
    drift = json.loads((tmp_path / "zero_perturbation_drift.json").read_text())
    assert drift["generator"]["norm"] == 0
    assert run(capsys, "compensate", SCENARIOS / "zero_perturbation.yaml", "--out", tmp_path)[0] == 0
    comp = json.loads((tmp_path / "zero_perturbation_compensate.json").read_text())
    assert all(c == 0 for _, _, c in comp["offset"])


def test_drift_and_compensate_single_edge(capsys, tmp_path):
    assert run(capsys, "compensate", SCENARIOS / "single_edge_mismatch.yaml", "--out", tmp_path)[0] == 0
    comp = json.loads((tmp_path / "single_edge_mismatch_compensate.json").read_text())
    assert comp["drift_before"]["norm"] > 1e-4
    assert comp["drift_after"]["norm"] < 1e-9
    assert comp["residual"] < 1e-10
    assert comp["stability"]["classification"] == "ExponentiallyStable"


def test_compensate_above_trust_region(capsys):
    code, _, err = run(capsys, "compensate", SCENARIOS / "large_perturbation.yaml")
    assert code == 2 and "NoConvergence" in err


def test_seed_changes_output(capsys, tmp_path):
    run(capsys, "compensate", SCENARIOS / "five_agents.yaml", "--out", tmp_path / "a", "--seed", "1")
    run(capsys, "compensate", SCENARIOS / "five_agents.yaml", "--out", tmp_path / "b", "--seed", "2")
    a = (tmp_path / "a" / "five_agents_compensate.json").read_text()
    b = (tmp_path / "b" / "five_agents_compensate.json").read_text()
    assert a != b


def test_export_roundtrip(capsys, tmp_path):
    from rigidform.scenario import load_scenario

    run(capsys, "export", SCENARIOS / "five_agents.yaml", "--out", tmp_path)
    assert load_scenario(tmp_path / "five_agents.yaml") == load_scenario(SCENARIOS / "five_agents.yaml")


def test_jobs_parallel_matches_serial(capsys, tmp_path):
    files = [SCENARIOS / "five_agents.yaml", SCENARIOS / "single_edge_mismatch.yaml"]
    assert run(capsys, "compensate", *files, "--out", tmp_path / "s")[0] == 0
    assert run(capsys, "compensate", *files, "--jobs", "2", "--out", tmp_path / "p")[0] == 0
    for name in ("five_agents_compensate.json", "single_edge_mismatch_compensate.json"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_worst_status_wins(capsys):
    code, _, _ = run(capsys, "analyze", SCENARIOS / "five_agents.yaml", SCENARIOS / "incomplete_clique.yaml")
    assert code == 1


def test_json_serializer():
    assert fmt_float(0.1) == "0.10000000000000001"
    text = to_json({"a": np.float64(1 / 3), "b": [1, 2.5], "c": np.nan, "d": np.eye(2), "e": True})
    data = json.loads(text)
    assert data["a"] == 1 / 3 and data["c"] is None and data["d"] == [[1.0, 0.0], [0.0, 1.0]]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rigidform.cli", "analyze", str(SCENARIOS / "five_agents.yaml")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "ExponentiallyStable" in proc.stdout
