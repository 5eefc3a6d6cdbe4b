"""End-to-end command-line coverage: artifacts, determinism, exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from covis import (
    CameraIntrinsics,
    CameraPose,
    MemoryBank,
    Trajectory,
    load_trajectory,
    save_config,
    save_trajectory,
    sync_pairs,
)
from covis.cli import main
from covis.config import apply_overrides, default_config
from helpers import aimed_trajectory

SHOT_FILES = [
    "01_rotation_left.json",
    "02_arc_right_with_rot.json",
    "03_azimuth_right.json",
    "04_rotation_right.json",
    "05_arc_left_with_rot.json",
    "06_azimuth_left.json",
    "07_tilt_up.json",
    "08_translate_down_with_rot.json",
    "09_tilt_down.json",
    "10_translate_up_with_rot.json",
    "11_elevation_up.json",
    "12_zoom_out.json",
]

SIM_ARGS = ["--frames", "5", "--shots", "1,2,3", "--set", "scene.point_count=40"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory) -> Path:
    """One small simulated + evaluated run shared by the read-only tests."""
    d = tmp_path_factory.mktemp("run")
    assert main(["simulate", "--out", str(d), "--seed", "5", *SIM_ARGS]) == 0
    assert main(["eval", "--run", str(d), "--n-shots", "3"]) == 0
    return d


def test_gen_benchmark_files(tmp_path, capsys):
    a = tmp_path / "a"
    assert main(["gen-benchmark", "--out", str(a), "--set", "shots.frame_count=7"]) == 0
    out = capsys.readouterr().out
    names = sorted(p.name for p in a.glob("*.json") if p.name != "sync_pairs.json")
    assert names == SHOT_FILES
    assert all(f"wrote {a / n}" in out for n in names)
    traj = load_trajectory(a / SHOT_FILES[0])
    assert len(traj) == 7
    assert traj.label == "rotation_left"

    manifest = json.loads((a / "sync_pairs.json").read_text(encoding="utf-8"))
    assert set(manifest) == {"3", "6", "9", "12"}
    for n in (3, 6, 9, 12):
        expect = [[p.slug, q.slug] for p, q in sync_pairs(n)]
        assert manifest[str(n)] == expect

    b = tmp_path / "b"
    assert main(["gen-benchmark", "--out", str(b), "--set", "shots.frame_count=7"]) == 0
    for name in names + ["sync_pairs.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_benchmark_custom_base(tmp_path):
    intr = CameraIntrinsics.from_fov(1.2, 0.9, 30, 20)
    pose = CameraPose(rotation=np.eye(3), translation=np.array([1.0, 2.0, 3.0]))
    base_path = tmp_path / "base.json"
    save_trajectory(Trajectory.from_poses([pose], intr, label="base"), base_path)
    out = tmp_path / "suite"
    assert main(["gen-benchmark", "--out", str(out), "--base", str(base_path),
                 "--set", "shots.frame_count=3"]) == 0
    zoom = load_trajectory(out / "12_zoom_out.json")
    first, first_intr = zoom.frames[0]
    assert np.array_equal(first.translation, pose.translation)
    assert np.array_equal(first.rotation, pose.rotation)
    assert first_intr == intr


def test_simulate_artifacts(run_dir):
    assert (run_dir / "bank" / "manifest.json").exists()
    assert (run_dir / "config_resolved.json").exists()
    resolved = json.loads((run_dir / "config_resolved.json").read_text(encoding="utf-8"))
    assert resolved["scene"]["seed"] == 5
    assert resolved["scene"]["point_count"] == 40
    assert resolved["output"]["directory"] == str(run_dir)

    log = json.loads((run_dir / "run_log.json").read_text(encoding="utf-8"))
    events = log["events"]
    kinds = [e["event"] for e in events]
    assert kinds[0] == "schedule"
    sched = events[0]
    assert sched["total_frames"] == 5
    assert sched["chunks"] == [
        {"index": 1, "start": 0, "end": 5, "overlap_with_prev": 0, "clean_frames": 0}
    ]
    # one source banking, then per view: retrieve, context, banked
    assert kinds.count("banked") == 4
    assert kinds.count("retrieve") == 3
    assert kinds.count("context") == 3
    retrieves = [e for e in events if e["event"] == "retrieve"]
    assert [e["shot"] for e in retrieves] == [
        "rotation_left", "arc_right_with_rot", "azimuth_right"
    ]
    # the pool grows as generated videos are banked
    assert [len(e["scores"]) for e in retrieves] == [1, 2, 3]
    banked = [e["ref"] for e in events if e["event"] == "banked"]
    assert banked[0] == "videos/source_c01"
    for ref in banked:
        assert (run_dir / ref / "manifest.json").exists()

    bank = MemoryBank.open(run_dir / "bank")
    assert len(bank) == 4
    assert bank.source_entry(1).trajectory.label == "source"


def test_simulate_refuses_existing_bank(run_dir, capsys):
    assert main(["simulate", "--out", str(run_dir), *SIM_ARGS]) == 2
    assert "bank" in capsys.readouterr().err


def test_simulate_is_deterministic(tmp_path):
    args = ["--frames", "5", "--shots", "1", "--set", "scene.point_count=30"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--out", str(a), *args]) == 0
    assert main(["simulate", "--out", str(b), *args]) == 0
    for rel in (
        "bank/manifest.json",
        "run_log.json",
        "videos/source_c01/frame_0000.rgb",
        "videos/s01_rotation_left_c01/frame_0004.ids",
    ):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_eval_report_files(run_dir):
    csv_lines = (run_dir / "report.csv").read_text(encoding="utf-8").splitlines()
    assert csv_lines[0] == "pair,frames,mean_matched_pixels,trans_err,rot_err,scale"
    sync_rows = [l for l in csv_lines[1:] if "|" in l]
    pose_rows = [l for l in csv_lines[1:] if ":pose," in l]
    assert len(sync_rows) == 2  # sync_pairs(3)
    assert len(pose_rows) == 3
    assert sync_rows[0].startswith("rotation_left|arc_right_with_rot,5,")
    assert sync_rows[0].endswith(",,,")
    for row in pose_rows:
        cells = row.split(",")
        assert cells[1] == "5" and cells[2] == ""
        assert cells[3] == "0.0"  # generated trajectory equals the request
        assert cells[5] == "1.0"

    doc = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    assert doc["n_shots"] == 3
    assert [r["pair"] for r in doc["sync"]] == [
        [p.slug, q.slug] for p, q in sync_pairs(3)
    ]
    for pose in doc["poses"]:
        assert pose["frames"] == 5
        assert pose["trans_err"] == 0.0
        assert pose["scale"] == 1.0
        assert pose["rot_err"] < 1e-5
        assert pose["rot_err_mean"] == pose["rot_err"] / 5
    assert doc["mean_matched_kpx"] == doc["mean_matched_pixels"] / 1000.0


def test_eval_stdout(run_dir, capsys):
    assert main(["eval", "--run", str(run_dir), "--n-shots", "3"]) == 0
    out = capsys.readouterr().out
    assert "sync pairs (n_shots=3):" in out
    assert "rotation_left | arc_right_with_rot:" in out
    assert "mean matched pixels:" in out
    assert "pose errors (generated vs requested):" in out


def test_eval_missing_shots(run_dir, capsys):
    assert main(["eval", "--run", str(run_dir), "--n-shots", "6"]) == 2
    assert "missing generated shots" in capsys.readouterr().err


def test_eval_without_run(tmp_path, capsys):
    assert main(["eval", "--run", str(tmp_path / "nope")]) == 2
    assert "no bank manifest" in capsys.readouterr().err


def test_report_outputs(run_dir, capsys):
    assert main(["report", "--run", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "resolved configuration:" in out
    assert "per-shot summary:" in out

    summary = (run_dir / "report_summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[0] == "shot,chunks,frames,trans_err,rot_err,mean_matched_pixels"
    assert len(summary) == 4
    assert summary[1].startswith("arc_right_with_rot,1,5,0.0,")

    svg = (run_dir / "trajectories.svg").read_text(encoding="utf-8")
    assert svg.count("<polyline") == 4  # source plus three shots
    assert "<title>rotation_left</title>" in svg
    assert "<title>source</title>" in svg


def test_report_without_eval_warns(tmp_path, capsys):
    d = tmp_path / "r"
    assert main(["simulate", "--out", str(d), "--frames", "5", "--shots", "12",
                 "--set", "scene.point_count=30"]) == 0
    capsys.readouterr()
    assert main(["report", "--run", str(d), "--set", "output.emit_svg=false"]) == 0
    out = capsys.readouterr().out
    assert "warning: no evaluation report" in out
    assert not (d / "trajectories.svg").exists()
    assert (d / "report_summary.csv").exists()

    assert main(["report", "--run", str(d)]) == 0
    assert (d / "trajectories.svg").exists()


def test_report_on_empty_directory(tmp_path, capsys):
    assert main(["report", "--run", str(tmp_path / "empty")]) == 0
    out = capsys.readouterr().out
    assert "warning: no bank" in out
    assert not (tmp_path / "empty" / "report_summary.csv").exists()


def test_retrieve_and_plan_cli(tmp_path, capsys):
    rng = np.random.default_rng(3)
    bank = MemoryBank(tmp_path / "bank")
    bank.append(aimed_trajectory(rng, 2, label="src"), "v0", 1, is_source=True)
    for i in range(4):
        bank.append(aimed_trajectory(rng, 2, label=f"e{i}"), f"v{i + 1}", 1)
    target_path = tmp_path / "target.json"
    save_trajectory(aimed_trajectory(rng, 2, label="tgt"), target_path)

    assert main(["retrieve", "--bank", str(tmp_path / "bank"),
                 "--target", str(target_path), "--k", "5"]) == 0
    out = capsys.readouterr().out
    assert "retrieved 5 of 5 entries for chunk 1" in out
    assert "  1. entry " in out
    assert "(source)" in out

    assert main(["plan", "--bank", str(tmp_path / "bank"),
                 "--target", str(target_path), "--l", "5", "--k", "2"]) == 0
    out = capsys.readouterr().out
    assert "plan: k=2, steps=4" in out
    assert "merge 1: l=5, m=2" in out
    assert "final: l=2" in out
    assert "step 4 [final -> final]" in out


def test_env_config_fallback(tmp_path, monkeypatch):
    cfg = apply_overrides(default_config(), ["shots.frame_count=3"])
    cfg_path = tmp_path / "engine.json"
    save_config(cfg, cfg_path)
    monkeypatch.setenv("ENGINE_CONFIG", str(cfg_path))
    out = tmp_path / "suite"
    assert main(["gen-benchmark", "--out", str(out)]) == 0
    assert len(load_trajectory(out / SHOT_FILES[0])) == 3


def test_exit_codes(tmp_path, capsys):
    assert main(["gen-benchmark", "--set", "nosuch.key=1", "--out", str(tmp_path)]) == 4
    assert "configuration error" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{oops", encoding="utf-8")
    assert main(["gen-benchmark", "--config", str(bad), "--out", str(tmp_path)]) == 4

    missing = tmp_path / "missing.json"
    assert main(["gen-benchmark", "--base", str(missing), "--out", str(tmp_path)]) == 3
    assert "I/O error" in capsys.readouterr().err

    assert main(["simulate", "--out", str(tmp_path / "s"), "--frames", "1"]) == 2
    assert main(["simulate", "--out", str(tmp_path / "s2"), "--frames", "5",
                 "--shots", "13"]) == 2
    assert main(["retrieve", "--bank", str(tmp_path / "nobank"),
                 "--target", str(missing)]) == 2
