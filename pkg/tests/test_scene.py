"""Synthetic point scenes, the splat renderer, and the visibility oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from covis import (
    CameraIntrinsics,
    CameraPose,
    DomainError,
    FrameSequence,
    SceneModel,
    Trajectory,
    covisible_fraction,
    load_frames,
    make_scene,
    render,
    save_frames,
)
from covis.scene import BACKGROUND_ID, BACKGROUND_RGB
from helpers import aimed_trajectory, random_rotation, transform_trajectory

INTR = CameraIntrinsics.from_fov(math.pi / 2, math.pi / 3, 16, 12)
IDENTITY_TRAJ = Trajectory.from_poses([CameraPose.identity()], INTR, label="cam")


def manual_scene(positions, ids=None, velocities=None) -> SceneModel:
    pos = np.asarray(positions, dtype=np.float64)
    n = pos.shape[0]
    ids = np.arange(1, n + 1, dtype=np.int32) if ids is None else np.asarray(ids, np.int32)
    vel = np.zeros((n, 3)) if velocities is None else np.asarray(velocities, np.float64)
    colors = np.stack([ids % 256, (ids * 7) % 256, (ids * 13) % 256], axis=1).astype(np.uint8)
    return SceneModel(ids=ids, positions=pos, colors=colors, velocities=vel, seed=0)


def test_make_scene_deterministic():
    a = make_scene(7, point_count=50)
    b = make_scene(7, point_count=50)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.colors, b.colors)
    assert np.array_equal(a.ids, b.ids)
    assert a.scene_key == b.scene_key
    c = make_scene(8, point_count=50)
    assert not np.array_equal(a.positions, c.positions)
    assert a.scene_key != c.scene_key


def test_make_scene_geometry_and_ids():
    scene = make_scene(0, point_count=1000, extent=10.0)
    assert scene.point_count == 1000
    assert np.array_equal(scene.ids, np.arange(1, 1001, dtype=np.int32))
    center = np.array([0.0, 0.0, 5.0])
    assert (np.abs(scene.positions - center) <= 5.0).all()
    assert not scene.velocities.any()


def test_make_scene_moving_fraction():
    scene = make_scene(3, point_count=100, moving_fraction=0.25, velocity_scale=0.02)
    moving = np.any(scene.velocities != 0.0, axis=1)
    assert int(moving.sum()) == 25
    assert (np.abs(scene.velocities) <= 0.02).all()
    assert np.array_equal(scene.positions_at(0), scene.positions)
    shifted = scene.positions_at(3)
    assert np.allclose(shifted, scene.positions + 3.0 * scene.velocities)


def test_make_scene_validation():
    with pytest.raises(DomainError):
        make_scene(0, point_count=0)
    with pytest.raises(DomainError):
        make_scene(0, extent=0.0)
    with pytest.raises(DomainError):
        make_scene(0, moving_fraction=1.5)


def test_scene_model_validation():
    with pytest.raises(DomainError):
        manual_scene(np.zeros((0, 3)))
    with pytest.raises(DomainError):
        manual_scene([[0.0, 0.0, 5.0]], ids=[0])  # background id reserved
    with pytest.raises(DomainError):
        manual_scene([[0.0, 0.0, 5.0]] * 2, ids=[3, 3])
    with pytest.raises(DomainError):
        manual_scene([[0.0, 0.0, np.inf]])
    with pytest.raises(DomainError):
        SceneModel(
            ids=np.array([1], np.int32), positions=np.zeros((2, 3)),
            colors=np.zeros((1, 3), np.uint8), velocities=np.zeros((1, 3)), seed=0,
        )
    scene = manual_scene([[0.0, 0.0, 5.0]])
    with pytest.raises(ValueError):
        scene.positions[0, 0] = 1.0  # arrays are frozen


def test_scene_key_tracks_content():
    base = manual_scene([[0.0, 0.0, 5.0], [1.0, 0.0, 5.0]])
    same = manual_scene([[0.0, 0.0, 5.0], [1.0, 0.0, 5.0]])
    moved = manual_scene([[0.0, 0.0, 5.0], [1.0, 0.0, 5.01]])
    assert base.scene_key.startswith("scene-")
    assert base.scene_key == same.scene_key
    assert base.scene_key != moved.scene_key


def test_render_on_axis_point():
    scene = manual_scene([[0.0, 0.0, 5.0]])
    seq = render(scene, IDENTITY_TRAJ)
    assert seq.scene_key == scene.scene_key
    u = int(INTR.cx)  # on-axis projection lands at the principal point
    v = int(INTR.cy)
    assert seq.id_map[0, v, u] == 1
    assert np.array_equal(seq.frames[0, v, u], scene.colors[0])
    hit = seq.id_map[0] != BACKGROUND_ID
    assert int(hit.sum()) == 1
    assert (seq.frames[0][~hit] == BACKGROUND_RGB[0]).all()


def test_render_depth_buffer_prefers_near():
    # both points sit on the optical axis; depths 7 and 3
    scene = manual_scene([[0.0, 0.0, 7.0], [0.0, 0.0, 3.0]])
    seq = render(scene, IDENTITY_TRAJ)
    assert seq.id_map[0, int(INTR.cy), int(INTR.cx)] == 2


def test_render_depth_tie_prefers_smallest_id():
    scene = manual_scene([[0.0, 0.0, 5.0]] * 2, ids=[9, 4])
    seq = render(scene, IDENTITY_TRAJ)
    assert seq.id_map[0, int(INTR.cy), int(INTR.cx)] == 4


def test_render_skips_behind_and_outside():
    scene = manual_scene([[0.0, 0.0, -5.0], [0.0, 0.0, 0.0], [100.0, 0.0, 5.0]])
    seq = render(scene, IDENTITY_TRAJ)
    assert not seq.id_map.any()
    assert (seq.frames == BACKGROUND_RGB[0]).all()


def test_render_is_bit_identical():
    scene = make_scene(11, point_count=200)
    traj = aimed_trajectory(np.random.default_rng(2), frame_count=3, width=24, height=18)
    a = render(scene, traj)
    b = render(scene, traj)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(a.id_map, b.id_map)


def test_render_moving_point_advances():
    # 1 world unit per frame at depth 5 is fx / 5 = 1.6 pixels per frame
    scene = manual_scene([[0.0, 0.0, 5.0]], velocities=[[1.0, 0.0, 0.0]])
    traj = Trajectory.from_poses([CameraPose.identity()] * 3, INTR)
    seq = render(scene, traj)
    cols = [int(np.argwhere(seq.id_map[f])[0][1]) for f in range(3)]
    assert cols[0] == int(INTR.cx)
    assert cols[0] < cols[1] < cols[2]


def test_render_matches_bruteforce_depth_oracle():
    scene = make_scene(5, point_count=120, extent=8.0)
    pose = CameraPose.identity()
    intr = CameraIntrinsics(fx=3.0, fy=3.0, cx=3.0, cy=2.5, width=6, height=5)
    seq = render(scene, Trajectory.from_poses([pose], intr))

    best: dict[tuple[int, int], tuple[float, int]] = {}
    for pid, p in zip(scene.ids, scene.positions):
        x, y, z = p
        if z <= 0.0:
            continue
        u = intr.fx * x / z + intr.cx
        v = intr.fy * y / z + intr.cy
        px, py = math.floor(u), math.floor(v)
        if 0 <= px < intr.width and 0 <= py < intr.height:
            key = (py, px)
            if key not in best or (z, int(pid)) < best[key]:
                best[key] = (z, int(pid))
    expect = np.zeros((intr.height, intr.width), dtype=np.int32)
    for (py, px), (_, pid) in best.items():
        expect[py, px] = pid
    assert np.array_equal(seq.id_map[0], expect)


def test_render_id_color_consistency():
    scene = make_scene(21, point_count=400)
    traj = aimed_trajectory(np.random.default_rng(4), frame_count=2, width=32, height=24)
    seq = render(scene, traj)
    for pid in np.unique(seq.id_map):
        if pid == BACKGROUND_ID:
            continue
        pix = seq.frames[seq.id_map == pid]
        assert (pix == scene.colors[int(pid) - 1]).all()


def test_frame_sequence_validation():
    with pytest.raises(DomainError):
        FrameSequence(
            frames=np.zeros((2, 12, 16, 3), np.uint8),
            id_map=np.zeros((2, 12, 16), np.int32),
            trajectory=IDENTITY_TRAJ,  # only 1 frame
        )
    with pytest.raises(DomainError):
        FrameSequence(
            frames=np.zeros((1, 12, 16, 3), np.uint8),
            id_map=np.zeros((1, 16, 12), np.int32),
            trajectory=IDENTITY_TRAJ,
        )


def test_covisible_fraction_identity_and_disjoint():
    scene = make_scene(0, point_count=300)
    a = Trajectory.from_poses([CameraPose.identity()] * 2, INTR)
    assert covisible_fraction(scene, a, a) == 1.0
    opposed = CameraPose(rotation=np.diag([-1.0, 1.0, -1.0]),
                         translation=np.array([0.0, 0.0, -25.0]))
    b = Trajectory.from_poses([opposed] * 2, INTR)
    assert covisible_fraction(scene, a, b) == 0.0
    with pytest.raises(DomainError):
        covisible_fraction(scene, a, Trajectory.from_poses([CameraPose.identity()], INTR))


def test_covisible_fraction_far_limit():
    # single point at depth 5: visible at far 10, gone below far 5
    scene = manual_scene([[0.0, 0.0, 5.0]])
    a = IDENTITY_TRAJ
    assert covisible_fraction(scene, a, a, far=10.0) == 1.0
    assert covisible_fraction(scene, a, a, far=4.9) == 0.0


def test_covisible_fraction_symmetric():
    rng = np.random.default_rng(17)
    scene = make_scene(17, point_count=250)
    a = aimed_trajectory(rng, frame_count=3)
    b = aimed_trajectory(rng, frame_count=3)
    ab = covisible_fraction(scene, a, b)
    assert ab == covisible_fraction(scene, b, a)
    assert 0.0 <= ab <= 1.0


def test_covisible_fraction_rigid_invariant():
    # moving scene and both trajectories by one rigid transform preserves it
    rng = np.random.default_rng(29)
    scene = make_scene(29, point_count=250)
    a = aimed_trajectory(rng, frame_count=2)
    b = aimed_trajectory(rng, frame_count=2)
    q = random_rotation(rng)
    t = rng.uniform(-4.0, 4.0, size=3)
    moved = SceneModel(
        ids=scene.ids,
        positions=scene.positions @ q.T + t,
        colors=scene.colors,
        velocities=scene.velocities @ q.T,
        seed=scene.seed,
    )
    before = covisible_fraction(scene, a, b)
    after = covisible_fraction(moved, transform_trajectory(a, q, t), transform_trajectory(b, q, t))
    assert before == after
    assert before > 0.0


def test_save_load_frames_round_trip(tmp_path):
    scene = make_scene(9, point_count=150)
    traj = aimed_trajectory(np.random.default_rng(9), frame_count=2, width=20, height=14)
    seq = render(scene, traj)
    save_frames(seq, tmp_path / "seq")
    back = load_frames(tmp_path / "seq")
    assert np.array_equal(back.frames, seq.frames)
    assert np.array_equal(back.id_map, seq.id_map)
    assert back.scene_key == seq.scene_key
    assert len(back.trajectory) == len(seq.trajectory)
    for (pa, ia), (pb, ib) in zip(back.trajectory.frames, seq.trajectory.frames):
        assert np.array_equal(pa.rotation, pb.rotation)
        assert np.array_equal(pa.translation, pb.translation)
        assert ia == ib

    save_frames(seq, tmp_path / "again")
    for name in ("manifest.json", "trajectory.json", "frame_0000.rgb", "frame_0000.ids"):
        assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_load_frames_rejects_corrupt_data(tmp_path):
    scene = manual_scene([[0.0, 0.0, 5.0]])
    seq = render(scene, IDENTITY_TRAJ)
    save_frames(seq, tmp_path / "seq")
    (tmp_path / "seq" / "frame_0000.ids").write_bytes(b"\x00" * 7)
    with pytest.raises(DomainError):
        load_frames(tmp_path / "seq")
    (tmp_path / "seq" / "manifest.json").write_text("{broken", encoding="utf-8")
    with pytest.raises(DomainError):
        load_frames(tmp_path / "seq")
