"""Deterministic synthetic point scenes and a splat renderer.

This module is the ground-truth side of the package: scenes are clouds of
uniquely id'd colored points (optionally drifting at constant velocity), and
render() produces pixel-exact RGB frames plus per-pixel id maps by splatting
each point into the single pixel its projection lands in, nearest depth
winning. Everything is a pure function of (scene, trajectory), so repeated
renders are bit-identical.

covisible_fraction() is the point-visibility oracle used to validate frustum
retrieval: per frame, the fraction |visible in both| / |visible in either|
with visibility meaning in front of the camera, inside the image bounds, and
within the far limit (default 10, matching the frustum far plane so both
measures cover the same region).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics, CameraPose, Trajectory, load_trajectory, save_trajectory
from .errors import DomainError

BACKGROUND_ID = 0
BACKGROUND_RGB = (128, 128, 128)

# Default scene center: on the reference optical axis at half the far plane.
DEFAULT_SCENE_CENTER = (0.0, 0.0, 5.0)


@dataclass(frozen=True)
class SceneModel:
    """Point scene: parallel arrays of ids (> 0, unique), positions, colors, velocities."""

    ids: np.ndarray         # (N,) int32
    positions: np.ndarray   # (N, 3) float64, position at frame 0
    colors: np.ndarray      # (N, 3) uint8
    velocities: np.ndarray  # (N, 3) float64, world units per frame step
    seed: int

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.int32)
        pos = np.asarray(self.positions, dtype=np.float64)
        col = np.asarray(self.colors, dtype=np.uint8)
        vel = np.asarray(self.velocities, dtype=np.float64)
        n = ids.shape[0]
        if pos.shape != (n, 3) or col.shape != (n, 3) or vel.shape != (n, 3):
            raise DomainError("scene arrays must be parallel: ids (N,), others (N, 3)")
        if n == 0:
            raise DomainError("scene needs at least one point")
        if ids.min() <= BACKGROUND_ID:
            raise DomainError(f"point ids must be > {BACKGROUND_ID}")
        if np.unique(ids).size != n:
            raise DomainError("point ids must be unique")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise DomainError("positions and velocities must be finite")
        for name, arr in (("ids", ids), ("positions", pos), ("colors", col), ("velocities", vel)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def point_count(self) -> int:
        return int(self.ids.shape[0])

    @property
    def scene_key(self) -> str:
        """Content hash identifying the scene (used to reject cross-scene matching)."""
        h = hashlib.sha256()
        for arr in (self.ids, self.positions, self.colors, self.velocities):
            h.update(np.ascontiguousarray(arr).tobytes())
        return "scene-" + h.hexdigest()[:16]

    def positions_at(self, frame: int) -> np.ndarray:
        return self.positions + float(frame) * self.velocities


def make_scene(
    seed: int,
    point_count: int = 1000,
    extent: float = 10.0,
    moving_fraction: float = 0.0,
    center: tuple[float, float, float] = DEFAULT_SCENE_CENTER,
    velocity_scale: float = 0.02,
) -> SceneModel:
    """Uniform random point scene inside a cube of side ``extent`` about ``center``.

    A moving_fraction of points receive constant random velocities with
    components uniform in [-velocity_scale, velocity_scale]. Same seed and
    parameters always produce the identical scene.
    """
    if point_count < 1:
        raise DomainError(f"point_count must be >= 1, got {point_count}")
    if extent <= 0.0:
        raise DomainError(f"extent must be positive, got {extent}")
    if not (0.0 <= moving_fraction <= 1.0):
        raise DomainError(f"moving_fraction must lie in [0, 1], got {moving_fraction}")
    rng = np.random.default_rng(seed)
    positions = np.asarray(center, dtype=np.float64) + (rng.random((point_count, 3)) - 0.5) * extent
    colors = rng.integers(0, 256, size=(point_count, 3), dtype=np.int64).astype(np.uint8)
    velocities = np.zeros((point_count, 3))
    n_moving = int(round(moving_fraction * point_count))
    if n_moving > 0:
        idx = rng.choice(point_count, size=n_moving, replace=False)
        velocities[idx] = rng.uniform(-velocity_scale, velocity_scale, size=(n_moving, 3))
    return SceneModel(
        ids=np.arange(1, point_count + 1, dtype=np.int32),
        positions=positions, colors=colors, velocities=velocities, seed=seed,
    )


@dataclass(frozen=True)
class FrameSequence:
    """Rendered video: RGB frames (F, H, W, 3) uint8 and id maps (F, H, W) int32."""

    frames: np.ndarray
    id_map: np.ndarray
    trajectory: Trajectory
    scene_key: str | None = None

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.uint8)
        ids = np.asarray(self.id_map, dtype=np.int32)
        w, h = self.trajectory.image_size
        f = len(self.trajectory)
        if frames.shape != (f, h, w, 3):
            raise DomainError(f"frames shape {frames.shape} != {(f, h, w, 3)} from trajectory")
        if ids.shape != (f, h, w):
            raise DomainError(f"id map shape {ids.shape} != {(f, h, w)} from trajectory")
        frames = frames.copy()
        ids = ids.copy()
        frames.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "id_map", ids)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])


def _project(
    pts: np.ndarray, pose: CameraPose, intr: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous image coordinates (u, v) and depth for points in front of the camera.

    Returns (u, v, z) with z <= 0 wherever the point is at or behind the
    camera plane; u, v are only meaningful where z > 0.
    """
    local = (pts - pose.translation) @ pose.rotation
    z = local[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * local[:, 0] / z + intr.cx
        v = intr.fy * local[:, 1] / z + intr.cy
    return u, v, z


def render(scene: SceneModel, traj: Trajectory) -> FrameSequence:
    """Render the scene along a trajectory with a 1-pixel splat depth buffer.

    Points at or behind the camera plane and projections outside the image
    are skipped. When several points land in one pixel the nearest depth
    wins; exact depth ties go to the smallest point id. Unhit pixels keep
    the background id 0 and mid-gray color.
    """
    w, h = traj.image_size
    n_frames = len(traj)
    frames = np.full((n_frames, h, w, 3), BACKGROUND_RGB[0], dtype=np.uint8)
    id_map = np.full((n_frames, h, w), BACKGROUND_ID, dtype=np.int32)
    for f, (pose, intr) in enumerate(traj.frames):
        u, v, z = _project(scene.positions_at(f), pose, intr)
        valid = z > 0.0
        ui = np.floor(u[valid]).astype(np.int64)
        vi = np.floor(v[valid]).astype(np.int64)
        inside = (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
        if not inside.any():
            continue
        cand = np.flatnonzero(valid)[inside]
        pix = vi[inside] * w + ui[inside]
        # Sort by pixel, then depth, then id; first record per pixel wins.
        order = np.lexsort((scene.ids[cand], z[cand], pix))
        pix_sorted = pix[order]
        first = np.unique(pix_sorted, return_index=True)[1]
        winners = cand[order[first]]
        id_map[f].reshape(-1)[pix_sorted[first]] = scene.ids[winners]
        frames[f].reshape(-1, 3)[pix_sorted[first]] = scene.colors[winners]
    return FrameSequence(frames=frames, id_map=id_map, trajectory=traj, scene_key=scene.scene_key)


def _visible_mask(
    scene: SceneModel, frame: int, pose: CameraPose, intr: CameraIntrinsics, far: float
) -> np.ndarray:
    u, v, z = _project(scene.positions_at(frame), pose, intr)
    vis = (z > 0.0) & (z <= far)
    vis &= (u >= 0.0) & (u < intr.width) & (v >= 0.0) & (v < intr.height)
    return vis


def covisible_fraction(scene: SceneModel, a: Trajectory, b: Trajectory, far: float = 10.0) -> float:
    """Ground-truth co-visibility of two equal-length trajectories in a scene.

    Per frame: |points visible in both| / |points visible in either|, using
    exact per-point projection visibility (no occlusion) limited to depth
    ``far``; frames where neither camera sees any point contribute 0. The
    result is the mean over frames.
    """
    if len(a) != len(b):
        raise DomainError(f"frame counts differ: {len(a)} vs {len(b)}")
    total = 0.0
    for f in range(len(a)):
        pa, ia = a.frames[f]
        pb, ib = b.frames[f]
        va = _visible_mask(scene, f, pa, ia, far)
        vb = _visible_mask(scene, f, pb, ib, far)
        union = int((va | vb).sum())
        if union:
            total += int((va & vb).sum()) / union
    return total / len(a)


_MANIFEST_NAME = "manifest.json"
_TRAJ_NAME = "trajectory.json"


def save_frames(seq: FrameSequence, directory: str | Path) -> None:
    """Serialize a FrameSequence to a directory.

    Layout: manifest.json, trajectory.json, and per frame i the raw grids
    frame_{i:04d}.rgb (H*W*3 bytes, row-major uint8 RGB) and
    frame_{i:04d}.ids (H*W*4 bytes, row-major little-endian int32).
    Output bytes depend only on the sequence contents.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    w, h = seq.trajectory.image_size
    manifest = {
        "width": w,
        "height": h,
        "frame_count": seq.frame_count,
        "scene_key": seq.scene_key,
        "trajectory": _TRAJ_NAME,
        "rgb_format": "row-major uint8 RGB",
        "id_format": "row-major int32 little-endian",
    }
    (directory / _MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    save_trajectory(seq.trajectory, directory / _TRAJ_NAME)
    for i in range(seq.frame_count):
        (directory / f"frame_{i:04d}.rgb").write_bytes(np.ascontiguousarray(seq.frames[i]).tobytes())
        (directory / f"frame_{i:04d}.ids").write_bytes(
            np.ascontiguousarray(seq.id_map[i].astype("<i4")).tobytes()
        )


def load_frames(directory: str | Path) -> FrameSequence:
    """Load a FrameSequence written by save_frames; exact round trip."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / _MANIFEST_NAME).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DomainError(f"{directory}: invalid frame-sequence manifest ({e})") from e
    w, h, n = int(manifest["width"]), int(manifest["height"]), int(manifest["frame_count"])
    traj = load_trajectory(directory / str(manifest["trajectory"]))
    frames = np.empty((n, h, w, 3), dtype=np.uint8)
    ids = np.empty((n, h, w), dtype=np.int32)
    for i in range(n):
        rgb = (directory / f"frame_{i:04d}.rgb").read_bytes()
        raw = (directory / f"frame_{i:04d}.ids").read_bytes()
        if len(rgb) != h * w * 3 or len(raw) != h * w * 4:
            raise DomainError(f"{directory}: frame {i} has unexpected byte length")
        frames[i] = np.frombuffer(rgb, dtype=np.uint8).reshape(h, w, 3)
        ids[i] = np.frombuffer(raw, dtype="<i4").reshape(h, w).astype(np.int32)
    key = manifest.get("scene_key")
    return FrameSequence(frames=frames, id_map=ids, trajectory=traj, scene_key=key)
