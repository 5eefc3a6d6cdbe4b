"""Pose-error and cross-video synchronization metrics.

Translation error is the sum over frames of squared center distances, after
an optional least-squares scale alignment of the predicted centers:

    s = sum_i <T_pred_i, T_gt_i> / sum_i <T_pred_i, T_pred_i>   (1 if the
    denominator is 0), then TransErr = sum_i ||T_gt_i - s T_pred_i||^2.

Rotation error is the sum over frames of geodesic angles,
arccos((trace(R_gt R_pred^T) - 1) / 2) with the cosine clamped to [-1, 1].

Synchronization between two generated videos of one scene is measured by an
oracle matcher on rendered id maps: a pixel of video a matches (confidence
1.0) iff its point id is visible anywhere in the paired frame of video b.
Matched pixels are those with confidence >= the threshold (inclusive,
default 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .camera import Trajectory
from .errors import DomainError
from .scene import BACKGROUND_ID, FrameSequence
from .trajectory_ops import ShotKind

DEFAULT_MATCH_THRESHOLD = 0.5


def align_scale(gt: np.ndarray, pred: np.ndarray) -> float:
    """Least-squares scale s minimizing sum ||gt - s pred||^2 over 3-vector rows."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.shape != pred.shape or gt.ndim != 2 or gt.shape[1] != 3:
        raise DomainError(f"expected matching (N, 3) arrays, got {gt.shape} and {pred.shape}")
    if gt.shape[0] < 1:
        raise DomainError("need at least one point to align")
    denom = float((pred * pred).sum())
    if denom == 0.0:
        return 1.0
    return float((pred * gt).sum()) / denom


def trans_err(gt: Trajectory, pred: Trajectory, align: bool = False) -> float:
    """Summed squared camera-center error, optionally after scale alignment."""
    if len(gt) != len(pred):
        raise DomainError(f"frame counts differ: {len(gt)} vs {len(pred)}")
    g, p = gt.centers(), pred.centers()
    if align:
        p = align_scale(g, p) * p
    return float(((g - p) ** 2).sum())


def _geodesic_angle(r_gt: np.ndarray, r_pred: np.ndarray) -> float:
    cos = (float(np.trace(r_gt @ r_pred.T)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos)))


def rot_err(gt: Trajectory, pred: Trajectory) -> float:
    """Summed geodesic rotation error in radians."""
    if len(gt) != len(pred):
        raise DomainError(f"frame counts differ: {len(gt)} vs {len(pred)}")
    return sum(
        _geodesic_angle(pg.rotation, pp.rotation)
        for (pg, _), (pp, _) in zip(gt.frames, pred.frames)
    )


@dataclass(frozen=True)
class PoseErrorReport:
    """Summed pose errors plus the applied scale and per-frame breakdown.

    per_frame holds (squared center error, rotation angle) per frame; the
    totals are sums, and the *_mean properties give per-frame averages.
    """

    trans_err: float
    rot_err: float
    scale: float
    per_frame: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.trans_err < 0.0 or self.rot_err < 0.0:
            raise DomainError("pose errors cannot be negative")
        for t, r in self.per_frame:
            if t < 0.0 or not (0.0 <= r <= math.pi + 1e-12):
                raise DomainError("per-frame components out of range")

    @property
    def frame_count(self) -> int:
        return len(self.per_frame)

    @property
    def trans_err_mean(self) -> float:
        return self.trans_err / self.frame_count

    @property
    def rot_err_mean(self) -> float:
        return self.rot_err / self.frame_count


def pose_error_report(gt: Trajectory, pred: Trajectory, align: bool = True) -> PoseErrorReport:
    """Full pose comparison of a predicted trajectory against ground truth."""
    if len(gt) != len(pred):
        raise DomainError(f"frame counts differ: {len(gt)} vs {len(pred)}")
    g, p = gt.centers(), pred.centers()
    scale = align_scale(g, p) if align else 1.0
    diffs = ((g - scale * p) ** 2).sum(axis=1)
    angles = [
        _geodesic_angle(pg.rotation, pp.rotation)
        for (pg, _), (pp, _) in zip(gt.frames, pred.frames)
    ]
    return PoseErrorReport(
        trans_err=float(diffs.sum()),
        rot_err=float(sum(angles)),
        scale=scale,
        per_frame=tuple((float(d), a) for d, a in zip(diffs, angles)),
    )


@dataclass(frozen=True)
class MatchMap:
    """Per-pixel match confidences in [0, 1] with an inclusive threshold."""

    confidences: np.ndarray
    threshold: float = DEFAULT_MATCH_THRESHOLD

    def __post_init__(self) -> None:
        conf = np.asarray(self.confidences, dtype=np.float64)
        if conf.ndim != 2:
            raise DomainError(f"confidences must be (H, W), got shape {conf.shape}")
        if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
            raise DomainError("confidences must lie in [0, 1]")
        if not (0.0 <= self.threshold <= 1.0):
            raise DomainError(f"threshold must lie in [0, 1], got {self.threshold}")
        conf = conf.copy()
        conf.setflags(write=False)
        object.__setattr__(self, "confidences", conf)


def matched_pixels(m: MatchMap) -> int:
    """Number of pixels with confidence >= threshold (ties match)."""
    return int((m.confidences >= m.threshold).sum())


def oracle_match(
    a: FrameSequence,
    b: FrameSequence,
    frame_pairing: Sequence[tuple[int, int]] | None = None,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> list[MatchMap]:
    """Ground-truth matcher over rendered id maps, one MatchMap per frame pair.

    A pixel of ``a`` gets confidence 1.0 iff its (non-background) point id is
    visible anywhere in the paired frame of ``b``; background pixels and
    unseen ids get 0.0. Both sequences must come from the same scene. The
    default pairing is frame i of a with frame i of b.
    """
    if a.scene_key is None or b.scene_key is None or a.scene_key != b.scene_key:
        raise DomainError(
            f"sequences come from different scenes ({a.scene_key!r} vs {b.scene_key!r})"
        )
    if frame_pairing is None:
        if a.frame_count != b.frame_count:
            raise DomainError(
                f"frame counts differ ({a.frame_count} vs {b.frame_count}); "
                "give an explicit frame_pairing"
            )
        frame_pairing = [(i, i) for i in range(a.frame_count)]
    out = []
    for ia, ib in frame_pairing:
        if not (0 <= ia < a.frame_count and 0 <= ib < b.frame_count):
            raise DomainError(f"frame pair ({ia}, {ib}) out of range")
        ids_a = a.id_map[ia]
        visible_b = np.unique(b.id_map[ib])
        visible_b = visible_b[visible_b != BACKGROUND_ID]
        conf = ((ids_a != BACKGROUND_ID) & np.isin(ids_a, visible_b)).astype(np.float64)
        out.append(MatchMap(confidences=conf, threshold=threshold))
    return out


@dataclass(frozen=True)
class SyncRow:
    """Synchronization result for one shot pair."""

    pair: tuple[ShotKind, ShotKind]
    frames: int
    mean_matched_pixels: float

    @property
    def mean_matched_kpx(self) -> float:
        return self.mean_matched_pixels / 1000.0


@dataclass(frozen=True)
class SyncReport:
    rows: tuple[SyncRow, ...]

    @property
    def mean_matched_pixels(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([r.mean_matched_pixels for r in self.rows]))

    @property
    def mean_matched_kpx(self) -> float:
        return self.mean_matched_pixels / 1000.0


def sync_report(
    videos: Mapping[ShotKind, FrameSequence],
    pairs: Sequence[tuple[ShotKind, ShotKind]],
    matcher: Callable[[FrameSequence, FrameSequence], list[MatchMap]] = oracle_match,
) -> SyncReport:
    """Mean matched pixels per shot pair over same-index frames."""
    missing = sorted({k.slug for p in pairs for k in p if k not in videos})
    if missing:
        raise DomainError(f"missing videos for shots: {', '.join(missing)}")
    rows = []
    for p, q in pairs:
        a, b = videos[p], videos[q]
        if a.frame_count != b.frame_count:
            raise DomainError(
                f"pair ({p.slug}, {q.slug}) has unequal frame counts "
                f"({a.frame_count} vs {b.frame_count})"
            )
        maps = matcher(a, b)
        counts = [matched_pixels(m) for m in maps]
        rows.append(SyncRow(
            pair=(p, q), frames=a.frame_count,
            mean_matched_pixels=float(np.mean(counts)),
        ))
    return SyncReport(rows=tuple(rows))
