"""Multi-object tracking: constant-velocity Kalman filter plus Hungarian
IoU association, producing the persistent track IDs annotation needs.

State vector is (cx, cy, s, r, vcx, vcy, vs): box center, area, aspect
ratio and their velocities (aspect ratio held constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ingest import Detection
from .schema import BBox, LaneId


class TrackerError(RuntimeError):
    pass


TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DELETED = "deleted"


def bbox_to_z(b: BBox) -> np.ndarray:
    w, h = b.width, b.height
    return np.array([b.minx + w / 2, b.miny + h / 2, w * h, w / h], dtype=float)


def z_to_bbox(z: np.ndarray) -> BBox:
    cx, cy, s, r = z[:4]
    w = float(np.sqrt(max(s * r, 1e-12)))
    h = float(s / w) if w > 0 else 0.0
    return BBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.eye(4, 7)


@dataclass
class KalmanState:
    mean: np.ndarray       # shape (7,)
    covariance: np.ndarray  # shape (7, 7)


def initial_state(b: BBox) -> KalmanState:
    z = bbox_to_z(b)
    mean = np.zeros(7)
    mean[:4] = z
    w, h, s = b.width, b.height, b.area
    pos = [(w / 2) ** 2, (h / 2) ** 2, (s / 2) ** 2, 1e-2]
    vel = [(10 * w) ** 2, (10 * h) ** 2, (10 * s) ** 2]
    return KalmanState(mean=mean, covariance=np.diag(pos + vel))


def _process_noise(state: KalmanState) -> np.ndarray:
    _, _, s, r = state.mean[:4]
    w = float(np.sqrt(max(abs(s * r), 1.0)))
    h = float(abs(s) / w) if w > 0 else 1.0
    q = [
        (0.05 * w) ** 2, (0.05 * h) ** 2, (0.05 * abs(s)) ** 2, 1e-6,
        (0.0625 * w) ** 2, (0.0625 * h) ** 2, (0.0625 * abs(s)) ** 2,
    ]
    return np.diag(q)


def _measurement_noise(z: np.ndarray) -> np.ndarray:
    s, r = abs(z[2]), abs(z[3])
    w = float(np.sqrt(max(s * r, 1.0)))
    h = float(s / w) if w > 0 else 1.0
    return np.diag([(0.05 * w) ** 2, (0.05 * h) ** 2, (0.05 * s) ** 2, 1e-2])


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def kalman_predict(state: KalmanState) -> KalmanState:
    """Advance one step under the constant-velocity model."""
    with np.errstate(invalid="ignore"):
        mean = _F @ state.mean
        cov = _symmetrize(_F @ state.covariance @ _F.T + _process_noise(state))
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise TrackerError("numerical blowup")
    return KalmanState(mean=mean, covariance=cov)


def kalman_update(state: KalmanState, measurement: BBox) -> KalmanState:
    """Standard Kalman correction against a measured bbox."""
    z = bbox_to_z(measurement)
    r_mat = _measurement_noise(z)
    innovation = z - _H @ state.mean
    s_mat = _H @ state.covariance @ _H.T + r_mat
    try:
        gain = state.covariance @ _H.T @ np.linalg.inv(s_mat)
    except np.linalg.LinAlgError as exc:
        raise TrackerError("degenerate measurement") from exc
    mean = state.mean + gain @ innovation
    cov = _symmetrize((np.eye(7) - gain @ _H) @ state.covariance)
    return KalmanState(mean=mean, covariance=cov)


# ---------------------------------------------------------------------------
# Association


def iou_matrix(tracks_boxes: list[BBox], det_boxes: list[BBox]) -> np.ndarray:
    mat = np.zeros((len(tracks_boxes), len(det_boxes)))
    for i, tb in enumerate(tracks_boxes):
        for j, db in enumerate(det_boxes):
            mat[i, j] = tb.iou(db)
    return mat


def associate(
    predicted_boxes: list[BBox],
    det_boxes: list[BBox],
    iou_gate: float = 0.3,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Minimum-cost assignment (cost = 1 - IoU) via the Hungarian
    algorithm, then drop pairs below the IoU gate."""
    if not predicted_boxes or not det_boxes:
        return [], list(range(len(predicted_boxes))), list(range(len(det_boxes)))
    ious = iou_matrix(predicted_boxes, det_boxes)
    rows, cols = linear_sum_assignment(1.0 - ious)
    matches = []
    matched_t, matched_d = set(), set()
    for r, c in zip(rows, cols):
        if ious[r, c] >= iou_gate:
            matches.append((int(r), int(c)))
            matched_t.add(int(r))
            matched_d.add(int(c))
    unmatched_tracks = [i for i in range(len(predicted_boxes)) if i not in matched_t]
    unmatched_dets = [j for j in range(len(det_boxes)) if j not in matched_d]
    return matches, unmatched_tracks, unmatched_dets


# ---------------------------------------------------------------------------
# Track bookkeeping


@dataclass
class Track:
    id: int
    state: KalmanState
    status: str = TENTATIVE
    hits: int = 1
    misses: int = 0
    bbox_history: list[tuple[int, BBox]] = field(default_factory=list)
    lane_history: list[LaneId] = field(default_factory=list)
    class_counts: dict[str, int] = field(default_factory=dict)
    last_ped_direction: str = "SS"

    @property
    def last_class(self) -> str:
        # majority vote; ties go to the class seen first
        best, best_count = None, -1
        for cls, count in self.class_counts.items():
            if count > best_count:
                best, best_count = cls, count
        return best or "non-descript"

    def note_class(self, cls: str) -> None:
        self.class_counts[cls] = self.class_counts.get(cls, 0) + 1

    def prev_bbox(self) -> BBox | None:
        if len(self.bbox_history) >= 2:
            return self.bbox_history[-2][1]
        return None

    def current_bbox(self) -> BBox:
        return self.bbox_history[-1][1]


@dataclass
class TrackerConfig:
    iou_gate: float = 0.3
    max_age: int = 5
    n_init: int = 3


class Tracker:
    """Stateful per-sequence tracker; frames must arrive in order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 0
        self._last_frame: int | None = None

    def step(self, frame_index: int, detections: list[Detection]) -> list[Track]:
        """Advance one frame; returns the confirmed tracks matched to a
        detection this frame (the ones annotation emits)."""
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise TrackerError(
                f"out-of-order frame index {frame_index} after {self._last_frame}"
            )
        self._last_frame = frame_index

        predicted: list[BBox] = []
        live: list[Track] = []
        for track in self.tracks:
            try:
                track.state = kalman_predict(track.state)
                predicted.append(z_to_bbox(track.state.mean))
                live.append(track)
            except TrackerError:
                track.status = DELETED
        self.tracks = live

        det_boxes = [d.bbox for d in detections]
        matches, unmatched_tracks, unmatched_dets = associate(
            predicted, det_boxes, self.config.iou_gate
        )

        emitted: list[Track] = []
        for t_idx, d_idx in sorted(matches):
            track = self.tracks[t_idx]
            det = detections[d_idx]
            track.state = kalman_update(track.state, det.bbox)
            track.hits += 1
            track.misses = 0
            track.bbox_history.append((frame_index, det.bbox))
            track.note_class(det.cls)
            if track.status == TENTATIVE and track.hits >= self.config.n_init:
                track.status = CONFIRMED
            if track.status == CONFIRMED:
                emitted.append(track)

        for t_idx in unmatched_tracks:
            track = self.tracks[t_idx]
            track.misses += 1
            if track.misses > self.config.max_age:
                track.status = DELETED

        for d_idx in unmatched_dets:
            det = detections[d_idx]
            track = Track(id=self._next_id, state=initial_state(det.bbox))
            self._next_id += 1
            track.bbox_history.append((frame_index, det.bbox))
            track.note_class(det.cls)
            self.tracks.append(track)

        self.tracks = [t for t in self.tracks if t.status != DELETED]
        emitted.sort(key=lambda t: t.id)
        return emitted

    def dump(self) -> list[dict]:
        """Debug snapshot for the --dump-tracks CLI flag."""
        return [
            {
                "id": t.id,
                "status": t.status,
                "hits": t.hits,
                "misses": t.misses,
                "class": t.last_class,
                "bbox": t.current_bbox().to_list() if t.bbox_history else None,
            }
            for t in self.tracks
        ]
