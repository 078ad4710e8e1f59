"""Evaluation metrics: AP/mAP, detection accuracy, lane accuracy,
classification accuracy, CLEAR-MOT tracking metrics, and the stage
timing report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .schema import (
    AnnotationDocument,
    BBox,
    OBJECT_TYPES,
    NON_DESCRIPT,
    record_lane,
)


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float


@dataclass(frozen=True)
class ScoredBox:
    frame: int
    bbox: BBox
    score: float = 1.0


@dataclass(frozen=True)
class GtBox:
    frame: int
    bbox: BBox


# ---------------------------------------------------------------------------
# Average precision


def average_precision(
    preds: list[ScoredBox],
    gts: list[GtBox],
    iou_thr: float = 0.5,
    interpolation: str = "all_point",
) -> tuple[float | None, list[PRPoint]]:
    """Single-class AP in [0, 100] plus the PR curve.

    Greedy matching in descending score order; each GT matched at most
    once at IoU >= iou_thr.  Returns (None, []) when the class has
    neither predictions nor ground truth ("n/a").
    """
    if not gts and not preds:
        return None, []
    if not gts:
        return 0.0, []
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    matched: set[int] = set()
    gt_by_frame: dict[int, list[int]] = {}
    for gi, gt in enumerate(gts):
        gt_by_frame.setdefault(gt.frame, []).append(gi)

    tp = np.zeros(len(order))
    for rank, pi in enumerate(order):
        pred = preds[pi]
        best_iou, best_gi = 0.0, None
        for gi in gt_by_frame.get(pred.frame, []):
            if gi in matched:
                continue
            iou = pred.bbox.iou(gts[gi].bbox)
            if iou > best_iou:
                best_iou, best_gi = iou, gi
        if best_gi is not None and best_iou >= iou_thr:
            matched.add(best_gi)
            tp[rank] = 1.0

    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(order) + 1)
    recalls = cum_tp / len(gts)
    precisions = cum_tp / ranks
    curve = [PRPoint(float(r), float(p)) for r, p in zip(recalls, precisions)]

    if len(order) == 0:
        return 0.0, []

    if interpolation == "eleven_point":
        ap = 0.0
        for t in np.linspace(0.0, 1.0, 11):
            mask = recalls >= t
            ap += float(precisions[mask].max()) if mask.any() else 0.0
        return 100.0 * ap / 11.0, curve

    # all-point interpolation: area under the precision envelope
    r = np.concatenate([[0.0], recalls, [recalls[-1]]])
    p = np.concatenate([[0.0], precisions, [0.0]])
    for i in range(len(p) - 2, -1, -1):
        p[i] = max(p[i], p[i + 1])
    ap = float(np.sum((r[1:] - r[:-1]) * p[1:]))
    return 100.0 * ap, curve


def mean_ap(per_class_ap: dict[str, float | None] | list[float]) -> float:
    """Unweighted mean over classes with a defined AP."""
    values = per_class_ap if isinstance(per_class_ap, list) else [
        v for v in per_class_ap.values()
    ]
    defined = [v for v in values if v is not None]
    if not defined:
        raise MetricsError("no class has a defined AP")
    return float(np.mean(defined))


def mean_over_classes(values: dict[str, float | None] | list[float]) -> float:
    return mean_ap(values)


# ---------------------------------------------------------------------------
# Detection accuracy


@dataclass(frozen=True)
class LabeledBox:
    frame: int
    cls: str
    bbox: BBox
    score: float = 1.0


def _match_frames(
    preds: list[LabeledBox], gts: list[LabeledBox], iou_thr: float
) -> list[tuple[int, int, float]]:
    """Per-frame Hungarian matching on IoU (class-agnostic); returns
    (pred_index, gt_index, iou) triples with iou >= iou_thr."""
    by_frame_p: dict[int, list[int]] = {}
    by_frame_g: dict[int, list[int]] = {}
    for i, p in enumerate(preds):
        by_frame_p.setdefault(p.frame, []).append(i)
    for i, g in enumerate(gts):
        by_frame_g.setdefault(g.frame, []).append(i)
    out = []
    for frame in sorted(by_frame_g.keys() | by_frame_p.keys()):
        pi = by_frame_p.get(frame, [])
        gi = by_frame_g.get(frame, [])
        if not pi or not gi:
            continue
        ious = np.zeros((len(pi), len(gi)))
        for a, ip in enumerate(pi):
            for b, ig in enumerate(gi):
                ious[a, b] = preds[ip].bbox.iou(gts[ig].bbox)
        rows, cols = linear_sum_assignment(1.0 - ious)
        for r, c in zip(rows, cols):
            if ious[r, c] >= iou_thr:
                out.append((pi[r], gi[c], float(ious[r, c])))
    return out


def detection_accuracy(
    preds: list[LabeledBox],
    gts: list[LabeledBox],
    iou_thr: float = 0.5,
) -> tuple[dict[str, float | None], float]:
    """Per class: share of GT objects matched at IoU >= thr with the
    correct class label; mean is unweighted over classes with GT."""
    matches = _match_frames(preds, gts, iou_thr)
    correct_gt: set[int] = {
        ig for ip, ig, _ in matches if preds[ip].cls == gts[ig].cls
    }
    classes = [c for c in OBJECT_TYPES if c != NON_DESCRIPT]
    per_class: dict[str, float | None] = {}
    for cls in classes:
        idx = [i for i, g in enumerate(gts) if g.cls == cls]
        if not idx:
            per_class[cls] = None
            continue
        per_class[cls] = 100.0 * sum(1 for i in idx if i in correct_gt) / len(idx)
    return per_class, mean_over_classes(per_class)


# ---------------------------------------------------------------------------
# Lane accuracy


def lane_accuracy_from_counts(correct: int, total: int) -> float:
    if total <= 0:
        raise MetricsError("lane accuracy undefined for zero GT objects")
    return 100.0 * correct / total


def lane_accuracy(
    pred_doc: AnnotationDocument,
    gt_doc: AnnotationDocument,
    iou_thr: float = 0.5,
) -> float:
    """Share of GT objects whose IoU-matched prediction carries the same
    lane id; undetected GT objects count as wrong."""
    preds, gts = [], []
    pred_lane, gt_lane = [], []
    for frame in pred_doc.frames:
        for rec in frame.records:
            preds.append(LabeledBox(frame.index, rec.object_type, rec.bbox))
            pred_lane.append(record_lane(rec))
    total = 0
    for frame in gt_doc.frames:
        for rec in frame.records:
            gts.append(LabeledBox(frame.index, rec.object_type, rec.bbox))
            gt_lane.append(record_lane(rec))
            total += 1
    if total == 0:
        raise MetricsError("lane accuracy undefined for empty GT")
    correct = sum(
        1 for ip, ig, _ in _match_frames(preds, gts, iou_thr)
        if pred_lane[ip] == gt_lane[ig]
    )
    return lane_accuracy_from_counts(correct, total)


# ---------------------------------------------------------------------------
# CLEAR-MOT


@dataclass
class MotCounts:
    gt_total: int = 0
    fn: int = 0
    fp: int = 0
    idsw: int = 0
    match_iou_sum: float = 0.0
    match_count: int = 0


TrackedFrames = dict[int, list[tuple[int, BBox]]]  # frame -> [(track_id, bbox)]


def mot_metrics(
    pred: TrackedFrames,
    gt: TrackedFrames,
    iou_thr: float = 0.5,
) -> tuple[float | None, float | None, float, float, MotCounts]:
    """MOTA, MOTP, MT, ML (all percentages) plus the raw event counts.

    Correspondences persist from the previous frame while IoU stays above
    the threshold; the remainder is matched by Hungarian on IoU.
    """
    frames = sorted(gt.keys() | pred.keys())
    counts = MotCounts()
    last_match: dict[int, int] = {}        # gt id -> last matched pred id
    active: dict[int, int] = {}            # correspondences from previous frame
    gt_frames: dict[int, int] = {}         # gt id -> lifespan frames
    gt_matched_frames: dict[int, int] = {}

    for frame in frames:
        gt_objs = gt.get(frame, [])
        pred_objs = pred.get(frame, [])
        gt_ids = [g for g, _ in gt_objs]
        pred_ids = [p for p, _ in pred_objs]
        gt_box = {g: b for g, b in gt_objs}
        pred_box = {p: b for p, b in pred_objs}
        for g in gt_ids:
            gt_frames[g] = gt_frames.get(g, 0) + 1
        counts.gt_total += len(gt_ids)

        matches: dict[int, int] = {}
        for g, p in active.items():
            if g in gt_box and p in pred_box and gt_box[g].iou(pred_box[p]) >= iou_thr:
                matches[g] = p

        free_g = [g for g in gt_ids if g not in matches]
        used_p = set(matches.values())
        free_p = [p for p in pred_ids if p not in used_p]
        if free_g and free_p:
            ious = np.zeros((len(free_g), len(free_p)))
            for a, g in enumerate(free_g):
                for b, p in enumerate(free_p):
                    ious[a, b] = gt_box[g].iou(pred_box[p])
            rows, cols = linear_sum_assignment(1.0 - ious)
            for r, c in zip(rows, cols):
                if ious[r, c] >= iou_thr:
                    matches[free_g[r]] = free_p[c]

        for g, p in matches.items():
            if g in last_match and last_match[g] != p:
                counts.idsw += 1
            last_match[g] = p
            counts.match_iou_sum += gt_box[g].iou(pred_box[p])
            counts.match_count += 1
            gt_matched_frames[g] = gt_matched_frames.get(g, 0) + 1

        counts.fn += len(gt_ids) - len(matches)
        counts.fp += len(pred_ids) - len(matches)
        active = matches

    mota = None
    if counts.gt_total > 0:
        mota = 100.0 * (
            1.0 - (counts.fn + counts.fp + counts.idsw) / counts.gt_total
        )
    motp = None
    if counts.match_count > 0:
        motp = 100.0 * counts.match_iou_sum / counts.match_count

    n_traj = len(gt_frames)
    mt = ml = 0.0
    if n_traj > 0:
        ratios = {
            g: gt_matched_frames.get(g, 0) / n for g, n in gt_frames.items()
        }
        mt = 100.0 * sum(1 for r in ratios.values() if r >= 0.8) / n_traj
        ml = 100.0 * sum(1 for r in ratios.values() if r <= 0.2) / n_traj
    return mota, motp, mt, ml, counts


def document_tracks(doc: AnnotationDocument) -> TrackedFrames:
    out: TrackedFrames = {}
    for frame in doc.frames:
        out[frame.index] = [(rec.track_id, rec.bbox) for rec in frame.records]
    return out


# ---------------------------------------------------------------------------
# Classification accuracy


def classification_accuracy(pred_labels: list, gt_labels: list) -> float:
    if len(pred_labels) != len(gt_labels):
        raise MetricsError(
            f"label list length mismatch: {len(pred_labels)} vs {len(gt_labels)}"
        )
    if not gt_labels:
        raise MetricsError("classification accuracy undefined for empty lists")
    hits = sum(1 for p, g in zip(pred_labels, gt_labels) if p == g)
    return 100.0 * hits / len(gt_labels)


# ---------------------------------------------------------------------------
# Timing


TIMING_STAGES = ("detection-ingest", "classification", "lane", "tracking")


@dataclass
class TimingTable:
    """Per-stage wall-clock durations in seconds."""

    durations: dict[str, float] = field(default_factory=dict)

    def add(self, stage: str, seconds: float) -> None:
        if stage not in TIMING_STAGES:
            raise MetricsError(f"unknown timing stage {stage!r}")
        self.durations[stage] = self.durations.get(stage, 0.0) + seconds

    def total(self) -> float:
        missing = [s for s in TIMING_STAGES if s not in self.durations]
        if missing:
            raise MetricsError(f"missing timing stage(s): {missing}")
        return sum(self.durations[s] for s in TIMING_STAGES)


def timing_report(table: TimingTable) -> str:
    """Human-readable stage timing table with an exact-sum total line."""
    total = table.total()
    lines = ["Stage timing"]
    for stage in TIMING_STAGES:
        lines.append(f"  {stage:<18} {table.durations[stage]:10.2f} s")
    lines.append(f"  {'total':<18} {total:10.2f} s")
    lines.append("  (total is the exact sum of the stage durations)")
    return "\n".join(lines)
