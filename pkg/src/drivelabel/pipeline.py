"""Per-frame dataflow: ingest -> lanes -> tracking -> movement -> lane
change -> median second pass -> property assembly, with stage timing."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import features
from .ingest import (
    IngestError,
    LaneMask,
    PropertyOracle,
    SceneConfig,
    frame_path,
    lane_mask_path,
    load_detection_manifest,
    load_pgm,
    postprocess_detection,
)
from .lanes import LaneError, assign_lane, build_lane_model, model_dump
from .metrics import (
    TimingTable,
    average_precision,
    classification_accuracy,
    detection_accuracy,
    lane_accuracy,
    mean_ap,
    mot_metrics,
    document_tracks,
    LabeledBox,
    ScoredBox,
    GtBox,
)
from .properties import RuleContext, assemble_record
from .report import MetricsReport
from .schema import (
    AnnotationDocument,
    AnnotationRecord,
    FrameAnnotations,
    NON_DESCRIPT,
    OBJECT_TYPES,
    category,
    parse,
    record_lane,
    validate_document,
)
from .tracker import Tracker, TrackerConfig


class PipelineError(RuntimeError):
    """Internal invariant violation (pipeline bug)."""


class ConfigError(ValueError):
    """Bad or inconsistent pipeline configuration / inputs."""


@dataclass
class Thresholds:
    movement_threshold_px: float = 6.0
    nondescript_px: float = 30.0
    iou_gate: float = 0.3
    fast_threshold: int = 20
    n_init: int = 3
    max_age: int = 5

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ConfigError(f"threshold {name} must be positive")


@dataclass
class PipelineConfig:
    detections: Path
    lane_masks: Path
    frames: Path
    output: Path
    scene: SceneConfig
    oracle: Path | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    ap_interpolation: str = "all_point"
    worker_count: int = 1

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent

        def resolve(key: str) -> Path:
            return (base / raw[key]).resolve()

        try:
            scene_raw = raw["scene"]
            scene = SceneConfig(
                median_present=bool(scene_raw["median_present"]),
                image_width=int(scene_raw["image_width"]),
                image_height=int(scene_raw["image_height"]),
                ego_anchor_x=float(scene_raw.get("ego_anchor_x", -1.0)),
            )
            config = cls(
                detections=resolve("detections"),
                lane_masks=resolve("lane_masks"),
                frames=resolve("frames"),
                output=resolve("output"),
                scene=scene,
                oracle=resolve("oracle") if raw.get("oracle") else None,
                thresholds=Thresholds(**raw.get("thresholds", {})),
                ap_interpolation=raw.get("ap_interpolation", "all_point"),
                worker_count=int(raw.get("worker_count", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        for p in (config.detections, config.lane_masks, config.frames):
            if not Path(p).exists():
                raise ConfigError(f"input path does not exist: {p}")
        return config


@dataclass
class AnnotateResult:
    document: AnnotationDocument
    timing: TimingTable
    lane_dumps: list[dict] = field(default_factory=list)
    track_dumps: list[dict] = field(default_factory=list)


def run_annotate(
    config: PipelineConfig,
    dump_lanes: bool = False,
    dump_tracks: bool = False,
) -> AnnotateResult:
    """Process one sequence end to end; deterministic for fixed inputs."""
    timing = TimingTable()
    for stage in ("detection-ingest", "classification", "lane", "tracking"):
        timing.add(stage, 0.0)

    t0 = time.monotonic()
    manifest = load_detection_manifest(config.detections)
    sequence_id = manifest.sequence_id
    for index, _ in manifest.frames:
        if not frame_path(config.frames, index).exists():
            raise IngestError(f"missing frame image for index {index}")
        if not lane_mask_path(config.lane_masks, index).exists():
            raise IngestError(f"missing lane mask for index {index}")
    timing.add("detection-ingest", time.monotonic() - t0)

    oracle = PropertyOracle.load(config.oracle) if config.oracle else PropertyOracle.empty()
    tracker = Tracker(
        TrackerConfig(
            iou_gate=config.thresholds.iou_gate,
            max_age=config.thresholds.max_age,
            n_init=config.thresholds.n_init,
        )
    )

    frames_out: list[FrameAnnotations] = []
    lane_dumps: list[dict] = []
    track_dumps: list[dict] = []
    prev_image = None

    # each ROI is extracted as "current" in one frame and "previous" in the
    # next; cache per image buffer so it is only computed once
    extract_memo: dict[tuple, tuple] = {}

    def cached_extract(frame_pixels, bbox, fast_threshold):
        key = (id(frame_pixels), tuple(bbox.to_list()), fast_threshold)
        if key not in extract_memo:
            extract_memo[key] = features.extract(frame_pixels, bbox, fast_threshold)
        return extract_memo[key]

    for frame_index, raw_dets in manifest.frames:
        t0 = time.monotonic()
        image = load_pgm(frame_path(config.frames, frame_index))
        detections = [
            postprocess_detection(
                d, config.scene, nondescript_px=config.thresholds.nondescript_px
            )
            for d in raw_dets
        ]
        timing.add("detection-ingest", time.monotonic() - t0)

        t0 = time.monotonic()
        mask = LaneMask(load_pgm(lane_mask_path(config.lane_masks, frame_index)))
        try:
            lane_model = build_lane_model(mask, config.scene)
        except LaneError:
            lane_model = None
        if dump_lanes:
            lane_dumps.append({"frame": frame_index, **model_dump(lane_model)})
        timing.add("lane", time.monotonic() - t0)

        t0 = time.monotonic()
        emitted = tracker.step(frame_index, detections)
        movements: dict[int, str] = {}
        for track in emitted:
            lane = assign_lane(track.current_bbox(), lane_model)
            track.lane_history.append(lane)
            prev_bbox = track.prev_bbox()
            if prev_bbox is None or prev_image is None:
                movements[track.id] = "stationary"  # first observation default
            else:
                movement, _ = features.classify_movement(
                    prev_image.pixels,
                    image.pixels,
                    prev_bbox,
                    track.current_bbox(),
                    lane,
                    threshold_px=config.thresholds.movement_threshold_px,
                    fast_threshold=config.thresholds.fast_threshold,
                    extract_fn=cached_extract,
                )
                movements[track.id] = movement
        if dump_tracks:
            track_dumps.append({"frame": frame_index, "tracks": tracker.dump()})
        timing.add("tracking", time.monotonic() - t0)

        t0 = time.monotonic()
        records: list[AnnotationRecord] = []
        for track in emitted:
            object_type = track.last_class
            ctx = RuleContext(
                track=track,
                lane_model=lane_model,
                movement=movements[track.id],
                scene=config.scene,
                oracle=oracle,
                frame_index=frame_index,
            )
            record = assemble_record(ctx, object_type)
            # median rule second pass: oncoming traffic behind a median
            # cannot be characterized
            if (
                config.scene.median_present
                and record.props is not None
                and getattr(record.props, "direction", None) == "oncoming"
                and category(object_type) in ("vehicle", "two-wheeler")
            ):
                record = assemble_record(ctx, NON_DESCRIPT)
            records.append(record)
        records.sort(key=lambda r: r.track_id)
        frames_out.append(FrameAnnotations(index=frame_index, records=records))
        timing.add("classification", time.monotonic() - t0)
        # keep only the current frame's cache entries; stale ids could be
        # reused by a future image buffer
        current = id(image.pixels)
        extract_memo = {k: v for k, v in extract_memo.items() if k[0] == current}
        prev_image = image

    document = AnnotationDocument(sequence_id=sequence_id, frames=frames_out)
    violations = validate_document(document)
    if violations:
        raise PipelineError("pipeline emitted invalid document: " + "; ".join(violations))
    return AnnotateResult(
        document=document,
        timing=timing,
        lane_dumps=lane_dumps,
        track_dumps=track_dumps,
    )


# ---------------------------------------------------------------------------
# Evaluation

_PROPERTY_NAMES = (
    "occlusion", "bottom_occlusion", "head_occlusion", "feet_occlusion",
    "direction", "movement", "lane_change", "rotation", "pose", "lighting",
    "height", "strange_pose",
)


def run_evaluate(
    pred_doc: AnnotationDocument,
    gt_doc: AnnotationDocument,
    iou_thr: float = 0.5,
    ap_interpolation: str = "all_point",
    timing: TimingTable | None = None,
) -> MetricsReport:
    """Full metrics report comparing a predicted document against GT."""
    report = MetricsReport(timing=timing)

    classes = [c for c in OBJECT_TYPES if c != NON_DESCRIPT]
    preds_by_class: dict[str, list[ScoredBox]] = {c: [] for c in classes}
    gts_by_class: dict[str, list[GtBox]] = {c: [] for c in classes}
    pred_labeled: list[LabeledBox] = []
    gt_labeled: list[LabeledBox] = []
    for frame in pred_doc.frames:
        for rec in frame.records:
            if rec.object_type in preds_by_class:
                preds_by_class[rec.object_type].append(ScoredBox(frame.index, rec.bbox))
            pred_labeled.append(LabeledBox(frame.index, rec.object_type, rec.bbox))
    for frame in gt_doc.frames:
        for rec in frame.records:
            if rec.object_type in gts_by_class:
                gts_by_class[rec.object_type].append(GtBox(frame.index, rec.bbox))
            gt_labeled.append(LabeledBox(frame.index, rec.object_type, rec.bbox))

    for cls in classes:
        ap, curve = average_precision(
            preds_by_class[cls], gts_by_class[cls], iou_thr, ap_interpolation
        )
        report.per_class_ap[cls] = ap
        report.pr_curves[cls] = curve
    defined = [v for v in report.per_class_ap.values() if v is not None]
    report.map = mean_ap(report.per_class_ap) if defined else None

    if gt_labeled:
        report.per_class_accuracy, report.mean_accuracy = detection_accuracy(
            pred_labeled, gt_labeled, iou_thr
        )
        report.lane_accuracy = lane_accuracy(pred_doc, gt_doc, iou_thr)
    elif pred_labeled:
        report.lane_accuracy = None

    mota, motp, mt, ml, _ = mot_metrics(
        document_tracks(pred_doc), document_tracks(gt_doc), iou_thr
    )
    report.mota, report.motp, report.mt, report.ml = mota, motp, mt, ml

    report.property_accuracy = _property_accuracy(pred_doc, gt_doc, iou_thr)
    return report


def _property_accuracy(
    pred_doc: AnnotationDocument, gt_doc: AnnotationDocument, iou_thr: float
) -> dict[str, float | None]:
    from .metrics import _match_frames  # shared frame-wise Hungarian matching

    preds: list[AnnotationRecord] = [
        r for frame in pred_doc.frames for r in frame.records
    ]
    gts: list[AnnotationRecord] = [r for frame in gt_doc.frames for r in frame.records]
    p_boxes = [LabeledBox(r.frame_index, r.object_type, r.bbox) for r in preds]
    g_boxes = [LabeledBox(r.frame_index, r.object_type, r.bbox) for r in gts]
    pairs: dict[str, list[tuple]] = {name: [] for name in _PROPERTY_NAMES}
    pairs["lane"] = []
    for ip, ig, _ in _match_frames(p_boxes, g_boxes, iou_thr):
        p_rec, g_rec = preds[ip], gts[ig]
        if p_rec.props is None or g_rec.props is None:
            continue
        for name in _PROPERTY_NAMES:
            pv = getattr(p_rec.props, name, None)
            gv = getattr(g_rec.props, name, None)
            if pv is not None and gv is not None:
                pairs[name].append((pv, gv))
        pl, gl = record_lane(p_rec), record_lane(g_rec)
        if pl is not None and gl is not None:
            pairs["lane"].append((pl, gl))
    out: dict[str, float | None] = {}
    for name, values in pairs.items():
        if values:
            out[name] = classification_accuracy(
                [p for p, _ in values], [g for _, g in values]
            )
        else:
            out[name] = None
    return out


def annotate_and_write(
    config: PipelineConfig,
    dump_lanes: bool = False,
    dump_tracks: bool = False,
) -> AnnotateResult:
    from .schema import serialize

    result = run_annotate(config, dump_lanes=dump_lanes, dump_tracks=dump_tracks)
    Path(config.output).parent.mkdir(parents=True, exist_ok=True)
    Path(config.output).write_text(serialize(result.document))
    if dump_lanes:
        Path(config.output).with_suffix(".lanes.json").write_text(
            json.dumps(result.lane_dumps, indent=2)
        )
    if dump_tracks:
        Path(config.output).with_suffix(".tracks.json").write_text(
            json.dumps(result.track_dumps, indent=2)
        )
    return result


def evaluate_paths(
    pred_path: str | Path,
    gt_path: str | Path,
    iou_thr: float = 0.5,
    ap_interpolation: str = "all_point",
) -> MetricsReport:
    pred_doc = parse(Path(pred_path).read_text())
    gt_doc = parse(Path(gt_path).read_text())
    return run_evaluate(pred_doc, gt_doc, iou_thr, ap_interpolation)
