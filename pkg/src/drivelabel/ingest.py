"""Input loading and detection post-processing.

Covers the detection manifest, binary PGM frames and lane masks, the
small-object / median re-labeling rules, and the property-oracle sidecar
that stands in for a trained classifier backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .schema import (
    BBox,
    NON_DESCRIPT,
    OBJECT_TYPES,
    category,
)


class IngestError(ValueError):
    """Raised on unreadable or inconsistent input files."""


@dataclass(frozen=True)
class Detection:
    cls: str
    score: float
    bbox: BBox


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image; pixels is a (height, width) uint8 array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise IngestError("pixel buffer does not match declared dimensions")


@dataclass(frozen=True)
class SceneConfig:
    median_present: bool
    image_width: int
    image_height: int
    ego_anchor_x: float = -1.0

    def __post_init__(self):
        if self.ego_anchor_x < 0:
            object.__setattr__(self, "ego_anchor_x", self.image_width / 2.0)
        if not (0 <= self.ego_anchor_x < self.image_width):
            raise IngestError("ego_anchor_x outside image")


# ---------------------------------------------------------------------------
# Detection manifest


def clip_bbox(b: BBox, width: int, height: int) -> BBox:
    return BBox(
        min(max(b.minx, 0.0), float(width)),
        min(max(b.miny, 0.0), float(height)),
        min(max(b.maxx, 0.0), float(width)),
        min(max(b.maxy, 0.0), float(height)),
    )


@dataclass
class DetectionManifest:
    sequence_id: str
    image_width: int
    image_height: int
    frames: list[tuple[int, list[Detection]]] = field(default_factory=list)


def load_detection_manifest(path: str | Path) -> DetectionManifest:
    """Load per-frame detections, clipping bboxes to image bounds and
    dropping detections with zero area after clipping."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"missing file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON in {path}: {exc}") from exc
    try:
        width = int(raw["image_width"])
        height = int(raw["image_height"])
        manifest = DetectionManifest(
            sequence_id=str(raw["sequence_id"]),
            image_width=width,
            image_height=height,
        )
        prev = None
        for frame_raw in raw["frames"]:
            index = int(frame_raw["index"])
            if prev is not None and index <= prev:
                raise IngestError(f"non-monotonic frames at index {index}")
            prev = index
            dets: list[Detection] = []
            for d in frame_raw["detections"]:
                cls = d["class"]
                if cls not in OBJECT_TYPES or cls == NON_DESCRIPT:
                    raise IngestError(f"frame {index}: unknown class {cls!r}")
                score = float(d["score"])
                if not (0.0 <= score <= 1.0):
                    raise IngestError(f"frame {index}: score {score} outside [0,1]")
                bbox = clip_bbox(BBox(*(float(x) for x in d["bbox"])), width, height)
                if bbox.width <= 0 or bbox.height <= 0:
                    continue
                dets.append(Detection(cls=cls, score=score, bbox=bbox))
            manifest.frames.append((index, dets))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IngestError):
            raise
        raise IngestError(f"malformed manifest {path}: {exc}") from exc
    return manifest


# ---------------------------------------------------------------------------
# PGM loading


def load_pgm(path: str | Path) -> GrayImage:
    """Bit-exact binary PGM (P5, maxval 255) reader."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"missing file: {path}")
    data = path.read_bytes()
    if data[:2] == b"P2":
        raise IngestError(f"{path}: unsupported PGM variant (ASCII P2)")
    if data[:2] != b"P5":
        raise IngestError(f"{path}: not a PGM file")

    # Header tokens: magic, width, height, maxval; '#' comments allowed.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise IngestError(f"{path}: truncated header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise IngestError(f"{path}: bad header token") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise IngestError(f"{path}: maxval {maxval} unsupported (expected 255)")
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise IngestError(f"{path}: truncated payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return GrayImage(width=width, height=height, pixels=pixels)


def save_pgm(path: str | Path, image: GrayImage) -> None:
    header = f"P5\n{image.width} {image.height}\n255\n".encode()
    Path(path).write_bytes(header + image.pixels.astype(np.uint8).tobytes())


@dataclass(frozen=True)
class LaneMask:
    """Instance-labeled lane-boundary mask: 0 background, k >= 1 instance k."""

    image: GrayImage

    def instances(self) -> list[int]:
        labels = sorted(int(v) for v in np.unique(self.image.pixels) if v > 0)
        if labels and (labels[0] != 1 or labels != list(range(1, len(labels) + 1))):
            raise IngestError(f"lane instance labels not contiguous: {labels}")
        if len(labels) > 6:
            raise IngestError(f"more than 6 lane instances: {len(labels)}")
        return labels

    def instance_mask(self, label: int) -> np.ndarray:
        return self.image.pixels == label


# ---------------------------------------------------------------------------
# Detection post-processing rules

NONDESCRIPT_PX = 30.0


def postprocess_detection(
    d: Detection,
    cfg: SceneConfig,
    direction_hint: str | None = None,
    nondescript_px: float = NONDESCRIPT_PX,
) -> Detection:
    """Re-label a detection as non-descript when it is too small to
    characterize, or when it travels on the far side of a median.

    The size rule is strict and conjunctive: both width and height must be
    below the threshold.  The median rule needs a direction, so it only
    fires when a direction_hint is supplied (second pass).
    """
    if d.bbox.width < nondescript_px and d.bbox.height < nondescript_px:
        return replace(d, cls=NON_DESCRIPT)
    if (
        cfg.median_present
        and direction_hint == "oncoming"
        and d.cls != NON_DESCRIPT
        and category(d.cls) in ("vehicle", "two-wheeler")
    ):
        return replace(d, cls=NON_DESCRIPT)
    return d


# ---------------------------------------------------------------------------
# Property oracle

BACKEND_PROPERTIES = {
    "vehicle": ("occlusion", "bottom_occlusion", "direction", "pose", "lighting"),
    "two-wheeler": (
        "occlusion", "head_occlusion", "feet_occlusion", "direction", "pose", "lighting",
    ),
    "pedestrian": (
        "occlusion", "head_occlusion", "feet_occlusion", "direction", "height",
        "strange_pose", "lighting",
    ),
}

PROPERTY_DEFAULTS = {
    "occlusion": "none",
    "bottom_occlusion": False,
    "head_occlusion": False,
    "feet_occlusion": False,
    "lighting": "normal",
    "pose": "rear",
    "height": "adult",
    "strange_pose": False,
    "direction": "preceding",
}

ORACLE_MATCH_IOU = 0.5


class PropertyOracle:
    """Ground-truth property sidecar; replaces the classifier backend.

    Lookup matches a query bbox to the frame's GT objects by highest IoU
    (at least 0.5); misses fall back to per-property defaults.
    """

    def __init__(self, frames: dict[int, list[tuple[BBox, dict]]]):
        self._frames = frames

    @classmethod
    def load(cls, path: str | Path) -> "PropertyOracle":
        path = Path(path)
        if not path.exists():
            raise IngestError(f"missing file: {path}")
        try:
            raw = json.loads(path.read_text())
            frames: dict[int, list[tuple[BBox, dict]]] = {}
            for frame_raw in raw["frames"]:
                index = int(frame_raw["index"])
                entries = []
                for obj in frame_raw["objects"]:
                    bbox = BBox(*(float(x) for x in obj["bbox"]))
                    entries.append((bbox, dict(obj["labels"])))
                frames[index] = entries
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise IngestError(f"malformed oracle {path}: {exc}") from exc
        return cls(frames)

    @classmethod
    def empty(cls) -> "PropertyOracle":
        return cls({})

    def lookup(self, frame_index: int, bbox: BBox) -> dict | None:
        best_iou = 0.0
        best: dict | None = None
        for gt_bbox, labels in self._frames.get(frame_index, []):
            iou = bbox.iou(gt_bbox)
            if iou > best_iou:
                best_iou, best = iou, labels
        if best_iou >= ORACLE_MATCH_IOU:
            return best
        return None


def query_property_backend(
    oracle: PropertyOracle,
    frame_index: int,
    bbox: BBox,
    property_name: str,
    object_category: str,
) -> object:
    """Oracle label for (frame, bbox, property), else the documented default."""
    valid = BACKEND_PROPERTIES.get(object_category)
    if valid is None or property_name not in valid:
        raise IngestError(
            f"property {property_name!r} is not a {object_category} property"
        )
    labels = oracle.lookup(frame_index, bbox)
    if labels is not None and property_name in labels:
        return labels[property_name]
    return PROPERTY_DEFAULTS[property_name]


def frame_path(directory: str | Path, index: int) -> Path:
    return Path(directory) / f"frame_{index:06d}.pgm"


def lane_mask_path(directory: str | Path, index: int) -> Path:
    return Path(directory) / f"lane_{index:06d}.pgm"
