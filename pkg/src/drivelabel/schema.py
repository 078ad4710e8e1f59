"""Annotation data model and canonical JSON serialization.

Single source of truth for the property vocabularies: every other stage
imports its enums and validation from here.  The JSON format (schema
version "1.0") is the contract between the pipeline and the review UI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Union

SCHEMA_VERSION = "1.0"

# ---------------------------------------------------------------------------
# Vocabularies

VEHICLE_TYPES = ("car", "bus", "truck", "other-vehicle")
TWO_WHEELER_TYPES = ("mopedist", "motorcyclist", "cyclist", "other-two-wheeler")
PEDESTRIAN_TYPES = ("pedestrian",)
NON_DESCRIPT = "non-descript"
OBJECT_TYPES = VEHICLE_TYPES + TWO_WHEELER_TYPES + PEDESTRIAN_TYPES + (NON_DESCRIPT,)

OCCLUSION_VALUES = ("none", "partial", "full")
DIRECTION_VALUES = ("preceding", "oncoming")
PEDESTRIAN_DIRECTIONS = ("NN", "NE", "NW", "SS", "SE", "SW", "EE", "WW")
MOVEMENT_VALUES = ("moving", "stationary", "parked")
ROTATION_VALUES = ("relevant", "irrelevant")
POSE_VALUES = ("rear", "rearright", "rearleft", "front", "frontright", "frontleft", "side")
LIGHTING_VALUES = ("normal", "unsharp", "glare")
HEIGHT_VALUES = ("adult", "child")

LANE_UNKNOWN = "unknown"
LANE_IDS = (LANE_UNKNOWN, -2, -1, 0, 1, 2)
NUMBERED_LANES = (-2, -1, 0, 1, 2)

LaneId = Union[str, int]  # "unknown" or one of -2..2


def category(object_type: str) -> str:
    """Map an object type onto its property-table category."""
    if object_type in VEHICLE_TYPES:
        return "vehicle"
    if object_type in TWO_WHEELER_TYPES:
        return "two-wheeler"
    if object_type in PEDESTRIAN_TYPES:
        return "pedestrian"
    if object_type == NON_DESCRIPT:
        return "non-descript"
    raise ValueError(f"unknown object type: {object_type!r}")


# ---------------------------------------------------------------------------
# Core types


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in image pixels, origin top-left, x right, y down."""

    minx: float
    miny: float
    maxx: float
    maxy: float

    @property
    def width(self) -> float:
        return self.maxx - self.minx

    @property
    def height(self) -> float:
        return self.maxy - self.miny

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.minx + self.maxx), 0.5 * (self.miny + self.maxy))

    def is_valid(self) -> bool:
        return (
            self.minx < self.maxx
            and self.miny < self.maxy
            and self.minx >= 0
            and self.miny >= 0
        )

    def iou(self, other: "BBox") -> float:
        ix = min(self.maxx, other.maxx) - max(self.minx, other.minx)
        iy = min(self.maxy, other.maxy) - max(self.miny, other.miny)
        if ix <= 0 or iy <= 0:
            return 0.0
        inter = ix * iy
        return inter / (self.area + other.area - inter)

    def to_list(self) -> list[float]:
        return [self.minx, self.miny, self.maxx, self.maxy]


@dataclass(frozen=True)
class VehicleProps:
    occlusion: str
    bottom_occlusion: bool
    direction: str
    movement: str
    lane: LaneId
    lane_change: bool
    rotation: str
    pose: str
    lighting: str
    size: BBox


@dataclass(frozen=True)
class TwoWheelerProps:
    occlusion: str
    head_occlusion: bool
    feet_occlusion: bool
    direction: str
    movement: str
    lane: LaneId
    rotation: str
    pose: str
    lighting: str
    size: BBox


@dataclass(frozen=True)
class PedestrianProps:
    occlusion: str
    head_occlusion: bool
    feet_occlusion: bool
    direction: str
    movement: str
    height: str
    strange_pose: bool
    lighting: str
    size: BBox


Props = Union[VehicleProps, TwoWheelerProps, PedestrianProps, None]

_PROPS_CLASS_FOR_CATEGORY = {
    "vehicle": VehicleProps,
    "two-wheeler": TwoWheelerProps,
    "pedestrian": PedestrianProps,
    "non-descript": type(None),
}


@dataclass(frozen=True)
class AnnotationRecord:
    """One object in one frame: type, bbox, track id and full property set."""

    frame_index: int
    track_id: int
    object_type: str
    bbox: BBox
    props: Props


@dataclass
class FrameAnnotations:
    index: int
    records: list[AnnotationRecord] = field(default_factory=list)


@dataclass
class AnnotationDocument:
    schema_version: str = SCHEMA_VERSION
    sequence_id: str = ""
    frames: list[FrameAnnotations] = field(default_factory=list)


class SchemaError(ValueError):
    """Raised on malformed or out-of-vocabulary annotation JSON."""


# ---------------------------------------------------------------------------
# Validation


def _check_enum(value: Any, allowed: tuple, name: str, out: list[str]) -> None:
    if value not in allowed:
        out.append(f"{name}: {value!r} not in {list(allowed)}")


def _check_bool(value: Any, name: str, out: list[str]) -> None:
    if not isinstance(value, bool):
        out.append(f"{name}: expected bool, got {value!r}")


def validate_record(record: AnnotationRecord) -> list[str]:
    """Return a list of vocabulary/invariant violations; empty means valid."""
    v: list[str] = []
    if record.frame_index < 0:
        v.append("frame_index negative")
    if record.track_id < 0:
        v.append("track_id negative")
    if record.object_type not in OBJECT_TYPES:
        v.append(f"object_type: {record.object_type!r} unknown")
        return v
    if not record.bbox.is_valid():
        v.append("degenerate bbox")

    cat = category(record.object_type)
    expected = _PROPS_CLASS_FOR_CATEGORY[cat]
    if not isinstance(record.props, expected):
        v.append("props variant mismatch")
        return v

    p = record.props
    if p is None:
        return v
    _check_enum(p.occlusion, OCCLUSION_VALUES, "occlusion", v)
    _check_enum(p.movement, MOVEMENT_VALUES, "movement", v)
    _check_enum(p.lighting, LIGHTING_VALUES, "lighting", v)
    if isinstance(p, VehicleProps):
        _check_bool(p.bottom_occlusion, "bottom_occlusion", v)
        _check_enum(p.direction, DIRECTION_VALUES, "direction", v)
        _check_enum(p.lane, LANE_IDS, "lane", v)
        _check_bool(p.lane_change, "lane_change", v)
        _check_enum(p.rotation, ROTATION_VALUES, "rotation", v)
        _check_enum(p.pose, POSE_VALUES, "pose", v)
    elif isinstance(p, TwoWheelerProps):
        _check_bool(p.head_occlusion, "head_occlusion", v)
        _check_bool(p.feet_occlusion, "feet_occlusion", v)
        _check_enum(p.direction, DIRECTION_VALUES, "direction", v)
        _check_enum(p.lane, LANE_IDS, "lane", v)
        _check_enum(p.rotation, ROTATION_VALUES, "rotation", v)
        _check_enum(p.pose, POSE_VALUES, "pose", v)
    elif isinstance(p, PedestrianProps):
        _check_bool(p.head_occlusion, "head_occlusion", v)
        _check_bool(p.feet_occlusion, "feet_occlusion", v)
        _check_enum(p.direction, PEDESTRIAN_DIRECTIONS, "direction", v)
        _check_enum(p.height, HEIGHT_VALUES, "height", v)
        _check_bool(p.strange_pose, "strange_pose", v)
    if p.size != record.bbox:
        v.append("props size differs from record bbox")
    return v


def validate_document(doc: AnnotationDocument) -> list[str]:
    v: list[str] = []
    if doc.schema_version != SCHEMA_VERSION:
        v.append(f"unsupported schema_version {doc.schema_version!r}")
    prev = None
    for frame in doc.frames:
        if prev is not None and frame.index <= prev:
            v.append(f"frame index {frame.index} not strictly increasing")
        prev = frame.index
        seen: set[int] = set()
        for rec in frame.records:
            if rec.frame_index != frame.index:
                v.append(
                    f"frame {frame.index}: record frame_index {rec.frame_index} mismatch"
                )
            if rec.track_id in seen:
                v.append(f"frame {frame.index}: duplicate track_id {rec.track_id}")
            seen.add(rec.track_id)
            for msg in validate_record(rec):
                v.append(f"frame {frame.index} track {rec.track_id}: {msg}")
    return v


# ---------------------------------------------------------------------------
# Serialization

def _round2(x: float) -> float:
    return round(float(x), 2)


def _bbox_json(b: BBox) -> list[float]:
    return [_round2(b.minx), _round2(b.miny), _round2(b.maxx), _round2(b.maxy)]


def _props_json(p: Props) -> Any:
    if p is None:
        return None
    out: dict[str, Any] = {}
    for name, value in vars(p).items():
        out[name] = _bbox_json(value) if isinstance(value, BBox) else value
    return out


def serialize(doc: AnnotationDocument) -> str:
    """Canonical UTF-8 JSON: sorted keys, no insignificant whitespace,
    coordinates limited to 2 decimal places."""
    violations = validate_document(doc)
    if violations:
        raise SchemaError("invalid document: " + "; ".join(violations))
    payload = {
        "schema_version": doc.schema_version,
        "sequence_id": doc.sequence_id,
        "frames": [
            {
                "index": frame.index,
                "records": [
                    {
                        "track_id": rec.track_id,
                        "object_type": rec.object_type,
                        "bbox": _bbox_json(rec.bbox),
                        "props": _props_json(rec.props),
                    }
                    for rec in frame.records
                ],
            }
            for frame in doc.frames
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


_PROPS_FIELDS = {
    "vehicle": (
        "occlusion", "bottom_occlusion", "direction", "movement", "lane",
        "lane_change", "rotation", "pose", "lighting", "size",
    ),
    "two-wheeler": (
        "occlusion", "head_occlusion", "feet_occlusion", "direction", "movement",
        "lane", "rotation", "pose", "lighting", "size",
    ),
    "pedestrian": (
        "occlusion", "head_occlusion", "feet_occlusion", "direction", "movement",
        "height", "strange_pose", "lighting", "size",
    ),
}


def _parse_bbox(raw: Any, path: str) -> BBox:
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw)
    ):
        raise SchemaError(f"{path}: expected [minx,miny,maxx,maxy]")
    return BBox(*(float(x) for x in raw))


def _require_keys(obj: dict, required: tuple, path: str) -> None:
    for key in required:
        if key not in obj:
            raise SchemaError(f"{path}: missing required field {key!r}")
    for key in obj:
        if key not in required:
            raise SchemaError(f"{path}: unknown field {key!r}")


def _parse_props(raw: Any, object_type: str, path: str) -> Props:
    cat = category(object_type)
    if cat == "non-descript":
        if raw is not None:
            raise SchemaError(f"{path}: non-descript records carry no props")
        return None
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected props object for {cat} record")
    fields = _PROPS_FIELDS[cat]
    _require_keys(raw, fields, path)
    kwargs: dict[str, Any] = {}
    for name in fields:
        value = raw[name]
        kwargs[name] = _parse_bbox(value, f"{path}.size") if name == "size" else value
    cls = _PROPS_CLASS_FOR_CATEGORY[cat]
    return cls(**kwargs)


def parse(text: str) -> AnnotationDocument:
    """Parse canonical annotation JSON; errors carry the offending JSON path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("$: expected top-level object")
    _require_keys(raw, ("schema_version", "sequence_id", "frames"), "$")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"$.schema_version: unsupported schema_version {raw['schema_version']!r}")
    if not isinstance(raw["sequence_id"], str):
        raise SchemaError("$.sequence_id: expected string")
    if not isinstance(raw["frames"], list):
        raise SchemaError("$.frames: expected list")

    frames: list[FrameAnnotations] = []
    for i, frame_raw in enumerate(raw["frames"]):
        fpath = f"$.frames[{i}]"
        if not isinstance(frame_raw, dict):
            raise SchemaError(f"{fpath}: expected object")
        _require_keys(frame_raw, ("index", "records"), fpath)
        index = frame_raw["index"]
        if not isinstance(index, int) or index < 0:
            raise SchemaError(f"{fpath}.index: expected non-negative integer")
        records: list[AnnotationRecord] = []
        for j, rec_raw in enumerate(frame_raw["records"]):
            rpath = f"{fpath}.records[{j}]"
            if not isinstance(rec_raw, dict):
                raise SchemaError(f"{rpath}: expected object")
            _require_keys(rec_raw, ("track_id", "object_type", "bbox", "props"), rpath)
            if not isinstance(rec_raw["track_id"], int):
                raise SchemaError(f"{rpath}.track_id: expected integer")
            object_type = rec_raw["object_type"]
            if object_type not in OBJECT_TYPES:
                raise SchemaError(f"{rpath}.object_type: unknown value {object_type!r}")
            bbox = _parse_bbox(rec_raw["bbox"], f"{rpath}.bbox")
            props = _parse_props(rec_raw["props"], object_type, f"{rpath}.props")
            record = AnnotationRecord(
                frame_index=index,
                track_id=rec_raw["track_id"],
                object_type=object_type,
                bbox=bbox,
                props=props,
            )
            bad = validate_record(record)
            if bad:
                raise SchemaError(f"{rpath}: " + "; ".join(bad))
            records.append(record)
        frames.append(FrameAnnotations(index=index, records=records))

    doc = AnnotationDocument(
        schema_version=raw["schema_version"],
        sequence_id=raw["sequence_id"],
        frames=frames,
    )
    bad = validate_document(doc)
    if bad:
        raise SchemaError("; ".join(bad))
    return doc


def record_lane(record: AnnotationRecord) -> LaneId | None:
    """Lane id carried by a record, or None for categories without one."""
    p = record.props
    if isinstance(p, (VehicleProps, TwoWheelerProps)):
        return p.lane
    return None


def with_size(props: Props, size: BBox) -> Props:
    if props is None:
        return None
    return replace(props, size=size)
