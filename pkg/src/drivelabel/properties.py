"""Per-object property derivation and annotation record assembly.

Rule-derived properties (rotation, pedestrian direction, the vehicle
direction heuristic) live here; perception properties come from the
oracle backend with documented defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .features import detect_lane_change
from .ingest import PropertyOracle, SceneConfig, query_property_backend
from .lanes import LaneModel
from .schema import (
    AnnotationRecord,
    BBox,
    PEDESTRIAN_DIRECTIONS,
    PedestrianProps,
    TwoWheelerProps,
    VehicleProps,
    category,
    validate_record,
)
from .tracker import Track


class PropertyError(ValueError):
    pass


def derive_rotation(direction: str | None) -> str:
    """Rotation is relevant exactly when the travel direction is known
    (oncoming or preceding)."""
    return "relevant" if direction in ("oncoming", "preceding") else "irrelevant"


# Compass sector order, clockwise from north; boundary angles (e.g. 22.5
# degrees) break toward the counterclockwise sector.
_COMPASS = ("NN", "NE", "EE", "SE", "SS", "SW", "WW", "NW")

MIN_DISPLACEMENT_PX = 2.0
DIRECTION_WINDOW = 5


def quantize_compass(dx: float, dy: float) -> str:
    """8-way compass sector for an image-plane displacement.

    North is decreasing y, east is increasing x.
    """
    east, north = dx, -dy
    angle = math.degrees(math.atan2(east, north)) % 360.0  # clockwise from north
    sector = math.ceil((angle - 22.5) / 45.0) % 8
    return _COMPASS[int(sector)]


def derive_pedestrian_direction(track: Track) -> str:
    """Compass direction from the bbox-center displacement over the last
    few observations; small displacements keep the previous value."""
    history = [b for _, b in track.bbox_history]
    if len(history) < 2:
        return track.last_ped_direction
    window = history[-min(DIRECTION_WINDOW, len(history)):]
    (x0, y0), (x1, y1) = window[0].center, window[-1].center
    dx, dy = x1 - x0, y1 - y0
    if math.hypot(dx, dy) < MIN_DISPLACEMENT_PX:
        return track.last_ped_direction
    direction = quantize_compass(dx, dy)
    track.last_ped_direction = direction
    return direction


GROWTH_RATE_PER_FRAME = 0.20


def derive_vehicle_direction_heuristic(track: Track) -> str:
    """Fallback direction when the oracle has no entry: strong bbox area
    growth with a descending bottom edge reads as oncoming."""
    history = [b for _, b in track.bbox_history]
    if len(history) < 2:
        return "preceding"
    window = history[-min(DIRECTION_WINDOW, len(history)):]
    first, last = window[0], window[-1]
    steps = len(window) - 1
    if first.area <= 0:
        return "preceding"
    rate = (last.area / first.area) ** (1.0 / steps) - 1.0
    if rate > GROWTH_RATE_PER_FRAME and last.maxy > first.maxy:
        return "oncoming"
    return "preceding"


@dataclass
class RuleContext:
    track: Track
    lane_model: LaneModel | None
    movement: str
    scene: SceneConfig
    oracle: PropertyOracle
    frame_index: int


def _backend(ctx: RuleContext, cat: str, name: str):
    return query_property_backend(
        ctx.oracle, ctx.frame_index, ctx.track.current_bbox(), name, cat
    )


def resolve_direction(ctx: RuleContext, cat: str) -> str:
    """Oracle first, geometric/heuristic fallback second."""
    if cat == "pedestrian":
        labels = ctx.oracle.lookup(ctx.frame_index, ctx.track.current_bbox())
        if labels and labels.get("direction") in PEDESTRIAN_DIRECTIONS:
            return labels["direction"]
        return derive_pedestrian_direction(ctx.track)
    labels = ctx.oracle.lookup(ctx.frame_index, ctx.track.current_bbox())
    if labels and labels.get("direction") in ("preceding", "oncoming"):
        return labels["direction"]
    return derive_vehicle_direction_heuristic(ctx.track)


def assemble_record(ctx: RuleContext, object_type: str) -> AnnotationRecord:
    """Build the full validated record for one object in one frame."""
    track = ctx.track
    bbox = track.current_bbox()
    cat = category(object_type)

    if cat == "non-descript":
        props = None
    elif cat == "vehicle":
        direction = resolve_direction(ctx, cat)
        props = VehicleProps(
            occlusion=_backend(ctx, cat, "occlusion"),
            bottom_occlusion=_backend(ctx, cat, "bottom_occlusion"),
            direction=direction,
            movement=ctx.movement,
            lane=track.lane_history[-1],
            lane_change=detect_lane_change(track.lane_history),
            rotation=derive_rotation(direction),
            pose=_backend(ctx, cat, "pose"),
            lighting=_backend(ctx, cat, "lighting"),
            size=bbox,
        )
    elif cat == "two-wheeler":
        direction = resolve_direction(ctx, cat)
        props = TwoWheelerProps(
            occlusion=_backend(ctx, cat, "occlusion"),
            head_occlusion=_backend(ctx, cat, "head_occlusion"),
            feet_occlusion=_backend(ctx, cat, "feet_occlusion"),
            direction=direction,
            movement=ctx.movement,
            lane=track.lane_history[-1],
            rotation=derive_rotation(direction),
            pose=_backend(ctx, cat, "pose"),
            lighting=_backend(ctx, cat, "lighting"),
            size=bbox,
        )
    else:
        props = PedestrianProps(
            occlusion=_backend(ctx, cat, "occlusion"),
            head_occlusion=_backend(ctx, cat, "head_occlusion"),
            feet_occlusion=_backend(ctx, cat, "feet_occlusion"),
            direction=resolve_direction(ctx, cat),
            movement=ctx.movement,
            height=_backend(ctx, cat, "height"),
            strange_pose=_backend(ctx, cat, "strange_pose"),
            lighting=_backend(ctx, cat, "lighting"),
            size=bbox,
        )

    record = AnnotationRecord(
        frame_index=ctx.frame_index,
        track_id=track.id,
        object_type=object_type,
        bbox=bbox,
        props=props,
    )
    violations = validate_record(record)
    if violations:
        raise PropertyError(
            f"assembled record failed validation: {'; '.join(violations)}"
        )
    return record
