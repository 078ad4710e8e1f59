"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import random

import pytest

from drivelabel.schema import (
    AnnotationDocument,
    AnnotationRecord,
    BBox,
    FrameAnnotations,
    HEIGHT_VALUES,
    LANE_IDS,
    LIGHTING_VALUES,
    MOVEMENT_VALUES,
    OBJECT_TYPES,
    OCCLUSION_VALUES,
    PEDESTRIAN_DIRECTIONS,
    POSE_VALUES,
    PedestrianProps,
    ROTATION_VALUES,
    TwoWheelerProps,
    VehicleProps,
    category,
)

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS.append((name, "PASS" if passed else "FAIL"))


def pytest_runtest_logreport(report):
    # surface acceptance outcomes (including failures that raised before
    # record_acceptance ran) in the terminal summary
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not any(n == name for n, _ in _ACCEPTANCE_RESULTS):
        _ACCEPTANCE_RESULTS.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{outcome}: {name}")


# ---------------------------------------------------------------------------
# Random valid-document generator (used by roundtrip fuzz)


def _random_bbox(rng: random.Random) -> BBox:
    minx = round(rng.uniform(0, 500), 2)
    miny = round(rng.uniform(0, 400), 2)
    w = round(rng.uniform(1, 200), 2)
    h = round(rng.uniform(1, 200), 2)
    return BBox(minx, miny, round(minx + w, 2), round(miny + h, 2))


def _random_props(rng: random.Random, object_type: str, bbox: BBox):
    cat = category(object_type)
    if cat == "non-descript":
        return None
    common = dict(
        occlusion=rng.choice(OCCLUSION_VALUES),
        movement=rng.choice(MOVEMENT_VALUES),
        lighting=rng.choice(LIGHTING_VALUES),
        size=bbox,
    )
    if cat == "vehicle":
        return VehicleProps(
            bottom_occlusion=rng.random() < 0.5,
            direction=rng.choice(("preceding", "oncoming")),
            lane=rng.choice(LANE_IDS),
            lane_change=rng.random() < 0.5,
            rotation=rng.choice(ROTATION_VALUES),
            pose=rng.choice(POSE_VALUES),
            **common,
        )
    if cat == "two-wheeler":
        return TwoWheelerProps(
            head_occlusion=rng.random() < 0.5,
            feet_occlusion=rng.random() < 0.5,
            direction=rng.choice(("preceding", "oncoming")),
            lane=rng.choice(LANE_IDS),
            rotation=rng.choice(ROTATION_VALUES),
            pose=rng.choice(POSE_VALUES),
            **common,
        )
    return PedestrianProps(
        head_occlusion=rng.random() < 0.5,
        feet_occlusion=rng.random() < 0.5,
        direction=rng.choice(PEDESTRIAN_DIRECTIONS),
        height=rng.choice(HEIGHT_VALUES),
        strange_pose=rng.random() < 0.5,
        **common,
    )


def random_document(seed: int) -> AnnotationDocument:
    """A structurally valid random document with 2-decimal coordinates."""
    rng = random.Random(seed)
    frames = []
    index = -1
    for _ in range(rng.randint(0, 4)):
        index += rng.randint(1, 3)
        records = []
        for track_id in rng.sample(range(10), rng.randint(0, 4)):
            object_type = rng.choice(OBJECT_TYPES)
            bbox = _random_bbox(rng)
            records.append(
                AnnotationRecord(
                    frame_index=index,
                    track_id=track_id,
                    object_type=object_type,
                    bbox=bbox,
                    props=_random_props(rng, object_type, bbox),
                )
            )
        frames.append(FrameAnnotations(index=index, records=records))
    return AnnotationDocument(sequence_id=f"seq-{seed}", frames=frames)


# ---------------------------------------------------------------------------
# Canonical example records


@pytest.fixture
def car_record() -> AnnotationRecord:
    bbox = BBox(100.0, 200.0, 180.0, 250.0)
    return AnnotationRecord(
        frame_index=0,
        track_id=0,
        object_type="car",
        bbox=bbox,
        props=VehicleProps(
            occlusion="none",
            bottom_occlusion=False,
            direction="preceding",
            movement="moving",
            lane=0,
            lane_change=False,
            rotation="relevant",
            pose="rear",
            lighting="normal",
            size=bbox,
        ),
    )


@pytest.fixture
def pedestrian_record() -> AnnotationRecord:
    bbox = BBox(10.0, 20.0, 48.0, 92.0)
    return AnnotationRecord(
        frame_index=0,
        track_id=1,
        object_type="pedestrian",
        bbox=bbox,
        props=PedestrianProps(
            occlusion="none",
            head_occlusion=False,
            feet_occlusion=True,
            direction="WW",
            movement="moving",
            height="adult",
            strange_pose=False,
            lighting="normal",
            size=bbox,
        ),
    )
