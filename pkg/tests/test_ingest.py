"""Ingest: PGM I/O, detection manifest, post-processing rules, oracle."""

import json

import numpy as np
import pytest

from drivelabel.ingest import (
    BACKEND_PROPERTIES,
    Detection,
    GrayImage,
    IngestError,
    LaneMask,
    PropertyOracle,
    SceneConfig,
    clip_bbox,
    frame_path,
    lane_mask_path,
    load_detection_manifest,
    load_pgm,
    postprocess_detection,
    query_property_backend,
    save_pgm,
)
from drivelabel.schema import BBox

SCENE = SceneConfig(median_present=False, image_width=640, image_height=480)
MEDIAN_SCENE = SceneConfig(median_present=True, image_width=640, image_height=480)


# ---------------------------------------------------------------------------
# PGM


def test_load_pgm_bit_exact(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255]))
    img = load_pgm(p)
    assert img.width == 2 and img.height == 2
    assert img.pixels.tolist() == [[0, 64], [128, 255]]


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = GrayImage(7, 5, rng.integers(0, 256, size=(5, 7)).astype(np.uint8))
    save_pgm(tmp_path / "r.pgm", img)
    back = load_pgm(tmp_path / "r.pgm")
    assert np.array_equal(back.pixels, img.pixels)


def test_load_pgm_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n255\n" + bytes([7, 9]))
    assert load_pgm(p).pixels.tolist() == [[7, 9]]


def test_load_pgm_rejects_ascii_variant(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
    with pytest.raises(IngestError, match="unsupported PGM variant"):
        load_pgm(p)


def test_load_pgm_truncated_payload(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 1, 2]))
    with pytest.raises(IngestError, match="truncated"):
        load_pgm(p)


def test_load_pgm_wrong_magic_and_maxval(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(IngestError, match="not a PGM"):
        load_pgm(p)
    p.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(IngestError, match="maxval"):
        load_pgm(p)


def test_load_pgm_missing_file(tmp_path):
    with pytest.raises(IngestError, match="missing file"):
        load_pgm(tmp_path / "nope.pgm")


# ---------------------------------------------------------------------------
# Detection manifest


def _write_manifest(tmp_path, frames):
    p = tmp_path / "dets.json"
    p.write_text(
        json.dumps(
            {
                "sequence_id": "t",
                "image_width": 100,
                "image_height": 100,
                "frames": frames,
            }
        )
    )
    return p


def test_manifest_empty(tmp_path):
    m = load_detection_manifest(_write_manifest(tmp_path, []))
    assert m.frames == []
    assert m.sequence_id == "t"


def test_manifest_clips_bboxes(tmp_path):
    frames = [
        {
            "index": 0,
            "detections": [{"class": "car", "score": 0.9, "bbox": [-5, 10, 50, 40]}],
        }
    ]
    m = load_detection_manifest(_write_manifest(tmp_path, frames))
    (_, dets), = m.frames
    assert dets[0].bbox == BBox(0.0, 10.0, 50.0, 40.0)


def test_manifest_drops_zero_area_after_clip(tmp_path):
    frames = [
        {
            "index": 0,
            "detections": [
                {"class": "car", "score": 0.9, "bbox": [-30, 10, -5, 40]},
                {"class": "bus", "score": 0.8, "bbox": [10, 10, 40, 40]},
            ],
        }
    ]
    m = load_detection_manifest(_write_manifest(tmp_path, frames))
    (_, dets), = m.frames
    assert [d.cls for d in dets] == ["bus"]


def test_manifest_non_monotonic_frames(tmp_path):
    frames = [{"index": 1, "detections": []}, {"index": 1, "detections": []}]
    with pytest.raises(IngestError, match="non-monotonic"):
        load_detection_manifest(_write_manifest(tmp_path, frames))


def test_manifest_unknown_class(tmp_path):
    frames = [
        {"index": 0, "detections": [{"class": "tank", "score": 0.9, "bbox": [0, 0, 9, 9]}]}
    ]
    with pytest.raises(IngestError, match="unknown class"):
        load_detection_manifest(_write_manifest(tmp_path, frames))


def test_manifest_rejects_nondescript_class(tmp_path):
    frames = [
        {
            "index": 0,
            "detections": [
                {"class": "non-descript", "score": 0.9, "bbox": [0, 0, 9, 9]}
            ],
        }
    ]
    with pytest.raises(IngestError, match="unknown class"):
        load_detection_manifest(_write_manifest(tmp_path, frames))


def test_manifest_score_range(tmp_path):
    frames = [
        {"index": 0, "detections": [{"class": "car", "score": 1.5, "bbox": [0, 0, 9, 9]}]}
    ]
    with pytest.raises(IngestError, match="score"):
        load_detection_manifest(_write_manifest(tmp_path, frames))


def test_manifest_missing_and_malformed(tmp_path):
    with pytest.raises(IngestError, match="missing file"):
        load_detection_manifest(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(IngestError, match="malformed JSON"):
        load_detection_manifest(bad)


def test_clip_idempotent():
    b = clip_bbox(BBox(-5, -5, 200, 90), 100, 100)
    assert clip_bbox(b, 100, 100) == b == BBox(0, 0, 100, 90)


# ---------------------------------------------------------------------------
# Post-processing rules


def _det(w, h, cls="car"):
    return Detection(cls=cls, score=0.9, bbox=BBox(10, 10, 10 + w, 10 + h))


def test_nondescript_rule_strict_conjunctive():
    assert postprocess_detection(_det(29, 29), SCENE).cls == "non-descript"
    assert postprocess_detection(_det(30, 29), SCENE).cls == "car"
    assert postprocess_detection(_det(29, 30), SCENE).cls == "car"
    assert postprocess_detection(_det(30, 30), SCENE).cls == "car"
    # conjunctive: one large dimension keeps the class
    assert postprocess_detection(_det(25, 100), SCENE).cls == "car"


def test_nondescript_rule_preserves_bbox():
    d = _det(20, 20)
    out = postprocess_detection(d, SCENE)
    assert out.bbox == d.bbox and out.score == d.score


def test_median_rule_needs_direction_and_median():
    d = _det(100, 50, cls="motorcyclist")
    assert postprocess_detection(d, MEDIAN_SCENE).cls == "motorcyclist"
    assert postprocess_detection(d, MEDIAN_SCENE, "oncoming").cls == "non-descript"
    assert postprocess_detection(d, SCENE, "oncoming").cls == "motorcyclist"
    assert postprocess_detection(d, MEDIAN_SCENE, "preceding").cls == "motorcyclist"


def test_median_rule_skips_pedestrians():
    d = _det(40, 90, cls="pedestrian")
    assert postprocess_detection(d, MEDIAN_SCENE, "oncoming").cls == "pedestrian"


# ---------------------------------------------------------------------------
# Lane mask


def test_lane_mask_instances():
    px = np.zeros((4, 6), dtype=np.uint8)
    px[:, 1] = 1
    px[:, 4] = 2
    mask = LaneMask(GrayImage(6, 4, px))
    assert mask.instances() == [1, 2]
    assert mask.instance_mask(1).sum() == 4


def test_lane_mask_noncontiguous_labels():
    px = np.zeros((4, 6), dtype=np.uint8)
    px[:, 1] = 2
    with pytest.raises(IngestError, match="not contiguous"):
        LaneMask(GrayImage(6, 4, px)).instances()


def test_lane_mask_too_many_instances():
    px = np.zeros((2, 14), dtype=np.uint8)
    for k in range(7):
        px[:, 2 * k] = k + 1
    with pytest.raises(IngestError, match="more than 6"):
        LaneMask(GrayImage(14, 2, px)).instances()


# ---------------------------------------------------------------------------
# Property oracle


def _oracle(tmp_path):
    p = tmp_path / "oracle.json"
    p.write_text(
        json.dumps(
            {
                "frames": [
                    {
                        "index": 0,
                        "objects": [
                            {
                                "bbox": [10, 10, 110, 60],
                                "labels": {"occlusion": "partial", "lighting": "glare"},
                            }
                        ],
                    }
                ]
            }
        )
    )
    return PropertyOracle.load(p)


def test_oracle_lookup_iou_match(tmp_path):
    oracle = _oracle(tmp_path)
    close = BBox(12, 10, 110, 60)  # IoU well above 0.5
    assert query_property_backend(oracle, 0, close, "occlusion", "vehicle") == "partial"
    assert query_property_backend(oracle, 0, close, "lighting", "vehicle") == "glare"


def test_oracle_miss_falls_back_to_defaults(tmp_path):
    oracle = _oracle(tmp_path)
    far = BBox(300, 300, 400, 350)
    assert query_property_backend(oracle, 0, far, "occlusion", "vehicle") == "none"
    assert query_property_backend(oracle, 0, far, "lighting", "vehicle") == "normal"
    assert query_property_backend(oracle, 0, far, "pose", "vehicle") == "rear"
    assert query_property_backend(oracle, 0, far, "direction", "vehicle") == "preceding"
    # unlisted property for a matching object also defaults
    close = BBox(12, 10, 110, 60)
    assert query_property_backend(oracle, 0, close, "pose", "vehicle") == "rear"


def test_oracle_low_iou_is_a_miss(tmp_path):
    oracle = _oracle(tmp_path)
    assert oracle.lookup(0, BBox(100, 55, 200, 120)) is None


def test_oracle_invalid_property_for_category(tmp_path):
    oracle = _oracle(tmp_path)
    with pytest.raises(IngestError, match="not a pedestrian property"):
        query_property_backend(oracle, 0, BBox(10, 10, 110, 60), "pose", "pedestrian")


def test_backend_property_lists_match_vocab():
    assert "bottom_occlusion" in BACKEND_PROPERTIES["vehicle"]
    assert "pose" not in BACKEND_PROPERTIES["pedestrian"]
    assert "height" in BACKEND_PROPERTIES["pedestrian"]


def test_empty_oracle_defaults():
    oracle = PropertyOracle.empty()
    assert (
        query_property_backend(oracle, 5, BBox(0, 0, 10, 10), "strange_pose", "pedestrian")
        is False
    )


# ---------------------------------------------------------------------------
# Paths


def test_frame_paths_zero_padded(tmp_path):
    assert frame_path(tmp_path, 7).name == "frame_000007.pgm"
    assert lane_mask_path(tmp_path, 123456).name == "lane_123456.pgm"


def test_scene_config_anchor_default_and_bounds():
    assert SCENE.ego_anchor_x == 320.0
    with pytest.raises(IngestError, match="ego_anchor_x"):
        SceneConfig(median_present=False, image_width=100, image_height=100, ego_anchor_x=100)
