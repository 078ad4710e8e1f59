"""ORB-style features and the movement / lane-change rules.

Oriented FAST corners with intensity-centroid orientation, a steered
256-bit binary descriptor over a fixed point-pair pattern (shipped as a
repo fixture for bit-exact results), brute-force Hamming matching with
cross-check, the 6-pixel mean-displacement movement rule, and stable-lane
change detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .schema import BBox, LANE_UNKNOWN, NUMBERED_LANES, LaneId

BORDER_MARGIN = 18          # descriptor + orientation windows must fit
MAX_KEYPOINTS = 64
FAST_THRESHOLD = 20
HAMMING_CUT = 64
MIN_MATCHES = 5
MOVEMENT_THRESHOLD_PX = 6.0
MIN_ROI_SIDE = 36

# 16 Bresenham circle offsets (dx, dy), radius 3, clockwise from 12 o'clock
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


@dataclass(frozen=True)
class Keypoint:
    x: int
    y: int
    score: float
    angle: float = 0.0


@dataclass(frozen=True)
class MatchPair:
    index_a: int
    index_b: int
    hamming: int
    pixel_distance: float


def _best_arc(flags: list[bool], diffs: list[int]) -> tuple[int, int]:
    """Longest circular run of True flags and the |diff| sum over it."""
    n = len(flags)
    if all(flags):
        return n, sum(diffs)
    best_len, best_sum = 0, 0
    run_len, run_sum = 0, 0
    # unroll twice to handle wrap-around; cap run length at n
    for i in range(2 * n):
        if flags[i % n]:
            run_len += 1
            run_sum += diffs[i % n]
            if (run_len, run_sum) > (best_len, best_sum):
                best_len, best_sum = run_len, run_sum
        else:
            run_len, run_sum = 0, 0
    return best_len, best_sum


def _arc_score(diffs16: list[int], threshold: int) -> float | None:
    """FAST segment test on the 16 ring-minus-center diffs; returns the
    corner score (|diff| sum over the qualifying arc) or None."""
    abs_diffs = [abs(d) for d in diffs16]
    best = None
    blen, bsum = _best_arc([d > threshold for d in diffs16], abs_diffs)
    if blen >= 9:
        best = bsum
    dlen, dsum = _best_arc([d < -threshold for d in diffs16], abs_diffs)
    if dlen >= 9 and (best is None or dsum > best):
        best = dsum
    return float(best) if best is not None else None


def _segment_test(patch_vals, center: int, threshold: int) -> float | None:
    """Segment test from raw circle intensities (reference entry point)."""
    return _arc_score([int(v) - center for v in patch_vals], threshold)


_RUN_LUT: np.ndarray | None = None


def _max_run_lut() -> np.ndarray:
    """LUT: 16-bit circle mask -> longest circular run of set bits."""
    global _RUN_LUT
    if _RUN_LUT is None:
        lut = np.zeros(1 << 16, dtype=np.uint8)
        for m in range(1 << 16):
            if m == 0xFFFF:
                lut[m] = 16
                continue
            bits = [(m >> i) & 1 for i in range(16)]
            best = run = 0
            for i in range(32):
                if bits[i % 16]:
                    run += 1
                    best = max(best, run)
                else:
                    run = 0
            lut[m] = min(best, 16)
        _RUN_LUT = lut
    return _RUN_LUT


def fast_corners(
    image: np.ndarray,
    roi: BBox,
    threshold: int = FAST_THRESHOLD,
    max_keypoints: int = MAX_KEYPOINTS,
) -> list[Keypoint]:
    """FAST-9 corners inside roi with 3x3 non-maximum suppression, top
    `max_keypoints` by score.  Keypoints keep an 18 px image margin so the
    orientation and descriptor windows always fit."""
    h, w = image.shape
    x0 = max(int(math.ceil(roi.minx)), BORDER_MARGIN)
    y0 = max(int(math.ceil(roi.miny)), BORDER_MARGIN)
    x1 = min(int(math.floor(roi.maxx)), w - 1 - BORDER_MARGIN)
    y1 = min(int(math.floor(roi.maxy)), h - 1 - BORDER_MARGIN)
    if x1 < x0 or y1 < y0:
        return []

    img = image.astype(np.int16)
    center = img[y0 : y1 + 1, x0 : x1 + 1]
    diffs = np.empty((16,) + center.shape, dtype=np.int16)
    bright = np.zeros(center.shape, dtype=np.uint16)
    dark = np.zeros(center.shape, dtype=np.uint16)
    for bit, (dx, dy) in enumerate(CIRCLE):
        ring = img[y0 + dy : y1 + 1 + dy, x0 + dx : x1 + 1 + dx]
        diff = ring - center
        diffs[bit] = diff
        bright |= (diff > threshold).astype(np.uint16) << bit
        dark |= (diff < -threshold).astype(np.uint16) << bit

    lut = _max_run_lut()
    is_corner = (lut[bright] >= 9) | (lut[dark] >= 9)
    cys, cxs = np.nonzero(is_corner)
    if len(cxs) == 0:
        return []

    # exact arc score only for candidate pixels
    cand_diffs = diffs[:, cys, cxs]
    scored: dict[tuple[int, int], float] = {}
    for k, (cy, cx) in enumerate(zip(cys, cxs)):
        x, y = x0 + int(cx), y0 + int(cy)
        d = cand_diffs[:, k]
        score = _arc_score(d.tolist(), threshold)
        if score is not None:
            scored[(x, y)] = score

    # 3x3 NMS; ties resolved toward the smaller (y, x)
    def priority(pt: tuple[int, int]) -> tuple:
        return (scored[pt], -pt[1], -pt[0])

    kept = []
    for (x, y), score in scored.items():
        dominated = False
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                n = (x + dx, y + dy)
                if n in scored and priority(n) > priority((x, y)):
                    dominated = True
                    break
            if dominated:
                break
        if not dominated:
            kept.append(Keypoint(x=x, y=y, score=score))

    kept.sort(key=lambda k: (-k.score, k.y, k.x))
    return kept[:max_keypoints]


_PATCH_RADIUS = 15
_CENTROID_OFFSETS: tuple[np.ndarray, np.ndarray] | None = None


def _centroid_offsets() -> tuple[np.ndarray, np.ndarray]:
    global _CENTROID_OFFSETS
    if _CENTROID_OFFSETS is None:
        span = np.arange(-_PATCH_RADIUS, _PATCH_RADIUS + 1)
        dx, dy = np.meshgrid(span, span)
        inside = dx * dx + dy * dy <= _PATCH_RADIUS * _PATCH_RADIUS
        _CENTROID_OFFSETS = (dx[inside], dy[inside])
    return _CENTROID_OFFSETS


def keypoint_orientation(image: np.ndarray, kp: Keypoint) -> float:
    """Intensity-centroid angle atan2(m01, m10) over a radius-15 patch."""
    dx, dy = _centroid_offsets()
    vals = image[kp.y + dy, kp.x + dx].astype(np.float64)
    m10 = float(np.sum(dx * vals))
    m01 = float(np.sum(dy * vals))
    if m10 == 0.0 and m01 == 0.0:
        return 0.0
    return math.atan2(m01, m10)


# ---------------------------------------------------------------------------
# Binary descriptor

N_ANGLE_BINS = 30  # 12 degrees per bin
_PATTERN: np.ndarray | None = None
_ROTATED: list[np.ndarray] | None = None


def load_pattern() -> np.ndarray:
    """The committed 512-point sampling pattern, shape (256, 2, 2)."""
    global _PATTERN
    if _PATTERN is None:
        text = resources.files("drivelabel.data").joinpath("brief_pattern.txt").read_text()
        coords = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            x_s, y_s = line.split()
            coords.append((int(x_s), int(y_s)))
        if len(coords) != 512:
            raise ValueError(f"pattern fixture must hold 512 points, got {len(coords)}")
        _PATTERN = np.array(coords, dtype=np.int32).reshape(256, 2, 2)
    return _PATTERN


def _rotated_patterns() -> list[np.ndarray]:
    global _ROTATED
    if _ROTATED is None:
        base = load_pattern().astype(np.float64)
        out = []
        for b in range(N_ANGLE_BINS):
            a = 2.0 * math.pi * b / N_ANGLE_BINS
            c, s = math.cos(a), math.sin(a)
            xs = base[..., 0]
            ys = base[..., 1]
            rot = np.stack(
                [np.rint(xs * c - ys * s), np.rint(xs * s + ys * c)], axis=-1
            ).astype(np.int32)
            out.append(rot)
        _ROTATED = out
    return _ROTATED


def brief_descriptor(image: np.ndarray, kp: Keypoint) -> np.ndarray:
    """256-bit steered binary descriptor packed into 32 uint8 bytes.

    The pattern is rotated by the keypoint angle quantized to 30 bins.
    """
    bin_idx = int(round((kp.angle % (2.0 * math.pi)) / (2.0 * math.pi) * N_ANGLE_BINS)) % N_ANGLE_BINS
    pattern = _rotated_patterns()[bin_idx]
    p = pattern[:, 0, :]
    q = pattern[:, 1, :]
    vals_p = image[kp.y + p[:, 1], kp.x + p[:, 0]]
    vals_q = image[kp.y + q[:, 1], kp.x + q[:, 0]]
    bits = (vals_p < vals_q).astype(np.uint8)
    return np.packbits(bits)


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    return int(_POPCOUNT[np.bitwise_xor(a, b)].sum())


def bf_match(
    descs_a: list[np.ndarray],
    kps_a: list[Keypoint],
    descs_b: list[np.ndarray],
    kps_b: list[Keypoint],
    hamming_cut: int = HAMMING_CUT,
) -> list[MatchPair]:
    """Exhaustive mutual-nearest Hamming matching with a distance cut.

    Nearest-neighbor ties resolve to the smallest index on both sides.
    """
    if not descs_a or not descs_b:
        return []
    a = np.stack(descs_a)
    b = np.stack(descs_b)
    # pairwise Hamming distances via byte-wise XOR popcount
    dist = _POPCOUNT[np.bitwise_xor(a[:, None, :], b[None, :, :])].sum(axis=2)
    nn_ab = dist.argmin(axis=1)   # argmin takes the first (smallest index) on ties
    nn_ba = dist.argmin(axis=0)
    out = []
    for i, j in enumerate(nn_ab):
        j = int(j)
        if int(nn_ba[j]) != i:
            continue
        d = int(dist[i, j])
        if d > hamming_cut:
            continue
        ka, kb = kps_a[i], kps_b[j]
        out.append(
            MatchPair(
                index_a=i,
                index_b=j,
                hamming=d,
                pixel_distance=math.hypot(kb.x - ka.x, kb.y - ka.y),
            )
        )
    return out


def extract(image: np.ndarray, roi: BBox, threshold: int = FAST_THRESHOLD):
    """Keypoints (with orientation) and descriptors for one ROI."""
    kps = fast_corners(image, roi, threshold)
    oriented = [
        Keypoint(k.x, k.y, k.score, keypoint_orientation(image, k)) for k in kps
    ]
    descs = [brief_descriptor(image, k) for k in oriented]
    return oriented, descs


# ---------------------------------------------------------------------------
# Movement and lane change


def classify_movement(
    prev_frame: np.ndarray,
    curr_frame: np.ndarray,
    prev_bbox: BBox,
    curr_bbox: BBox,
    lane: LaneId,
    threshold_px: float = MOVEMENT_THRESHOLD_PX,
    fast_threshold: int = FAST_THRESHOLD,
    extract_fn=None,
) -> tuple[str, float]:
    """Movement class from mean matched-keypoint displacement.

    Strictly-greater-than threshold: a mean displacement of exactly the
    threshold is not moving.  Falls back to bbox-center distance when the
    ROIs are too small or fewer than MIN_MATCHES matches survive.
    """
    mean_distance = None
    if (
        prev_bbox.width >= MIN_ROI_SIDE
        and prev_bbox.height >= MIN_ROI_SIDE
        and curr_bbox.width >= MIN_ROI_SIDE
        and curr_bbox.height >= MIN_ROI_SIDE
    ):
        do_extract = extract_fn or extract
        kps_a, descs_a = do_extract(prev_frame, prev_bbox, fast_threshold)
        kps_b, descs_b = do_extract(curr_frame, curr_bbox, fast_threshold)
        matches = bf_match(descs_a, kps_a, descs_b, kps_b)
        if len(matches) >= MIN_MATCHES:
            mean_distance = float(np.mean([m.pixel_distance for m in matches]))
    if mean_distance is None:
        pa, pb = prev_bbox.center, curr_bbox.center
        mean_distance = math.hypot(pb[0] - pa[0], pb[1] - pa[1])

    if mean_distance > threshold_px:
        return "moving", mean_distance
    if lane in NUMBERED_LANES:
        return "stationary", mean_distance
    return "parked", mean_distance


def stable_lanes(lane_history: list[LaneId], window: int = 3) -> list[LaneId]:
    """Collapsed sequence of stable numbered lanes (runs >= window);
    unknown frames never participate in stability."""
    numbered = [l for l in lane_history if l != LANE_UNKNOWN]
    stable: list[LaneId] = []
    run_lane, run_len = None, 0
    for lane in numbered:
        if lane == run_lane:
            run_len += 1
        else:
            run_lane, run_len = lane, 1
        if run_len == window and (not stable or stable[-1] != lane):
            stable.append(lane)
    return stable


def detect_lane_change(lane_history: list[LaneId], window: int = 3) -> bool:
    """True once the latest stable lane differs from the previous one."""
    return len(stable_lanes(lane_history, window)) >= 2
