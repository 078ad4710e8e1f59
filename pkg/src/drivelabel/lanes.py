"""Lane boundary fitting and lane assignment.

Each lane-boundary instance from the mask is straightened into a single
(rho, theta) line by a Hough transform; boundaries are ordered left to
right by their bottom-row x intercept; interior lanes are numbered
relative to the ego vehicle (0 = ego lane, negative left, positive
right); objects get the lane their bbox bottom edge overlaps most.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import GrayImage, LaneMask, SceneConfig
from .schema import BBox, LANE_UNKNOWN, LaneId


class LaneError(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    """x*cos(theta) + y*sin(theta) = rho, theta in [0, pi)."""

    rho: float
    theta: float

    def x_at(self, y: float) -> float:
        c = math.cos(self.theta)
        if abs(c) < 1e-9:
            raise LaneError("near-horizontal line has no x intercept")
        return (self.rho - y * math.sin(self.theta)) / c


def hough_peak(
    mask: np.ndarray,
    rho_res: float = 1.0,
    theta_res_deg: float = 1.0,
) -> Line:
    """Accumulator peak over a boolean foreground mask, at bin resolution.

    Rho rounding lets several neighboring cells reach the same maximum
    vote count on clean synthetic lines, so ties are broken first by the
    smallest sum of squared point-to-line residuals, then by smaller
    theta and smaller rho.
    """
    ys, xs = np.nonzero(mask)
    if len(xs) < 2:
        raise LaneError("degenerate instance: fewer than 2 foreground pixels")
    h, w = mask.shape
    diag = int(math.ceil(math.hypot(w, h)))
    n_theta = int(round(180.0 / theta_res_deg))
    thetas = np.deg2rad(np.arange(n_theta) * theta_res_deg)
    # rho bin index = round(rho / rho_res) + diag_bins
    diag_bins = int(math.ceil(diag / rho_res))
    n_rho = 2 * diag_bins + 1

    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)
    rho_idx = np.rint(
        (xs[:, None] * cos_t[None, :] + ys[:, None] * sin_t[None, :]) / rho_res
    ).astype(np.int64) + diag_bins

    acc = np.zeros((n_theta, n_rho), dtype=np.int64)
    theta_idx = np.broadcast_to(np.arange(n_theta)[None, :], rho_idx.shape)
    np.add.at(acc, (theta_idx.ravel(), rho_idx.ravel()), 1)

    best = acc.max()
    cand_t, cand_r = np.nonzero(acc == best)
    best_line = None
    best_key = None
    for t_i, r_i in zip(cand_t, cand_r):
        rho = (int(r_i) - diag_bins) * rho_res
        resid = xs * cos_t[t_i] + ys * sin_t[t_i] - rho
        key = (float(np.sum(resid * resid)), int(t_i), int(r_i))
        if best_key is None or key < best_key:
            best_key = key
            best_line = Line(rho=rho, theta=float(thetas[t_i]))
    return best_line


def hough_lines(
    mask: np.ndarray,
    rho_res: float = 1.0,
    theta_res_deg: float = 1.0,
) -> Line:
    """Sub-bin line fit: accumulator peak, then a total-least-squares
    refinement over the pixels near the peak line.

    The peak alone carries up to half a bin of quantization in each
    dimension, which compounds to well over a pixel in rho for long lines
    far from the origin; refitting the inliers removes that error.
    """
    peak = hough_peak(mask, rho_res, theta_res_deg)
    ys, xs = np.nonzero(mask)
    c, s = math.cos(peak.theta), math.sin(peak.theta)
    resid = xs * c + ys * s - peak.rho
    # generous band: peak rho/theta are each at most half a bin off
    inlier = np.abs(resid) <= 1.5 * rho_res
    ix, iy = xs[inlier].astype(float), ys[inlier].astype(float)
    if len(ix) < 2:
        return peak
    mx, my = ix.mean(), iy.mean()
    cov = np.cov(np.stack([ix - mx, iy - my]), bias=True)
    eigvals, eigvecs = np.linalg.eigh(cov)
    nx, ny = eigvecs[:, 0]  # eigenvector of the smaller eigenvalue = normal
    theta = math.atan2(ny, nx)
    rho = nx * mx + ny * my
    if theta < 0:
        theta += math.pi
        rho = -rho
    if theta >= math.pi:
        theta -= math.pi
        rho = -rho
    return Line(rho=float(rho), theta=float(theta))


@dataclass
class LaneModel:
    """Fitted boundary lines plus derived interior-lane numbering."""

    boundaries: list[Line]            # ordered left -> right at the bottom row
    bottom_xs: list[float]            # x intercept of each boundary at bottom row
    lane_ids: list[LaneId]            # id per interior lane (len = boundaries - 1)
    ego_lane_index: int               # index into interior lanes
    bottom_row: float
    diagnostics: list[str] = field(default_factory=list)

    def intervals_at(self, y: float) -> list[tuple[LaneId, float, float]]:
        """Interior-lane intervals evaluated at row y, in bottom-row order.

        Boundaries that cross above the evaluation row yield empty
        intervals and are skipped.
        """
        xs = [line.x_at(y) for line in self.boundaries]
        out = []
        for i, lane_id in enumerate(self.lane_ids):
            left, right = xs[i], xs[i + 1]
            if right > left:
                out.append((lane_id, left, right))
        return out


def build_lane_model(mask: LaneMask, cfg: SceneConfig) -> LaneModel:
    """Fit one line per mask instance and number the interior lanes.

    K boundaries yield K-1 interior lanes; the one containing the ego
    anchor at the bottom row is lane 0; ids grow outward to +/-2, anything
    further (and the exterior half-planes) is unknown.
    """
    diagnostics: list[str] = []
    lines: list[Line] = []
    for label in mask.instances():
        try:
            line = hough_lines(mask.instance_mask(label))
            bottom = line.x_at(cfg.image_height - 1)
        except LaneError as exc:
            diagnostics.append(f"instance {label}: {exc}")
            continue
        lines.append(line)
    if len(lines) < 2:
        raise LaneError("insufficient boundaries")

    bottom_row = float(cfg.image_height - 1)
    order = sorted(range(len(lines)), key=lambda i: lines[i].x_at(bottom_row))
    boundaries = [lines[i] for i in order]
    bottom_xs = [line.x_at(bottom_row) for line in boundaries]
    for a, b in zip(bottom_xs, bottom_xs[1:]):
        if b - a < 1.0:
            raise LaneError("boundaries closer than 1 px at bottom row")

    anchor = cfg.ego_anchor_x
    ego_index = None
    for i in range(len(boundaries) - 1):
        # anchor exactly on a boundary belongs to the lane on its right
        if bottom_xs[i] <= anchor < bottom_xs[i + 1]:
            ego_index = i
            break
    if ego_index is None:
        # anchor outside all interior lanes: nearest interval wins
        def dist(i: int) -> float:
            if anchor < bottom_xs[i]:
                return bottom_xs[i] - anchor
            return anchor - bottom_xs[i + 1]

        ego_index = min(range(len(boundaries) - 1), key=dist)
        diagnostics.append("ego anchor outside all interior lanes")

    lane_ids: list[LaneId] = []
    for i in range(len(boundaries) - 1):
        offset = i - ego_index
        lane_ids.append(offset if abs(offset) <= 2 else LANE_UNKNOWN)

    return LaneModel(
        boundaries=boundaries,
        bottom_xs=bottom_xs,
        lane_ids=lane_ids,
        ego_lane_index=ego_index,
        bottom_row=bottom_row,
        diagnostics=diagnostics,
    )


def assign_lane(bbox: BBox, model: LaneModel | None) -> LaneId:
    """Lane whose interval overlaps the bbox bottom edge the most.

    Overlap ties prefer the smaller |id|, then the smaller signed id;
    zero total overlap with numbered lanes means unknown.
    """
    if model is None:
        return LANE_UNKNOWN
    try:
        intervals = model.intervals_at(bbox.maxy)
    except LaneError:
        return LANE_UNKNOWN
    best_id: LaneId = LANE_UNKNOWN
    best_key: tuple[float, float, float] | None = None
    for lane_id, left, right in intervals:
        if lane_id == LANE_UNKNOWN:
            continue
        overlap = min(bbox.maxx, right) - max(bbox.minx, left)
        if overlap <= 0:
            continue
        # larger overlap wins; ties prefer ego-proximate then leftmost id
        key = (-overlap, abs(lane_id), lane_id)
        if best_key is None or key < best_key:
            best_key, best_id = key, lane_id
    return best_id


def model_dump(model: LaneModel | None) -> dict:
    """Diagnostic JSON payload for the --dump-lanes CLI flag."""
    if model is None:
        return {"boundaries": [], "lanes": [], "diagnostics": ["insufficient boundaries"]}
    return {
        "boundaries": [
            {"rho": round(line.rho, 3), "theta": round(line.theta, 6)}
            for line in model.boundaries
        ],
        "lanes": [
            {"id": lane_id, "left": round(left, 2), "right": round(right, 2)}
            for lane_id, left, right in model.intervals_at(model.bottom_row)
        ],
        "diagnostics": model.diagnostics,
    }
