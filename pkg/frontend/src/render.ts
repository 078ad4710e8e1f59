/**
 * Canvas overlay drawing: boxes, track ids, lane ids and movement
 * labels on top of the frame image.  Takes a minimal drawing surface so
 * tests can pass a fake instead of a real CanvasRenderingContext2D.
 */

import { AnnotationRecord, FrameAnnotations } from "./schema.js";

export interface DrawSurface {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

const CATEGORY_COLORS: Record<string, string> = {
  vehicle: "#4fc3f7",
  "two-wheeler": "#ffb74d",
  pedestrian: "#81c784",
  "non-descript": "#9e9e9e",
};

export function recordLabel(rec: AnnotationRecord): string {
  const parts = [`#${rec.track_id}`, rec.object_type];
  if (rec.props !== null) {
    const props = rec.props as unknown as Record<string, unknown>;
    if ("lane" in props) parts.push(`lane ${String(props.lane)}`);
    parts.push(String(props.movement));
  }
  return parts.join(" ");
}

export function drawOverlay(
  ctx: DrawSurface,
  frame: FrameAnnotations,
  selected: number,
  colorFor: (objectType: string) => string = defaultColor,
): void {
  ctx.font = "12px sans-serif";
  frame.records.forEach((rec, i) => {
    const [minx, miny, maxx, maxy] = rec.bbox;
    ctx.strokeStyle = colorFor(rec.object_type);
    ctx.lineWidth = i === selected ? 3 : 1;
    ctx.strokeRect(minx, miny, maxx - minx, maxy - miny);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(recordLabel(rec), minx, Math.max(12, miny - 4));
  });
}

function defaultColor(objectType: string): string {
  for (const [cat, color] of Object.entries(CATEGORY_COLORS)) {
    if (cat === "non-descript" && objectType === "non-descript") return color;
  }
  if (objectType === "pedestrian") return CATEGORY_COLORS.pedestrian;
  if (["mopedist", "motorcyclist", "cyclist", "other-two-wheeler"].includes(objectType)) {
    return CATEGORY_COLORS["two-wheeler"];
  }
  if (objectType === "non-descript") return CATEGORY_COLORS["non-descript"];
  return CATEGORY_COLORS.vehicle;
}
