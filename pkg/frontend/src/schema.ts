/**
 * Annotation document model, vocabulary validation, and the canonical
 * JSON serialization (schema version "1.0").
 *
 * This mirrors the pipeline's schema module exactly: the same
 * vocabularies, the same validation rules, and a byte-identical
 * canonical serialization (sorted keys, no insignificant whitespace,
 * coordinates limited to 2 decimal places, float coordinates always
 * rendered with a decimal point).
 */

export const SCHEMA_VERSION = "1.0";

export const VEHICLE_TYPES = ["car", "bus", "truck", "other-vehicle"] as const;
export const TWO_WHEELER_TYPES = [
  "mopedist",
  "motorcyclist",
  "cyclist",
  "other-two-wheeler",
] as const;
export const PEDESTRIAN_TYPES = ["pedestrian"] as const;
export const NON_DESCRIPT = "non-descript";
export const OBJECT_TYPES = [
  ...VEHICLE_TYPES,
  ...TWO_WHEELER_TYPES,
  ...PEDESTRIAN_TYPES,
  NON_DESCRIPT,
] as const;

export const OCCLUSION_VALUES = ["none", "partial", "full"] as const;
export const DIRECTION_VALUES = ["preceding", "oncoming"] as const;
export const PEDESTRIAN_DIRECTIONS = [
  "NN",
  "NE",
  "NW",
  "SS",
  "SE",
  "SW",
  "EE",
  "WW",
] as const;
export const MOVEMENT_VALUES = ["moving", "stationary", "parked"] as const;
export const ROTATION_VALUES = ["relevant", "irrelevant"] as const;
export const POSE_VALUES = [
  "rear",
  "rearright",
  "rearleft",
  "front",
  "frontright",
  "frontleft",
  "side",
] as const;
export const LIGHTING_VALUES = ["normal", "unsharp", "glare"] as const;
export const HEIGHT_VALUES = ["adult", "child"] as const;

export const LANE_UNKNOWN = "unknown";
export const LANE_IDS: ReadonlyArray<string | number> = [LANE_UNKNOWN, -2, -1, 0, 1, 2];

export type LaneId = string | number;
export type ObjectType = (typeof OBJECT_TYPES)[number];
export type Category = "vehicle" | "two-wheeler" | "pedestrian" | "non-descript";

/** [minx, miny, maxx, maxy] in image pixels, origin top-left. */
export type BBox = [number, number, number, number];

export interface VehicleProps {
  occlusion: string;
  bottom_occlusion: boolean;
  direction: string;
  movement: string;
  lane: LaneId;
  lane_change: boolean;
  rotation: string;
  pose: string;
  lighting: string;
  size: BBox;
}

export interface TwoWheelerProps {
  occlusion: string;
  head_occlusion: boolean;
  feet_occlusion: boolean;
  direction: string;
  movement: string;
  lane: LaneId;
  rotation: string;
  pose: string;
  lighting: string;
  size: BBox;
}

export interface PedestrianProps {
  occlusion: string;
  head_occlusion: boolean;
  feet_occlusion: boolean;
  direction: string;
  movement: string;
  height: string;
  strange_pose: boolean;
  lighting: string;
  size: BBox;
}

export type Props = VehicleProps | TwoWheelerProps | PedestrianProps | null;

export interface AnnotationRecord {
  track_id: number;
  object_type: ObjectType;
  bbox: BBox;
  props: Props;
}

export interface FrameAnnotations {
  index: number;
  records: AnnotationRecord[];
}

export interface AnnotationDocument {
  schema_version: string;
  sequence_id: string;
  frames: FrameAnnotations[];
}

export class SchemaError extends Error {}

export function category(objectType: string): Category {
  if ((VEHICLE_TYPES as readonly string[]).includes(objectType)) return "vehicle";
  if ((TWO_WHEELER_TYPES as readonly string[]).includes(objectType)) {
    return "two-wheeler";
  }
  if ((PEDESTRIAN_TYPES as readonly string[]).includes(objectType)) {
    return "pedestrian";
  }
  if (objectType === NON_DESCRIPT) return "non-descript";
  throw new SchemaError(`unknown object type: ${objectType}`);
}

const PROPS_FIELDS: Record<Exclude<Category, "non-descript">, string[]> = {
  vehicle: [
    "occlusion",
    "bottom_occlusion",
    "direction",
    "movement",
    "lane",
    "lane_change",
    "rotation",
    "pose",
    "lighting",
    "size",
  ],
  "two-wheeler": [
    "occlusion",
    "head_occlusion",
    "feet_occlusion",
    "direction",
    "movement",
    "lane",
    "rotation",
    "pose",
    "lighting",
    "size",
  ],
  pedestrian: [
    "occlusion",
    "head_occlusion",
    "feet_occlusion",
    "direction",
    "movement",
    "height",
    "strange_pose",
    "lighting",
    "size",
  ],
};

/** Allowed values per editable property field, for the given category. */
export function fieldVocabulary(
  cat: Category,
  field: string,
): ReadonlyArray<unknown> | "boolean" | null {
  if (cat === "non-descript") return null;
  if (!PROPS_FIELDS[cat].includes(field)) return null;
  switch (field) {
    case "occlusion":
      return OCCLUSION_VALUES;
    case "movement":
      return MOVEMENT_VALUES;
    case "lighting":
      return LIGHTING_VALUES;
    case "direction":
      return cat === "pedestrian" ? PEDESTRIAN_DIRECTIONS : DIRECTION_VALUES;
    case "lane":
      return LANE_IDS;
    case "rotation":
      return ROTATION_VALUES;
    case "pose":
      return POSE_VALUES;
    case "height":
      return HEIGHT_VALUES;
    case "bottom_occlusion":
    case "head_occlusion":
    case "feet_occlusion":
    case "lane_change":
    case "strange_pose":
      return "boolean";
    default:
      return null;
  }
}

function isTwoDecimal(v: number): boolean {
  return Number.isFinite(v) && Math.abs(v * 100 - Math.round(v * 100)) < 1e-9;
}

export function bboxValid(b: BBox): boolean {
  return b[0] < b[2] && b[1] < b[3] && b[0] >= 0 && b[1] >= 0;
}

function sameBBox(a: BBox, b: BBox): boolean {
  return a.length === 4 && a.every((v, i) => v === b[i]);
}

export function validateRecord(frameIndex: number, rec: AnnotationRecord): string[] {
  const v: string[] = [];
  if (frameIndex < 0) v.push("frame_index negative");
  if (rec.track_id < 0) v.push("track_id negative");
  if (!(OBJECT_TYPES as readonly string[]).includes(rec.object_type)) {
    v.push(`object_type: ${rec.object_type} unknown`);
    return v;
  }
  if (!bboxValid(rec.bbox)) v.push("degenerate bbox");

  const cat = category(rec.object_type);
  if (cat === "non-descript") {
    if (rec.props !== null) v.push("props variant mismatch");
    return v;
  }
  if (rec.props === null || typeof rec.props !== "object") {
    v.push("props variant mismatch");
    return v;
  }
  const p = rec.props as unknown as Record<string, unknown>;
  const fields = PROPS_FIELDS[cat];
  for (const key of Object.keys(p)) {
    if (!fields.includes(key)) v.push(`unknown property field ${key}`);
  }
  for (const field of fields) {
    if (!(field in p)) {
      v.push(`missing property field ${field}`);
      continue;
    }
    if (field === "size") continue;
    const vocab = fieldVocabulary(cat, field);
    const value = p[field];
    if (vocab === "boolean") {
      if (typeof value !== "boolean") v.push(`${field}: expected bool, got ${value}`);
    } else if (vocab && !vocab.includes(value)) {
      v.push(`${field}: ${JSON.stringify(value)} not in ${JSON.stringify(vocab)}`);
    }
  }
  const size = p["size"] as BBox | undefined;
  if (size === undefined || !sameBBox(size, rec.bbox)) {
    v.push("props size differs from record bbox");
  }
  return v;
}

export function validateDocument(doc: AnnotationDocument): string[] {
  const v: string[] = [];
  if (doc.schema_version !== SCHEMA_VERSION) {
    v.push(`unsupported schema_version ${doc.schema_version}`);
  }
  let prev: number | null = null;
  for (const frame of doc.frames) {
    if (prev !== null && frame.index <= prev) {
      v.push(`frame index ${frame.index} not strictly increasing`);
    }
    prev = frame.index;
    const seen = new Set<number>();
    for (const rec of frame.records) {
      if (seen.has(rec.track_id)) {
        v.push(`frame ${frame.index}: duplicate track_id ${rec.track_id}`);
      }
      seen.add(rec.track_id);
      for (const msg of validateRecord(frame.index, rec)) {
        v.push(`frame ${frame.index} track ${rec.track_id}: ${msg}`);
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Parsing

function requireKeys(obj: Record<string, unknown>, required: string[], path: string): void {
  for (const key of required) {
    if (!(key in obj)) throw new SchemaError(`${path}: missing required field '${key}'`);
  }
  for (const key of Object.keys(obj)) {
    if (!required.includes(key)) throw new SchemaError(`${path}: unknown field '${key}'`);
  }
}

function parseBBox(raw: unknown, path: string): BBox {
  if (
    !Array.isArray(raw) ||
    raw.length !== 4 ||
    !raw.every((x) => typeof x === "number" && Number.isFinite(x))
  ) {
    throw new SchemaError(`${path}: expected [minx,miny,maxx,maxy]`);
  }
  for (const x of raw) {
    if (!isTwoDecimal(x)) {
      throw new SchemaError(`${path}: coordinates limited to 2 decimal places`);
    }
  }
  return [raw[0], raw[1], raw[2], raw[3]];
}

function parseProps(raw: unknown, objectType: string, path: string): Props {
  const cat = category(objectType);
  if (cat === "non-descript") {
    if (raw !== null) throw new SchemaError(`${path}: non-descript records carry no props`);
    return null;
  }
  if (raw === null || typeof raw !== "object" || Array.isArray(raw)) {
    throw new SchemaError(`${path}: expected props object for ${cat} record`);
  }
  const obj = raw as Record<string, unknown>;
  requireKeys(obj, PROPS_FIELDS[cat], path);
  const out: Record<string, unknown> = {};
  for (const field of PROPS_FIELDS[cat]) {
    out[field] = field === "size" ? parseBBox(obj[field], `${path}.size`) : obj[field];
  }
  return out as unknown as Props;
}

/** Parse canonical annotation JSON; throws SchemaError with a JSON path. */
export function parseDocument(text: string): AnnotationDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new SchemaError(`malformed JSON: ${(exc as Error).message}`);
  }
  if (raw === null || typeof raw !== "object" || Array.isArray(raw)) {
    throw new SchemaError("$: expected top-level object");
  }
  const top = raw as Record<string, unknown>;
  requireKeys(top, ["schema_version", "sequence_id", "frames"], "$");
  if (top.schema_version !== SCHEMA_VERSION) {
    throw new SchemaError(
      `$.schema_version: unsupported schema_version ${JSON.stringify(top.schema_version)}`,
    );
  }
  if (typeof top.sequence_id !== "string") {
    throw new SchemaError("$.sequence_id: expected string");
  }
  if (!Array.isArray(top.frames)) throw new SchemaError("$.frames: expected list");

  const frames: FrameAnnotations[] = [];
  top.frames.forEach((frameRaw: unknown, i: number) => {
    const fpath = `$.frames[${i}]`;
    if (frameRaw === null || typeof frameRaw !== "object" || Array.isArray(frameRaw)) {
      throw new SchemaError(`${fpath}: expected object`);
    }
    const fobj = frameRaw as Record<string, unknown>;
    requireKeys(fobj, ["index", "records"], fpath);
    const index = fobj.index;
    if (typeof index !== "number" || !Number.isInteger(index) || index < 0) {
      throw new SchemaError(`${fpath}.index: expected non-negative integer`);
    }
    if (!Array.isArray(fobj.records)) throw new SchemaError(`${fpath}.records: expected list`);
    const records: AnnotationRecord[] = [];
    fobj.records.forEach((recRaw: unknown, j: number) => {
      const rpath = `${fpath}.records[${j}]`;
      if (recRaw === null || typeof recRaw !== "object" || Array.isArray(recRaw)) {
        throw new SchemaError(`${rpath}: expected object`);
      }
      const robj = recRaw as Record<string, unknown>;
      requireKeys(robj, ["track_id", "object_type", "bbox", "props"], rpath);
      if (typeof robj.track_id !== "number" || !Number.isInteger(robj.track_id)) {
        throw new SchemaError(`${rpath}.track_id: expected integer`);
      }
      const objectType = robj.object_type;
      if (
        typeof objectType !== "string" ||
        !(OBJECT_TYPES as readonly string[]).includes(objectType)
      ) {
        throw new SchemaError(`${rpath}.object_type: unknown value ${JSON.stringify(objectType)}`);
      }
      const record: AnnotationRecord = {
        track_id: robj.track_id,
        object_type: objectType as ObjectType,
        bbox: parseBBox(robj.bbox, `${rpath}.bbox`),
        props: parseProps(robj.props, objectType, `${rpath}.props`),
      };
      const bad = validateRecord(index, record);
      if (bad.length) throw new SchemaError(`${rpath}: ${bad.join("; ")}`);
      records.push(record);
    });
    frames.push({ index, records });
  });

  const doc: AnnotationDocument = {
    schema_version: top.schema_version as string,
    sequence_id: top.sequence_id,
    frames,
  };
  const bad = validateDocument(doc);
  if (bad.length) throw new SchemaError(bad.join("; "));
  return doc;
}

// ---------------------------------------------------------------------------
// Canonical serialization

/**
 * Coordinates are floats in the canonical encoding: integer-valued ones
 * still print with a trailing ".0" (matching the pipeline's encoder).
 */
function floatRepr(v: number): string {
  if (Number.isInteger(v)) return v.toFixed(1);
  return String(v);
}

function bboxJson(b: BBox): string {
  return `[${b.map(floatRepr).join(",")}]`;
}

function scalarJson(v: unknown): string {
  if (typeof v === "string" || typeof v === "boolean" || v === null) {
    return JSON.stringify(v);
  }
  if (typeof v === "number") return String(v);
  throw new SchemaError(`cannot serialize value ${String(v)}`);
}

function propsJson(p: Props): string {
  if (p === null) return "null";
  const obj = p as unknown as Record<string, unknown>;
  const parts = Object.keys(obj)
    .sort()
    .map((key) => {
      const value = key === "size" ? bboxJson(obj[key] as BBox) : scalarJson(obj[key]);
      return `${JSON.stringify(key)}:${value}`;
    });
  return `{${parts.join(",")}}`;
}

/** Canonical bytes: sorted keys, compact separators, float coordinates. */
export function serializeDocument(doc: AnnotationDocument): string {
  const violations = validateDocument(doc);
  if (violations.length) {
    throw new SchemaError(`invalid document: ${violations.join("; ")}`);
  }
  const frames = doc.frames
    .map((frame) => {
      const records = frame.records
        .map(
          (rec) =>
            `{"bbox":${bboxJson(rec.bbox)},` +
            `"object_type":${JSON.stringify(rec.object_type)},` +
            `"props":${propsJson(rec.props)},` +
            `"track_id":${rec.track_id}}`,
        )
        .join(",");
      return `{"index":${frame.index},"records":[${records}]}`;
    })
    .join(",");
  return (
    `{"frames":[${frames}],` +
    `"schema_version":${JSON.stringify(doc.schema_version)},` +
    `"sequence_id":${JSON.stringify(doc.sequence_id)}}`
  );
}
