/**
 * Review session state: load a document, apply vocabulary-checked edits,
 * export the corrected document plus a replayable diff.
 *
 * The edit log is the single source of truth for changes: the current
 * document always equals the original with the log folded on, and
 * export produces `{"edits":[{frame,track_id,field,old,new}]}` that the
 * pipeline's replay command can apply to reproduce the export
 * byte-for-byte.
 */

import {
  AnnotationDocument,
  AnnotationRecord,
  BBox,
  Category,
  SchemaError,
  bboxValid,
  category,
  fieldVocabulary,
  parseDocument,
  serializeDocument,
  validateRecord,
} from "./schema.js";

export interface Edit {
  frame: number;
  track_id: number;
  field: string;
  old: unknown;
  new: unknown;
}

export interface ReviewSession {
  readonly original: AnnotationDocument;
  readonly document: AnnotationDocument;
  readonly frameImages: string[];
  readonly cursor: number; // index into document.frames
  readonly selected: number; // index into the cursor frame's records
  readonly editLog: Edit[];
}

export class EditError extends Error {}

function cloneDocument(doc: AnnotationDocument): AnnotationDocument {
  return JSON.parse(JSON.stringify(doc)) as AnnotationDocument;
}

/**
 * Parse and validate a document and attach the frame image list.  Frame
 * images are optional (an empty list shows boxes on a blank canvas) but
 * when provided there must be one per annotated frame.
 */
export function loadSession(
  annotationJson: string,
  frameImages: string[] = [],
): ReviewSession {
  const document = parseDocument(annotationJson);
  if (frameImages.length > 0 && frameImages.length < document.frames.length) {
    throw new SchemaError(
      `missing frame images: ${frameImages.length} images for ` +
        `${document.frames.length} annotated frames`,
    );
  }
  return {
    original: cloneDocument(document),
    document,
    frameImages,
    cursor: 0,
    selected: 0,
    editLog: [],
  };
}

function findRecord(
  doc: AnnotationDocument,
  frame: number,
  trackId: number,
): AnnotationRecord {
  const fr = doc.frames.find((f) => f.index === frame);
  const rec = fr?.records.find((r) => r.track_id === trackId);
  if (!rec) throw new EditError(`no record for frame ${frame} track ${trackId}`);
  return rec;
}

function currentValue(rec: AnnotationRecord, field: string): unknown {
  if (field === "bbox") return [...rec.bbox];
  if (field === "object_type") return rec.object_type;
  const props = rec.props as Record<string, unknown> | null;
  if (props === null || !(field in props)) {
    throw new EditError(`field '${field}' does not exist for a ${rec.object_type} record`);
  }
  return props[field];
}

function checkVocabulary(cat: Category, field: string, value: unknown): void {
  const vocab = fieldVocabulary(cat, field);
  if (vocab === null) {
    throw new EditError(`field '${field}' does not exist for a ${cat} record`);
  }
  if (vocab === "boolean") {
    if (typeof value !== "boolean") {
      throw new EditError(`${field}: expected true or false, got ${JSON.stringify(value)}`);
    }
    return;
  }
  if (!vocab.includes(value)) {
    throw new EditError(
      `${field}: ${JSON.stringify(value)} not in vocabulary ${JSON.stringify(vocab)}`,
    );
  }
}

function editedRecord(rec: AnnotationRecord, field: string, value: unknown): AnnotationRecord {
  if (field === "bbox") {
    if (
      !Array.isArray(value) ||
      value.length !== 4 ||
      !value.every((x) => typeof x === "number" && Number.isFinite(x))
    ) {
      throw new EditError("bbox edit needs [minx,miny,maxx,maxy]");
    }
    const bbox = value.map((x) => Math.round(x * 100) / 100) as BBox;
    if (!bboxValid(bbox)) {
      throw new EditError("bbox must satisfy minx < maxx and miny < maxy");
    }
    const props =
      rec.props === null ? null : { ...(rec.props as object), size: [...bbox] };
    return { ...rec, bbox, props: props as AnnotationRecord["props"] };
  }
  if (field === "object_type") {
    if (typeof value !== "string" || category(rec.object_type) !== category(value)) {
      throw new EditError(
        `object_type edit ${rec.object_type} -> ${String(value)} changes category`,
      );
    }
    return { ...rec, object_type: value as AnnotationRecord["object_type"] };
  }
  if (field === "size") {
    throw new EditError("size follows bbox; edit the bbox instead");
  }
  checkVocabulary(category(rec.object_type), field, value);
  const props = { ...(rec.props as object), [field]: value };
  return { ...rec, props: props as unknown as AnnotationRecord["props"] };
}

function applyToDocument(
  doc: AnnotationDocument,
  frame: number,
  trackId: number,
  field: string,
  oldValue: unknown,
  newValue: unknown,
): AnnotationDocument {
  const rec = findRecord(doc, frame, trackId);
  const current = currentValue(rec, field);
  if (JSON.stringify(current) !== JSON.stringify(oldValue)) {
    throw new EditError(
      `frame ${frame} track ${trackId} field '${field}': expected old value ` +
        `${JSON.stringify(oldValue)}, document has ${JSON.stringify(current)}`,
    );
  }
  const updated = editedRecord(rec, field, newValue);
  const violations = validateRecord(frame, updated);
  if (violations.length) {
    throw new EditError(`edit produces invalid record: ${violations.join("; ")}`);
  }
  return {
    ...doc,
    frames: doc.frames.map((f) =>
      f.index !== frame
        ? f
        : { ...f, records: f.records.map((r) => (r.track_id === trackId ? updated : r)) },
    ),
  };
}

/** Apply one edit; returns a new session with the edit appended to the log. */
export function applyEdit(
  session: ReviewSession,
  frame: number,
  trackId: number,
  field: string,
  newValue: unknown,
): ReviewSession {
  const rec = findRecord(session.document, frame, trackId);
  const oldValue = currentValue(rec, field);
  const document = applyToDocument(session.document, frame, trackId, field, oldValue, newValue);
  return {
    ...session,
    document,
    editLog: [
      ...session.editLog,
      { frame, track_id: trackId, field, old: oldValue, new: newValue },
    ],
  };
}

export interface ExportResult {
  /** Canonical bytes of the corrected document. */
  json: string;
  /** Canonical bytes of the `{"edits":[...]}` correction diff. */
  diff: string;
}

export function exportSession(session: ReviewSession): ExportResult {
  return {
    json: serializeDocument(session.document),
    diff: JSON.stringify({ edits: session.editLog }),
  };
}

/**
 * Pure fold: replay a correction diff onto an original document and
 * return the canonical bytes of the result.  By construction this
 * reproduces `exportSession(...).json` for the session that produced
 * the diff.
 */
export function replayDiff(originalJson: string, diffJson: string): string {
  let doc = parseDocument(originalJson);
  const raw = JSON.parse(diffJson) as { edits?: Edit[] };
  if (!raw || !Array.isArray(raw.edits)) {
    throw new EditError('diff must be an object with an "edits" list');
  }
  for (const edit of raw.edits) {
    doc = applyToDocument(doc, edit.frame, edit.track_id, edit.field, edit.old, edit.new);
  }
  return serializeDocument(doc);
}
