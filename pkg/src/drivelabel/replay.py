"""Correction-diff replay: fold an edit log onto an annotation document.

The review UI exports a corrected document together with a diff of the
form ``{"edits":[{"frame":int,"track_id":int,"field":str,"old":...,
"new":...}]}``.  Replaying that diff onto the original document must
reproduce the export byte-for-byte under the canonical serialization;
this module is the reference implementation of that fold.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .schema import (
    AnnotationDocument,
    AnnotationRecord,
    BBox,
    FrameAnnotations,
    category,
    validate_record,
)


class ReplayError(ValueError):
    pass


_EDIT_KEYS = ("frame", "track_id", "field", "old", "new")


def load_diff(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise ReplayError(f"missing diff file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReplayError(f"malformed diff JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("edits"), list):
        raise ReplayError('diff must be an object with an "edits" list')
    edits = []
    for i, edit in enumerate(raw["edits"]):
        if not isinstance(edit, dict) or set(edit) != set(_EDIT_KEYS):
            raise ReplayError(f"edits[{i}]: expected keys {list(_EDIT_KEYS)}")
        if not isinstance(edit["frame"], int) or not isinstance(edit["track_id"], int):
            raise ReplayError(f"edits[{i}]: frame and track_id must be integers")
        edits.append(edit)
    return edits


def _current_value(record: AnnotationRecord, field: str):
    if field == "bbox":
        return [round(v, 2) for v in record.bbox.to_list()]
    if field == "object_type":
        return record.object_type
    if record.props is None or not hasattr(record.props, field):
        raise ReplayError(
            f"field {field!r} does not exist for a {record.object_type} record"
        )
    value = getattr(record.props, field)
    return [round(v, 2) for v in value.to_list()] if isinstance(value, BBox) else value


def _edited_record(record: AnnotationRecord, field: str, new) -> AnnotationRecord:
    if field == "bbox":
        if not (isinstance(new, list) and len(new) == 4):
            raise ReplayError("bbox edit needs [minx,miny,maxx,maxy]")
        bbox = BBox(*(round(float(v), 2) for v in new))
        props = record.props if record.props is None else replace(record.props, size=bbox)
        updated = replace(record, bbox=bbox, props=props)
    elif field == "object_type":
        if not isinstance(new, str) or category(record.object_type) != category(new):
            raise ReplayError(
                f"object_type edit {record.object_type!r} -> {new!r} changes category"
            )
        updated = replace(record, object_type=new)
    elif field == "size":
        raise ReplayError("size follows bbox; edit the bbox instead")
    else:
        updated = replace(record, props=replace(record.props, **{field: new}))
    violations = validate_record(updated)
    if violations:
        raise ReplayError(f"edit produces invalid record: " + "; ".join(violations))
    return updated


def apply_edit(
    doc: AnnotationDocument, frame: int, track_id: int, field: str, old, new
) -> AnnotationDocument:
    """Apply one edit, returning a new document; the original is untouched."""
    frames: list[FrameAnnotations] = []
    hit = False
    for fr in doc.frames:
        if fr.index != frame:
            frames.append(fr)
            continue
        records = []
        for rec in fr.records:
            if rec.track_id != track_id:
                records.append(rec)
                continue
            hit = True
            current = _current_value(rec, field)
            if current != old:
                raise ReplayError(
                    f"frame {frame} track {track_id} field {field!r}: "
                    f"expected old value {old!r}, document has {current!r}"
                )
            records.append(_edited_record(rec, field, new))
        frames.append(FrameAnnotations(index=fr.index, records=records))
    if not hit:
        raise ReplayError(f"no record for frame {frame} track {track_id}")
    return AnnotationDocument(
        schema_version=doc.schema_version, sequence_id=doc.sequence_id, frames=frames
    )


def apply_diff(doc: AnnotationDocument, edits: list[dict]) -> AnnotationDocument:
    """Pure fold: original + edit log = corrected document."""
    for edit in edits:
        doc = apply_edit(
            doc, edit["frame"], edit["track_id"], edit["field"], edit["old"], edit["new"]
        )
    return doc
