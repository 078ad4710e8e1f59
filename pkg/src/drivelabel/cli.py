"""Command-line interface: annotate, evaluate, synth.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ingest import IngestError
from .lanes import LaneError
from .metrics import MetricsError, timing_report
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    annotate_and_write,
    evaluate_paths,
)
from .properties import PropertyError
from .replay import ReplayError, apply_diff, load_diff
from .report import write_report
from .schema import SchemaError, parse, serialize
from .synth import SynthConfig, SynthError, generate

_INPUT_ERRORS = (ConfigError, IngestError, SchemaError, LaneError, MetricsError, SynthError, ReplayError, OSError)
_INTERNAL_ERRORS = (PipelineError, PropertyError)


def _cmd_annotate(args: argparse.Namespace) -> int:
    config = PipelineConfig.from_json(args.config)
    result = annotate_and_write(
        config, dump_lanes=args.dump_lanes, dump_tracks=args.dump_tracks
    )
    n_records = sum(len(f.records) for f in result.document.frames)
    print(f"wrote {config.output} ({len(result.document.frames)} frames, {n_records} records)")
    print(timing_report(result.timing))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    report = evaluate_paths(args.pred, args.gt, iou_thr=args.iou)
    print(report.to_text())
    if args.json_out:
        Path(args.json_out).write_text(report.to_json() + "\n")
    if args.report_dir:
        write_report(report, args.report_dir)
        print(f"report written to {args.report_dir}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    original = parse(Path(args.original).read_text())
    result = serialize(apply_diff(original, load_diff(args.diff)))
    if args.out:
        Path(args.out).write_text(result)
        print(f"wrote {args.out}")
    if args.check:
        expected = Path(args.check).read_text()
        if result != expected:
            print("replay mismatch: diff does not reproduce the export", file=sys.stderr)
            return 1
        print("replay matches the export byte-for-byte")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig.from_json(args.config)
    out = generate(config, args.out)
    print(f"fixture set written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivelabel",
        description="Automatic video annotation pipeline for driving scenes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="run the annotation pipeline on a sequence")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--dump-lanes", action="store_true", help="dump per-frame lane diagnostics")
    p.add_argument("--dump-tracks", action="store_true", help="dump per-frame track state")
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("evaluate", help="score a predicted document against GT")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--json-out", help="write the report JSON here")
    p.add_argument(
        "--report-dir",
        help="write report.txt/json, CSV tables and figures into this directory",
    )
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("replay", help="apply a correction diff to a document")
    p.add_argument("--original", required=True, help="document the diff was made against")
    p.add_argument("--diff", required=True, help='edit log JSON ({"edits":[...]})')
    p.add_argument("--out", help="write the replayed document here")
    p.add_argument("--check", help="exported document to compare byte-for-byte")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("synth", help="generate a deterministic synthetic fixture set")
    p.add_argument("--config", required=True, help="synth config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INTERNAL_ERRORS as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
