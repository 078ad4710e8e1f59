"""Evaluation report rendering: text table, JSON, CSV, and figures."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import PRPoint, TIMING_STAGES, TimingTable, timing_report


def _r2(x: float | None) -> float | None:
    return None if x is None else round(x, 2)


@dataclass
class MetricsReport:
    map: float | None = None
    per_class_ap: dict[str, float | None] = field(default_factory=dict)
    per_class_accuracy: dict[str, float | None] = field(default_factory=dict)
    mean_accuracy: float | None = None
    lane_accuracy: float | None = None
    mota: float | None = None
    motp: float | None = None
    mt: float | None = None
    ml: float | None = None
    property_accuracy: dict[str, float | None] = field(default_factory=dict)
    pr_curves: dict[str, list[PRPoint]] = field(default_factory=dict)
    timing: TimingTable | None = None

    def to_json_dict(self) -> dict:
        out = {
            "map": _r2(self.map),
            "per_class_ap": {k: _r2(v) for k, v in self.per_class_ap.items()},
            "per_class_accuracy": {
                k: _r2(v) for k, v in self.per_class_accuracy.items()
            },
            "mean_accuracy": _r2(self.mean_accuracy),
            "lane_accuracy": _r2(self.lane_accuracy),
            "mota": _r2(self.mota),
            "motp": _r2(self.motp),
            "mt": _r2(self.mt),
            "ml": _r2(self.ml),
            "property_accuracy": {
                k: _r2(v) for k, v in self.property_accuracy.items()
            },
        }
        if self.timing is not None:
            out["timing_seconds"] = {
                s: round(self.timing.durations[s], 2) for s in TIMING_STAGES
            }
            out["timing_total_seconds"] = round(self.timing.total(), 2)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.2f}"

        lines = ["Evaluation report", "=" * 17]
        lines.append(f"mAP:            {fmt(self.map)}")
        lines.append(f"mean accuracy:  {fmt(self.mean_accuracy)}")
        lines.append(f"lane accuracy:  {fmt(self.lane_accuracy)}")
        lines.append(
            f"MOTA {fmt(self.mota)}  MOTP {fmt(self.motp)}  "
            f"MT {fmt(self.mt)}  ML {fmt(self.ml)}"
        )
        if self.per_class_ap:
            lines.append("")
            lines.append(f"{'class':<20}{'AP':>10}{'accuracy':>12}")
            for cls in self.per_class_ap:
                lines.append(
                    f"{cls:<20}{fmt(self.per_class_ap[cls]):>10}"
                    f"{fmt(self.per_class_accuracy.get(cls)):>12}"
                )
        if self.property_accuracy:
            lines.append("")
            lines.append(f"{'property':<20}{'accuracy':>10}")
            for name, value in self.property_accuracy.items():
                lines.append(f"{name:<20}{fmt(value):>10}")
        if self.timing is not None:
            lines.append("")
            lines.append(timing_report(self.timing))
        return "\n".join(lines)


def write_report(report: MetricsReport, out_dir: str | Path) -> None:
    """Write report.txt / report.json, the delimited tables, and figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(report.to_text() + "\n")
    (out_dir / "report.json").write_text(report.to_json() + "\n")

    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        d = report.to_json_dict()
        for key in ("map", "mean_accuracy", "lane_accuracy", "mota", "motp", "mt", "ml"):
            writer.writerow([key, "" if d[key] is None else d[key]])
        for name, value in d["property_accuracy"].items():
            writer.writerow([f"property_{name}", "" if value is None else value])

    with open(out_dir / "per_class.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "ap", "accuracy"])
        for cls in report.per_class_ap:
            ap = _r2(report.per_class_ap[cls])
            acc = _r2(report.per_class_accuracy.get(cls))
            writer.writerow([cls, "" if ap is None else ap, "" if acc is None else acc])

    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    _plot_pr_curves(report, fig_dir / "pr_curves.png")
    _plot_per_class_ap(report, fig_dir / "per_class_ap.png")
    if report.timing is not None:
        _plot_timing(report.timing, fig_dir / "timing.png")


def _plot_pr_curves(report: MetricsReport, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    for cls, curve in report.pr_curves.items():
        if not curve:
            continue
        ax.plot([p.recall for p in curve], [p.precision for p in curve], label=cls)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title("Precision-recall per class")
    if report.pr_curves:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_per_class_ap(report: MetricsReport, path: Path) -> None:
    classes = [c for c, v in report.per_class_ap.items() if v is not None]
    values = [report.per_class_ap[c] for c in classes]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(classes)), values)
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels(classes, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("AP")
    ax.set_title("Average precision per class")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_timing(timing: TimingTable, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    values = [timing.durations[s] for s in TIMING_STAGES]
    ax.bar(range(len(TIMING_STAGES)), values)
    ax.set_xticks(range(len(TIMING_STAGES)))
    ax.set_xticklabels(TIMING_STAGES, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("seconds")
    ax.set_title("Stage timing")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
