"""CSV aggregation over persisted runs, plus report and chart emission.

Charts are hand-rolled SVG (axes, bars, polylines only); the aggregates
they display are simple per-group statistics.
"""

from __future__ import annotations

import csv
import logging
import statistics
from dataclasses import dataclass
from pathlib import Path

from .artifacts import iter_run_files, load_run
from .records import RunRecord
from .safety import consecutive_distances
from .scenario import PIPELINE_ORDER

logger = logging.getLogger(__name__)

CSV_NAMES = ("penalty.csv", "consistency.csv", "drift.csv", "overhead.csv",
             "conflict.csv")

_HEADERS = {
    "penalty.csv": ["experiment_id", "persona_set_id", "question_id", "run_index",
                    "penalty_score"],
    "consistency.csv": ["experiment_id", "persona_set_id", "question_id", "run_index",
                        "consistency_score"],
    "drift.csv": ["experiment_id", "persona_set_id", "question_id", "from_run",
                  "to_run", "distance", "agent_role"],
    "overhead.csv": ["experiment_id", "persona_set_id", "question_id", "run_index",
                     "coordination_overhead"],
    "conflict.csv": ["experiment_id", "persona_set_id", "question_id", "run_index",
                     "conflict_rate"],
}


def _fmt(value) -> str:
    if isinstance(value, float):
        if value == 0.0:
            return "0"
        return format(value, ".17g")
    return str(value)


@dataclass
class AggregateResult:
    csv_paths: dict  # name -> Path
    records: int
    corrupt: list    # paths that failed to load

    @property
    def ok(self) -> bool:
        return not self.corrupt


def aggregate_csv(root: str | Path, out_dir: str | Path | None = None) -> AggregateResult:
    """Aggregate every persisted run under root into the five metric CSVs.

    Corrupt artifacts are skipped with a logged error and reported in the
    result so the CLI can exit nonzero.
    """
    root = Path(root)
    out_dir = Path(out_dir) if out_dir else root
    out_dir.mkdir(parents=True, exist_ok=True)

    records: list[RunRecord] = []
    corrupt: list[Path] = []
    for path in iter_run_files(root):
        try:
            records.append(load_run(path))
        except Exception as exc:
            logger.error("corrupt artifact %s: %s", path, exc)
            corrupt.append(path)
    records.sort(key=lambda r: (r.persona_set_id, r.question_id, r.run_index))

    rows = {name: [] for name in CSV_NAMES}
    for rec in records:
        if rec.metrics is None:
            logger.warning("record %s/%s run %d has no metrics (status=%s); skipped",
                           rec.persona_set_id, rec.question_id, rec.run_index,
                           rec.status.value)
            continue
        base = [rec.experiment_id, rec.persona_set_id, rec.question_id, rec.run_index]
        rows["penalty.csv"].append(base + [rec.metrics.penalty_score])
        rows["consistency.csv"].append(base + [rec.metrics.consistency_score])
        rows["overhead.csv"].append(base + [rec.metrics.coordination_overhead])
        rows["conflict.csv"].append(base + [rec.metrics.conflict_rate])

    cells: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.persona_set_id, rec.question_id), []).append(rec)
    for (set_id, question_id), recs in sorted(cells.items()):
        recs = sorted(recs, key=lambda r: r.run_index)
        for role in PIPELINE_ORDER:
            vectors = [r.trajectory(role).output_embedding for r in recs]
            for t, distance in enumerate(consecutive_distances(vectors)):
                rows["drift.csv"].append([
                    recs[0].experiment_id, set_id, question_id,
                    recs[t].run_index, recs[t + 1].run_index, distance, role.value])
    rows["drift.csv"].sort(key=lambda r: (r[1], r[2], r[3], r[6]))

    paths = {}
    for name in CSV_NAMES:
        path = out_dir / name
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(_HEADERS[name])
            for row in rows[name]:
                writer.writerow([_fmt(v) for v in row])
        paths[name] = path
    return AggregateResult(csv_paths=paths, records=len(records), corrupt=corrupt)


# ── svg charts ───────────────────────────────────────────────────────────────

_W, _H = 640, 360
_MARGIN = 50


def _scale(values: list[float]) -> tuple[float, float]:
    lo = min(0.0, min(values))
    hi = max(values)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<text x="{_W / 2:g}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_H - _MARGIN}" '
        f'stroke="black"/>',
    ]


def _y_pos(value: float, lo: float, hi: float) -> float:
    usable = _H - 2 * _MARGIN
    return _H - _MARGIN - (value - lo) / (hi - lo) * usable


def bar_chart_svg(labels: list[str], values: list[float], title: str) -> str:
    if not values:
        return _empty_chart(title)
    lo, hi = _scale(values)
    parts = _svg_header(title)
    parts.append(f'<text x="{_MARGIN - 8}" y="{_MARGIN}" text-anchor="end" '
                 f'font-size="10">{hi:.6g}</text>')
    n = len(values)
    span = (_W - 2 * _MARGIN) / n
    width = span * 0.7
    for i, (label, value) in enumerate(zip(labels, values)):
        x = _MARGIN + span * i + span * 0.15
        y = _y_pos(value, lo, hi)
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}" '
                     f'height="{_H - _MARGIN - y:.2f}" fill="steelblue"/>')
        parts.append(f'<text x="{x + width / 2:.2f}" y="{y - 4:.2f}" '
                     f'text-anchor="middle" font-size="9">{value:.6g}</text>')
        parts.append(f'<text x="{x + width / 2:.2f}" y="{_H - _MARGIN + 14:.2f}" '
                     f'text-anchor="middle" font-size="9">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def line_chart_svg(labels: list[str], values: list[float], title: str) -> str:
    if not values:
        return _empty_chart(title)
    lo, hi = _scale(values)
    parts = _svg_header(title)
    n = len(values)
    span = (_W - 2 * _MARGIN) / max(n - 1, 1)
    points = []
    for i, value in enumerate(values):
        x = _MARGIN + span * i
        y = _y_pos(value, lo, hi)
        points.append((x, y))
    poly = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    data = ",".join(f"{v:.6g}" for v in values)
    parts.append(f'<polyline points="{poly}" fill="none" stroke="darkorange" '
                 f'stroke-width="2" data-values="{data}"/>')
    for (x, y), value, label in zip(points, values, labels):
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="darkorange"/>')
        parts.append(f'<text x="{x:.2f}" y="{y - 8:.2f}" text-anchor="middle" '
                     f'font-size="9">{value:.6g}</text>')
        parts.append(f'<text x="{x:.2f}" y="{_H - _MARGIN + 14:.2f}" '
                     f'text-anchor="middle" font-size="9">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def _empty_chart(title: str) -> str:
    return "\n".join(_svg_header(title) + [
        f'<text x="{_W / 2:g}" y="{_H / 2:g}" text-anchor="middle" '
        f'font-size="12">no data</text>', "</svg>"])


# ── report emission ──────────────────────────────────────────────────────────

def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _stats_line(values: list[float]) -> str:
    return (f"mean {statistics.fmean(values):.6g}, "
            f"median {statistics.median(values):.6g}, "
            f"std {statistics.pstdev(values):.6g}, n={len(values)}")


def emit_report(csv_dir: str | Path, out_dir: str | Path) -> Path:
    """Markdown summary plus per-metric SVG charts; 'no data' on empty input."""
    csv_dir = Path(csv_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    penalty = _read_csv(csv_dir / "penalty.csv")
    consistency = _read_csv(csv_dir / "consistency.csv")
    drift = _read_csv(csv_dir / "drift.csv")
    overhead = _read_csv(csv_dir / "overhead.csv")
    conflict = _read_csv(csv_dir / "conflict.csv")

    report_path = out_dir / "report.md"
    if not penalty:
        report_path.write_text("# Safety report\n\nno data\n", encoding="utf-8")
        return report_path

    lines = ["# Safety report", ""]

    runs = sorted({int(r["run_index"]) for r in penalty})
    lines.append("## Analyzer penalty by run")
    lines.append("")
    lines.append("| run | mean | median | std | n |")
    lines.append("|-----|------|--------|-----|---|")
    run_means = []
    for run in runs:
        values = [float(r["penalty_score"]) for r in penalty
                  if int(r["run_index"]) == run]
        run_means.append(statistics.fmean(values))
        lines.append(f"| {run} | {run_means[-1]:.6g} | "
                     f"{statistics.median(values):.6g} | "
                     f"{statistics.pstdev(values):.6g} | {len(values)} |")
    lines.append("")

    by_set: dict[str, list[float]] = {}
    for r in penalty:
        by_set.setdefault(r["persona_set_id"], []).append(float(r["penalty_score"]))
    set_means = sorted(((statistics.fmean(v), k) for k, v in by_set.items()),
                       key=lambda mk: (-mk[0], mk[1]))
    lines.append("## Persona sets by mean penalty")
    lines.append("")
    top = set_means[:3]
    bottom = set_means[-3:] if len(set_means) > 3 else []
    lines.append("Top:")
    lines.extend(f"- {k}: {m:.6g}" for m, k in top)
    if bottom:
        lines.append("")
        lines.append("Bottom:")
        lines.extend(f"- {k}: {m:.6g}" for m, k in bottom)
    lines.append("")

    if consistency:
        values = [float(r["consistency_score"]) for r in consistency]
        lines.append("## Allocator-Coder consistency")
        lines.append("")
        lines.append(_stats_line(values))
        lines.append("")

    transition_labels: list[str] = []
    transition_means: list[float] = []
    if drift:
        coder_rows = [r for r in drift if r["agent_role"] == "Coder"]
        transitions = sorted({(int(r["from_run"]), int(r["to_run"]))
                              for r in coder_rows})
        lines.append("## Coder cross-run drift by transition")
        lines.append("")
        for frm, to in transitions:
            values = [float(r["distance"]) for r in coder_rows
                      if int(r["from_run"]) == frm and int(r["to_run"]) == to]
            transition_labels.append(f"r{frm}->r{to}")
            transition_means.append(statistics.fmean(values))
            lines.append(f"- r{frm}->r{to}: {_stats_line(values)}")
        lines.append("")

    if overhead:
        values = [float(r["coordination_overhead"]) for r in overhead]
        lines.append("## Coordination overhead")
        lines.append("")
        lines.append(_stats_line(values))
        lines.append("")
    if conflict:
        values = [float(r["conflict_rate"]) for r in conflict]
        lines.append("## Contextual conflict rate")
        lines.append("")
        lines.append(_stats_line(values))
        lines.append("")

    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    (out_dir / "penalty_by_run.svg").write_text(
        bar_chart_svg([f"run {r}" for r in runs], run_means,
                      "Mean analyzer penalty by run"), encoding="utf-8")
    set_labels = [k for _, k in set_means]
    (out_dir / "consistency_by_set.svg").write_text(
        bar_chart_svg([f"s{i + 1}" for i in range(len(set_labels))],
                      [statistics.fmean([float(r["consistency_score"])
                                         for r in consistency
                                         if r["persona_set_id"] == k])
                       for k in set_labels] if consistency else [],
                      "Mean consistency by persona set"), encoding="utf-8")
    (out_dir / "drift_by_transition.svg").write_text(
        line_chart_svg(transition_labels, transition_means,
                       "Mean Coder drift by run transition"), encoding="utf-8")
    return report_path
