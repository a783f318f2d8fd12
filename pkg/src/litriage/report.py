"""Report rendering: one markdown document plus SVG charts and CSV sidecars.

Every number in the document is also emitted as CSV. Chart output is
deterministic (fixed SVG hash salt, no embedded date) so regenerating a
report from the same artifacts is byte-identical except for the single
``Generated:`` timestamp line.
"""

from __future__ import annotations

import csv
import datetime
import re
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DataError
from .metrics import EvalReport
from .trends import CATEGORY_AXIS, YEAR_AXIS, StageTiming, TrendSeries, timing_table

SVG_HASH_SALT = "litriage"

CATEGORY_TRENDS_CSV = "category_trends.csv"
TIME_TRENDS_CSV = "time_trends.csv"
TIMINGS_CSV = "timings.csv"
METRICS_CSV = "metrics.csv"
REPORT_FILE = "report.md"

TIMESTAMP_PREFIX = "Generated: "


def slugify(name: str) -> str:
    slug = re.sub(r"[^0-9a-z]+", "_", name.casefold()).strip("_")
    return slug or "group"


def chart_filename(series: TrendSeries) -> str:
    return f"{slugify(series.group)}_{series.axis}.svg"


def _save_svg(fig, path: Path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_chart(series: TrendSeries, out_dir: Path) -> Path:
    """One SVG per trend series: bars for category counts, one line per
    category for year series."""
    path = out_dir / chart_filename(series)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    if series.axis == CATEGORY_AXIS:
        totals = series.category_totals()
        ax.bar(range(len(series.categories)), totals, color="#4878a8")
        ax.set_xticks(range(len(series.categories)))
        ax.set_xticklabels(series.categories, rotation=20, ha="right")
        ax.set_ylabel("articles")
    else:
        for j, category in enumerate(series.categories):
            column = [row[j] for row in series.counts]
            if not any(column):
                continue
            ax.plot(series.years, column, marker="o", label=category)
        ax.legend(fontsize=8)
        ax.set_xlabel("year")
        ax.set_ylabel("articles")
    ax.set_title(f"{series.group} ({series.axis})")
    fig.tight_layout()
    _save_svg(fig, path)
    return path


def write_category_trends_csv(series_list: Sequence[TrendSeries], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "category", "count"])
        for series in series_list:
            if series.axis != CATEGORY_AXIS:
                continue
            for category, count in zip(series.categories, series.category_totals()):
                writer.writerow([series.group, category, count])


def read_category_trends_csv(path: str | Path) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["group"], {})[row["category"]] = int(row["count"])
    return out


def write_time_trends_csv(series_list: Sequence[TrendSeries], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "year", "category", "count"])
        for series in series_list:
            if series.axis != YEAR_AXIS:
                continue
            for year, row in zip(series.years, series.counts):
                for category, count in zip(series.categories, row):
                    writer.writerow([series.group, year, category, count])


def read_time_trends_csv(path: str | Path) -> dict[str, dict[tuple[int, str], int]]:
    out: dict[str, dict[tuple[int, str], int]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["group"], {})[(int(row["year"]), row["category"])] = int(row["count"])
    return out


def write_timings_csv(timings: Sequence[StageTiming], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "records", "minutes", "records_per_min"])
        for t in timings:
            rate = f"{t.records_per_min:.4f}" if t.records_per_min is not None else ""
            writer.writerow([t.stage, t.records, f"{t.minutes:.4f}", rate])


def read_timings_csv(path: str | Path) -> list[StageTiming]:
    timings = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            timings.append(
                StageTiming(
                    stage=row["stage"],
                    seconds=float(row["minutes"]) * 60.0,
                    records=int(row["records"]),
                )
            )
    return timings


def _fmt(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def metrics_markdown(report: EvalReport) -> list[str]:
    """Metric table in the column order Ac, F1, AUC, Pv, Re."""
    lines = [
        "| row | support | Ac | F1 | AUC | Pv | Re |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    lines.append(
        "| aggregate | {n} | {ac} | {f1} | {auc} | {pv} | {re} |".format(
            n=report.record_count,
            ac=_fmt(report.accuracy),
            f1=_fmt(report.f1),
            auc=_fmt(report.auc),
            pv=_fmt(report.precision),
            re=_fmt(report.recall),
        )
    )
    for m in report.per_label:
        lines.append(
            f"| {m.label} | {m.support} | - | {_fmt(m.f1)} | {_fmt(m.auc)} | "
            f"{_fmt(m.precision)} | {_fmt(m.recall)} |"
        )
    return lines


def write_metrics_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "input_mode", "row", "support", "ac", "f1", "auc", "pv", "re"])
        for report in reports:
            writer.writerow(
                [
                    report.group,
                    report.input_mode,
                    "aggregate",
                    report.record_count,
                    _fmt(report.accuracy),
                    _fmt(report.f1),
                    _fmt(report.auc),
                    _fmt(report.precision),
                    _fmt(report.recall),
                ]
            )
            for m in report.per_label:
                writer.writerow(
                    [
                        report.group,
                        report.input_mode,
                        m.label,
                        m.support,
                        "",
                        _fmt(m.f1),
                        _fmt(m.auc),
                        _fmt(m.precision),
                        _fmt(m.recall),
                    ]
                )


def render_report(
    run_meta: Mapping[str, object],
    eval_reports: Sequence[EvalReport],
    trend_series: Sequence[TrendSeries],
    timings: Sequence[StageTiming],
    out_dir: str | Path,
) -> Path:
    """Write the report document, charts, and CSV sidecars into ``out_dir``.

    Requires at least one trend series or evaluation report.
    """
    if not eval_reports and not trend_series:
        raise DataError("nothing to report: no trend series and no evaluation reports")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["# Literature triage report", ""]
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    lines += [f"{TIMESTAMP_PREFIX}{stamp}", ""]

    lines += ["## Run", ""]
    for key in sorted(run_meta):
        lines.append(f"- {key}: {run_meta[key]}")
    lines.append("")

    if eval_reports:
        write_metrics_csv(eval_reports, out_dir / METRICS_CSV)
        lines += ["## Metrics", ""]
        for report in eval_reports:
            lines.append(f"### {report.group} [{report.input_mode}] ({report.mode})")
            lines.append("")
            lines += metrics_markdown(report)
            lines.append("")

    if trend_series:
        category_series = [s for s in trend_series if s.axis == CATEGORY_AXIS]
        year_series = [s for s in trend_series if s.axis == YEAR_AXIS]
        if category_series:
            write_category_trends_csv(category_series, out_dir / CATEGORY_TRENDS_CSV)
        if year_series:
            write_time_trends_csv(year_series, out_dir / TIME_TRENDS_CSV)
        lines += ["## Trends", ""]
        for series in trend_series:
            chart = render_chart(series, out_dir)
            lines.append(f"### {series.group} ({series.axis})")
            lines.append("")
            lines.append(f"![{series.group} {series.axis}]({chart.name})")
            lines.append("")
            if series.axis == CATEGORY_AXIS:
                lines.append("| category | count |")
                lines.append("| --- | --- |")
                for category, count in zip(series.categories, series.category_totals()):
                    lines.append(f"| {category} | {count} |")
                if series.tied_records:
                    lines.append("")
                    lines.append(f"Tie-broken records: {series.tied_records}")
            else:
                header = " | ".join(series.categories)
                lines.append(f"| year | {header} |")
                lines.append("| --- |" + " --- |" * len(series.categories))
                for year, row in zip(series.years, series.counts):
                    cells = " | ".join(str(v) for v in row)
                    lines.append(f"| {year} | {cells} |")
                if series.excluded_records:
                    lines.append("")
                    lines.append(f"Records outside the year range: {series.excluded_records}")
            lines.append("")

    if timings:
        # The classify stage owns timings.csv; only write one when rendering
        # from in-memory timings that were never persisted.
        if not (out_dir / TIMINGS_CSV).exists():
            write_timings_csv(timings, out_dir / TIMINGS_CSV)
        lines += ["## Timing", "", "```", timing_table(timings), "```", ""]

    path = out_dir / REPORT_FILE
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
