"""Table emission for evaluation results (Markdown, CSV, JSON)."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import asdict
from enum import Enum
from pathlib import Path
from typing import Sequence

from .guidelines import RuleAggregate
from .harness import METRIC_TITLES, METRICS, ReportSet
from .stats import Interval


class ReportFormat(str, Enum):
    MARKDOWN = "markdown"
    CSV = "csv"
    JSON = "json"


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "model"


def _cell(iv: Interval) -> str:
    return f"{iv.point:.2f} [{iv.low:.2f}, {iv.high:.2f}]"


def _markdown(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _interval_columns() -> list[str]:
    return [f"{m}_{part}" for m in METRICS for part in ("mean", "low", "high")]


def _interval_values(intervals: dict[str, Interval]) -> list[float]:
    return [v for m in METRICS for v in (intervals[m].point, intervals[m].low, intervals[m].high)]


def _guideline_rows_md(aggs: Sequence[RuleAggregate]) -> list[list[str]]:
    rows = []
    for a in aggs:
        if a.pass_percent is None:
            rows.append([str(a.rule_id), a.name, "0", "0", "Missing", "-"])
        else:
            rows.append([
                str(a.rule_id), a.name, str(a.ok), str(a.ko),
                f"{a.pass_percent:.2f}", f"[{a.wilson_low:.1f}, {a.wilson_high:.1f}]",
            ])
    return rows


_GUIDELINE_CSV_HEADER = ["rule_id", "guideline", "ok", "ko", "missing", "pass_percent", "wilson_low", "wilson_high"]
_GUIDELINE_MD_HEADER = ["ID", "Guideline", "OK", "KO", "Pass (%)", "95% Wilson CI"]


def _guideline_rows_csv(aggs: Sequence[RuleAggregate]) -> list[list]:
    def blank(v: float | None) -> float | str:
        return "" if v is None else v

    return [
        [a.rule_id, a.name, a.ok, a.ko, a.missing, blank(a.pass_percent), blank(a.wilson_low), blank(a.wilson_high)]
        for a in aggs
    ]


def guideline_table(aggs: Sequence[RuleAggregate], fmt: ReportFormat | str) -> str:
    """One guideline aggregate table as Markdown or CSV text."""
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.CSV:
        return _csv(_GUIDELINE_CSV_HEADER, _guideline_rows_csv(aggs))
    if fmt is ReportFormat.MARKDOWN:
        return _markdown(_GUIDELINE_MD_HEADER, _guideline_rows_md(aggs))
    raise ValueError("guideline tables are emitted as Markdown or CSV")


def _tables(rs: ReportSet) -> dict[str, tuple[list[str], list[list], list[list[str]], list[str]]]:
    """name -> (CSV header, CSV rows, Markdown rows, Markdown header)."""
    titles = [METRIC_TITLES[m] for m in METRICS]
    tables = {}
    tables["macro"] = (
        ["model"] + _interval_columns(),
        [[name] + _interval_values(rep.macro) for name, rep in rs.models.items()],
        [[name] + [_cell(rep.macro[m]) for m in METRICS] for name, rep in rs.models.items()],
        ["Models"] + titles,
    )
    used: set[str] = set()
    for name, rep in rs.models.items():
        base = tag = slug(name)
        suffix = 2
        while tag in used:
            tag = f"{base}_{suffix}"
            suffix += 1
        used.add(tag)
        domains = sorted(rep.per_domain)
        tables[f"per_domain_{tag}"] = (
            ["domain"] + _interval_columns(),
            [[d] + _interval_values(rep.per_domain[d]) for d in domains],
            [[d] + [_cell(rep.per_domain[d][m]) for m in METRICS] for d in domains],
            ["Domain"] + titles,
        )
        if rep.guidelines:
            tables[f"guidelines_{tag}"] = (
                _GUIDELINE_CSV_HEADER,
                _guideline_rows_csv(rep.guidelines),
                _guideline_rows_md(rep.guidelines),
                _GUIDELINE_MD_HEADER,
            )
    if rs.ranking:
        df = next(iter(rs.ranking.values())).df
        tables["ranking"] = (
            ["metric", "chi2", "df", "p_value", "w", "k_models", "n_instances"],
            [[m, r.chi2, r.df, r.p_value, r.w, r.k_treatments, r.n_blocks] for m, r in rs.ranking.items()],
            [
                [METRIC_TITLES[m], f"{r.chi2:.2f}", "< 0.001" if r.p_value < 0.001 else f"{r.p_value:.3f}",
                 f"{r.w:.2f}", str(r.k_treatments), str(r.n_blocks)]
                for m, r in rs.ranking.items()
            ],
            ["Metric", f"χ²_F (df = {df})", "p-value", "W", "k models", "n instances"],
        )
    return tables


def _json_payload(rs: ReportSet) -> dict:
    def interval(iv: Interval) -> dict:
        return asdict(iv)

    return {
        "models": {
            name: {
                "macro": {m: interval(rep.macro[m]) for m in METRICS},
                "per_domain": {d: {m: interval(iv[m]) for m in METRICS} for d, iv in sorted(rep.per_domain.items())},
                "guidelines": [asdict(a) for a in rep.guidelines],
                "records": [asdict(b) for b in rep.bundles],
            }
            for name, rep in rs.models.items()
        },
        "ranking": None if rs.ranking is None else {m: asdict(r) for m, r in rs.ranking.items()},
        "ranking_ids": list(rs.ranking_ids),
    }


def emit_reports(rs: ReportSet, fmt: ReportFormat | str, out_dir: str | Path) -> list[Path]:
    """Write the report tables into ``out_dir`` and return the written paths."""
    fmt = ReportFormat(fmt)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt is ReportFormat.JSON:
        path = out / "report.json"
        path.write_text(json.dumps(_json_payload(rs), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return [path]
    for name, (csv_header, csv_rows, md_rows, md_header) in _tables(rs).items():
        if fmt is ReportFormat.CSV:
            path = out / f"{name}.csv"
            path.write_text(_csv(csv_header, csv_rows), encoding="utf-8")
        else:
            path = out / f"{name}.md"
            path.write_text(_markdown(md_header, md_rows), encoding="utf-8")
        paths.append(path)
    return paths
