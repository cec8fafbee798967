"""Command line entry point: ``bpmneval <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from . import dataset, harness, stats
from .bpmn_export import ConversionError, to_bpmn_xml
from .graph_core import ParseError, graph_stats, parse_dot, sanitize_dot
from .graph_metrics import DEFAULT_BUDGET, SearchBudget, ged, r_ged
from .guidelines import GuidelineReport, aggregate_reports, verify_model
from .prompts import PromptMode
from .reports import ReportFormat, emit_reports, guideline_table

EXIT_FAILURE = 1


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj: object) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


def _budget(args: argparse.Namespace) -> SearchBudget:
    return SearchBudget(max_states=args.budget_states, max_ms=args.budget_ms)


def _load_graph(path: str):
    return parse_dot(sanitize_dot(_read(path)))


# ---------------------------------------------------------------------------


def cmd_sanitize(args: argparse.Namespace) -> int:
    out = sanitize_dot(_read(args.input))
    _write(args.output, out if out.endswith("\n") else out + "\n")
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    g = _load_graph(args.input)
    if args.stats:
        _dump({**graph_stats(g)._asdict(), "orientation": g.orientation})
    else:
        _dump({
            "orientation": g.orientation,
            "nodes": [{"id": n.id, "kind": str(n.kind), "label": n.label} for n in g.nodes],
            "edges": [e._asdict() for e in g.edges],
        })
    return 0


def cmd_ged(args: argparse.Namespace) -> int:
    ref, cand = _load_graph(args.reference), _load_graph(args.candidate)
    budget = _budget(args)
    result = ged(ref, cand, budget)
    score = r_ged(ref, cand, budget)
    _dump({
        "cost": result.cost,
        "exact": result.exact,
        "expanded_states": result.expanded_states,
        "r_ged_percent": round(score.percent, 4),
    })
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    doc = to_bpmn_xml(_load_graph(args.input))
    _write(args.output, doc.xml_text)
    return 0


def _guideline_inputs(source: Path) -> list[tuple[str, str]]:
    if source.is_dir():
        return [(p.stem, p.read_text(encoding="utf-8")) for p in sorted(source.glob("*.dot"))]
    items = []
    with source.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                text = row.get("candidate_dot")
                items.append((str(row["id"]), text if text is not None else row["reference_dot"]))
    return items


def _verify_text(diagram_id: str, text: str, last_block: bool) -> GuidelineReport:
    try:
        graph = parse_dot(harness.extract_dot(text, last=last_block))
    except (harness.NoDiagramFound, ParseError):
        graph = None
    return verify_model(graph, diagram_id)


def cmd_guidelines(args: argparse.Namespace) -> int:
    items = _guideline_inputs(Path(args.source))
    if not items:
        print(f"no diagrams found in {args.source}", file=sys.stderr)
        return EXIT_FAILURE
    reports = [_verify_text(i, text, args.last_block) for i, text in items]
    aggregates = aggregate_reports(reports)
    payload = {
        "diagrams": [
            {
                "id": r.diagram_id,
                "verdicts": {str(k): v.value for k, v in r.verdicts.items()},
                "notes": {str(k): v for k, v in r.notes.items()},
            }
            for r in reports
        ],
        "aggregate": [{**asdict(a), "name": a.name} for a in aggregates],
    }
    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    report.with_suffix(".csv").write_text(guideline_table(aggregates, ReportFormat.CSV), encoding="utf-8")
    report.with_suffix(".md").write_text(guideline_table(aggregates, ReportFormat.MARKDOWN), encoding="utf-8")
    return 0


def _numeric_rows(path: str) -> list[list[float]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if lineno == 0:
                    continue  # header
                raise
    return rows


def cmd_stats(args: argparse.Namespace) -> int:
    if args.stats_command == "friedman":
        result = stats.friedman_test(_numeric_rows(args.matrix))
        _dump(asdict(result))
    elif args.stats_command == "wilson":
        _dump(asdict(stats.wilson_interval(args.successes, args.trials, args.confidence)))
    else:
        values = [v for row in _numeric_rows(args.values) for v in row]
        ci = stats.bootstrap_ci(values, resamples=args.resamples, confidence=args.confidence, seed=args.seed)
        _dump(asdict(ci))
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    records = dataset.read_jsonl(args.input)
    cfg = dataset.FilterConfig(
        token_limit=args.token_limit,
        drop_duplicates=not args.keep_duplicates,
        drop_disconnected=not args.keep_disconnected,
    )
    kept, rejected = dataset.filter_corpus(records, cfg)
    dataset.write_jsonl(args.output, kept)
    if args.rejects:
        with open(args.rejects, "w", encoding="utf-8") as fh:
            for rec, reason in rejected:
                row = json.loads(rec.to_json())
                row["reason"] = reason.value
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"kept {len(kept)} of {len(records)} records", file=sys.stderr)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    records = dataset.read_jsonl(args.input)
    chosen = dataset.stratified_sample(records, per_bucket=args.per_bucket, seed=args.seed)
    dataset.write_jsonl(args.output, chosen)
    print(f"sampled {len(chosen)} of {len(records)} records", file=sys.stderr)
    return 0


def cmd_corpus_stats(args: argparse.Namespace) -> int:
    _dump(asdict(dataset.corpus_stats(dataset.read_jsonl(args.input))))
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    records = dataset.read_jsonl(args.corpus)
    endpoint = harness.EndpointConfig(url=args.endpoint, model=args.model, timeout=args.timeout)
    cfg = harness.DecodingConfig(args.temperature, args.top_p, args.max_new_tokens)
    mode = PromptMode(args.mode)
    completions = harness.generate_all(records, endpoint, mode, cfg, max_in_flight=args.max_in_flight)
    harness.write_candidates(args.output, records, completions, mode, args.model)
    return 0


def _unique_names(runs: list[harness.ModelRun]) -> list[harness.ModelRun]:
    seen: dict[str, int] = {}
    out = []
    for run in runs:
        count = seen.get(run.name, 0)
        seen[run.name] = count + 1
        name = run.name if count == 0 else f"{run.name}_{count + 1}"
        out.append(harness.ModelRun(name, run.candidates, run.last_block))
    return out


def cmd_eval(args: argparse.Namespace) -> int:
    corpus = dataset.read_jsonl(args.corpus)
    runs = _unique_names([harness.load_candidates(p) for p in args.candidates])
    rs = harness.run_evaluation(
        corpus, runs, seed=args.seed, resamples=args.resamples, budget=_budget(args), workers=args.workers
    )
    formats = args.format or [f.value for f in ReportFormat]
    for fmt in formats:
        for path in emit_reports(rs, fmt, args.report_dir):
            print(path)
    return 0


# ---------------------------------------------------------------------------


def _add_budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget-states", type=int, default=DEFAULT_BUDGET.max_states)
    p.add_argument("--budget-ms", type=float, default=DEFAULT_BUDGET.max_ms)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpmneval", description="Evaluate DOT-encoded BPMN process models.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sanitize", help="repair common syntax slips in a DOT file")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("parse", help="parse a DOT file and print its process graph")
    p.add_argument("input")
    p.add_argument("--stats", action="store_true", help="print node, edge and gateway counts only")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("ged", help="graph edit distance and R-GED between two DOT files")
    p.add_argument("reference")
    p.add_argument("candidate")
    _add_budget(p)
    p.set_defaults(func=cmd_ged)

    p = sub.add_parser("export", help="convert a DOT file to BPMN 2.0 XML")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("guidelines", help="verify modeling guidelines on a directory of .dot files or a JSONL corpus")
    p.add_argument("source")
    p.add_argument("--report", required=True, help="JSON report path; .csv and .md aggregates are written beside it")
    p.add_argument("--last-block", action="store_true", help="take the last diagram in each output")
    p.set_defaults(func=cmd_guidelines)

    p = sub.add_parser("stats", help="standalone statistics")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    s = stats_sub.add_parser("friedman", help="Friedman test on a blocks x treatments CSV")
    s.add_argument("matrix")
    s = stats_sub.add_parser("wilson", help="Wilson score interval")
    s.add_argument("successes", type=int)
    s.add_argument("trials", type=int)
    s.add_argument("--confidence", type=float, default=0.95)
    s = stats_sub.add_parser("bootstrap", help="percentile bootstrap interval for the mean")
    s.add_argument("values")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resamples", type=int, default=stats.DEFAULT_RESAMPLES)
    s.add_argument("--confidence", type=float, default=0.95)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="drop malformed, duplicate, disconnected and oversized records")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rejects")
    p.add_argument("--token-limit", type=int, default=dataset.FilterConfig.token_limit)
    p.add_argument("--keep-duplicates", action="store_true")
    p.add_argument("--keep-disconnected", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sample", help="stratified sample per domain and difficulty tercile")
    p.add_argument("input")
    p.add_argument("--per-bucket", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("corpus-stats", help="mean graph and description sizes of a corpus")
    p.add_argument("input")
    p.set_defaults(func=cmd_corpus_stats)

    p = sub.add_parser("infer", help="generate candidates from a chat-completion endpoint")
    p.add_argument("corpus")
    p.add_argument("--mode", choices=[m.value for m in PromptMode], default=PromptMode.TUNED_ZERO_SHOT.value)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", default="default")
    p.add_argument("--temperature", type=float, default=harness.DecodingConfig.temperature)
    p.add_argument("--top-p", type=float, default=harness.DecodingConfig.top_p)
    p.add_argument("--max-new-tokens", type=int, default=harness.DecodingConfig.max_new_tokens)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score candidate files against a corpus and write reports")
    p.add_argument("corpus")
    p.add_argument("--candidates", nargs="+", required=True)
    p.add_argument("--report-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=stats.DEFAULT_RESAMPLES)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", action="append", choices=[f.value for f in ReportFormat])
    _add_budget(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, ConversionError, harness.HarnessError) as exc:
        print(f"bpmneval {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
