import csv
import json
from pathlib import Path

import pytest

from bpmneval.cli import main
from bpmneval.dataset import read_jsonl, write_jsonl
from bpmneval.graph_core import parse_dot
from graphgen import chain_dot, synthetic_corpus

SAMPLE_PATH = Path(__file__).parent / "data" / "sample_graph.dot"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_sanitize_and_parse(tmp_path, capsys):
    raw = tmp_path / "raw.dot"
    raw.write_text("```dot\ndigraph g {{ a -> b [label='',] }}\n```")
    fixed = tmp_path / "fixed.dot"
    assert run(capsys, "sanitize", raw, "-o", fixed)[0] == 0
    assert fixed.read_text() == 'digraph g { a -> b [label=""] }\n'
    code, out, _ = run(capsys, "parse", SAMPLE_PATH, "--stats")
    assert code == 0
    assert json.loads(out) == {"node_count": 7, "edge_count": 7, "gateway_count": 2, "orientation": "LR"}
    code, out, _ = run(capsys, "parse", fixed)
    assert json.loads(out)["edges"] == [{"source": "a", "target": "b", "label": ""}]


def test_ged_command(tmp_path, capsys):
    ref, cand = tmp_path / "ref.dot", tmp_path / "cand.dot"
    ref.write_text("digraph { a -> b }")
    cand.write_text("digraph { a; b }")
    code, out, _ = run(capsys, "ged", ref, cand, "--budget-states", 50, "--budget-ms", 500)
    assert code == 0
    result = json.loads(out)
    assert result["cost"] == 1.0 and result["exact"] is True
    assert result["r_ged_percent"] == 80.0


def test_export(tmp_path, capsys):
    out = tmp_path / "model.bpmn"
    assert run(capsys, "export", SAMPLE_PATH, "-o", out)[0] == 0
    text = out.read_text(encoding="utf-8")
    assert "http://www.omg.org/spec/BPMN/20100524/MODEL" in text
    assert text.count("<bpmn:parallelGateway") == 2


def test_guidelines_directory(tmp_path, capsys):
    src = tmp_path / "diagrams"
    src.mkdir()
    (src / "sample.dot").write_text(SAMPLE_PATH.read_text())
    (src / "broken.dot").write_text("this is not a diagram")
    report = tmp_path / "out" / "guidelines.json"
    assert run(capsys, "guidelines", src, "--report", report)[0] == 0
    data = json.loads(report.read_text())
    verdicts = {d["id"]: d["verdicts"] for d in data["diagrams"]}
    assert set(verdicts["broken"].values()) == {"Missing"}
    assert verdicts["sample"]["8"] == "Violated" and verdicts["sample"]["24"] == "Well Done"
    assert report.with_suffix(".md").read_text().startswith("| ID | Guideline |")
    rows = list(csv.DictReader(report.with_suffix(".csv").open()))
    assert rows[0]["missing"] == "1" and rows[0]["ok"] == "1"


def test_guidelines_jsonl(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"id": "a", "domain": "d", "description": "x", "reference_dot": chain_dot(4)}) + "\n")
    report = tmp_path / "g.json"
    assert run(capsys, "guidelines", corpus, "--report", report)[0] == 0
    assert json.loads(report.read_text())["diagrams"][0]["id"] == "a"


def test_guidelines_empty_source(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = run(capsys, "guidelines", empty, "--report", tmp_path / "r.json")
    assert code == 1 and "no diagrams" in err


def test_stats_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "stats", "wilson", 79, 179)
    interval = json.loads(out)
    assert code == 0 and round(interval["low"], 4) == 0.3706 and round(interval["high"], 4) == 0.5146
    matrix = tmp_path / "m.csv"
    matrix.write_text("m1,m2,m3\n1,2,3\n10,20,30\n")
    result = json.loads(run(capsys, "stats", "friedman", matrix)[1])
    assert result["chi2"] == pytest.approx(4.0) and result["w"] == pytest.approx(1.0)
    values = tmp_path / "v.csv"
    values.write_text("value\n5\n5\n5\n")
    ci = json.loads(run(capsys, "stats", "bootstrap", values, "--seed", 3)[1])
    assert (ci["point"], ci["low"], ci["high"]) == (5.0, 5.0, 5.0)


def test_stats_errors_are_reported(capsys):
    code, _, err = run(capsys, "stats", "wilson", 5, 3)
    assert code == 1 and "successes" in err


def test_filter_sample_and_corpus_stats(tmp_path, capsys):
    corpus = synthetic_corpus()
    corpus_path = tmp_path / "all.jsonl"
    extra = [
        json.dumps({"id": "bad", "domain": "x", "description": "d", "reference_dot": "digraph { a -> }"}),
        json.dumps({"id": "dup", "domain": "domain 0", "description": "d", "reference_dot": corpus[5].reference_dot}),
    ]
    write_jsonl(corpus_path, corpus)
    with corpus_path.open("a") as fh:
        fh.write("\n".join(extra) + "\n")
    kept, rejects = tmp_path / "kept.jsonl", tmp_path / "rejects.jsonl"
    assert run(capsys, "filter", corpus_path, "-o", kept, "--rejects", rejects)[0] == 0
    assert len(read_jsonl(kept)) == 450
    reasons = {json.loads(line)["id"]: json.loads(line)["reason"] for line in rejects.read_text().splitlines()}
    assert reasons == {"bad": "MalformedDot", "dup": "Duplicate"}

    sample = tmp_path / "seed180.jsonl"
    assert run(capsys, "sample", kept, "--per-bucket", 4, "--seed", 9, "-o", sample)[0] == 0
    first = sample.read_text()
    assert len(read_jsonl(sample)) == 180
    run(capsys, "sample", kept, "--per-bucket", 4, "--seed", 9, "-o", sample)
    assert sample.read_text() == first

    stats = json.loads(run(capsys, "corpus-stats", sample)[1])
    assert stats["records"] == 180
    nodes = [len(parse_dot(r.reference_dot).nodes) for r in read_jsonl(sample)]
    assert stats["mean_nodes"] == pytest.approx(sum(nodes) / 180)


def test_eval_command(tmp_path, capsys):
    records = synthetic_corpus(domains=2, per_domain=4)
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(corpus, records)
    cands = []
    for name, shift in (("m1", 0), ("m2", 1)):
        path = tmp_path / f"{name}.jsonl"
        with path.open("w") as fh:
            for i, r in enumerate(records):
                text = f"```dot\n{chain_dot(1 + (i + shift) % 4, tag=r.domain[-1] + ' ')}\n```"
                fh.write(json.dumps({"id": r.id, "candidate_dot": text, "model": name, "mode": "zero-shot"}) + "\n")
        cands.append(path)
    out = tmp_path / "report"
    code, stdout, _ = run(capsys, "eval", corpus, "--candidates", *cands, "--report-dir", out, "--seed", 1, "--resamples", 200)
    assert code == 0
    written = {Path(line).name for line in stdout.split()}
    assert {"macro.md", "macro.csv", "report.json", "ranking.md", "guidelines_m1.csv"} <= written
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    run(capsys, "eval", corpus, "--candidates", *cands, "--report-dir", out, "--seed", 1, "--resamples", 200)
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before


def test_eval_rejects_incomplete_candidates(tmp_path, capsys):
    records = synthetic_corpus(domains=1, per_domain=3)
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(corpus, records)
    partial = tmp_path / "p.jsonl"
    partial.write_text(json.dumps({"id": records[0].id, "candidate_dot": "digraph {}"}) + "\n")
    code, _, err = run(capsys, "eval", corpus, "--candidates", partial, "--report-dir", tmp_path / "o")
    assert code == 1 and "lacks candidates" in err


def test_infer_command(tmp_path, capsys, monkeypatch):
    from test_harness import chat, stub_server

    records = synthetic_corpus(domains=1, per_domain=3)
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(corpus, records)
    out = tmp_path / "cands.jsonl"
    with stub_server(lambda n, body: (200, chat("```dot\ndigraph { a -> b }\n```"))) as (server, url):
        code, _, _ = run(capsys, "infer", corpus, "--mode", "assisted", "--endpoint", url, "--model", "stub", "-o", out)
    assert code == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["id"] for r in rows] == [r.id for r in records]
    assert {r["mode"] for r in rows} == {"assisted"}
    assert "Gather Requirements" in server.requests[0][0]["messages"][0]["content"]


def test_missing_file_is_an_error(capsys, tmp_path):
    code, _, err = run(capsys, "parse", tmp_path / "nope.dot")
    assert code == 1 and "nope.dot" in err
