import json
import warnings
from collections import Counter

import pytest

from bpmneval.dataset import (
    EvalRecord,
    FilterConfig,
    InsufficientBucket,
    RejectionReason,
    corpus_stats,
    count_sentences,
    difficulty_buckets,
    estimate_tokens,
    filter_corpus,
    instruction_tokens,
    nearest_rank,
    read_jsonl,
    split_corpus,
    stratified_sample,
    write_jsonl,
)
from bpmneval.graph_core import parse_dot
from bpmneval.stats import EmptyInput
from graphgen import chain_dot, synthetic_corpus


def rec(i, dot="digraph { a -> b }", desc="Do the thing.", domain="hr"):
    return EvalRecord(str(i), domain, desc, dot)


def test_estimate_tokens():
    assert estimate_tokens("") == 0
    assert estimate_tokens("hello world") == 3
    assert estimate_tokens(" ".join(["w"] * 2048)) == 2724
    assert estimate_tokens("anything", counter=len) == 8


def test_record_validation_and_jsonl(tmp_path):
    with pytest.raises(ValueError):
        EvalRecord("1", "", "d", "digraph {}")
    records = [rec(1), EvalRecord("2", "it", "Ünïcode.", "digraph {}", "cand")]
    path = tmp_path / "c.jsonl"
    write_jsonl(path, records)
    assert read_jsonl(path) == records
    assert "candidate_dot" not in json.loads(path.read_text().splitlines()[0])
    path.write_text(path.read_text() + records[0].to_json() + "\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_jsonl(path)


def test_filter_reasons():
    records = [
        rec(1),
        rec(2, dot="digraph { a -> }"),
        rec(3, dot="digraph {  a->b  }"),  # same canonical graph as 1
        rec(4, dot="digraph { a -> b; c }"),
        rec(5, desc=" ".join(["word"] * 1600)),
        rec(6, dot="digraph { x -> y }"),
        rec(7, dot="digraph { }"),
    ]
    kept, rejected = filter_corpus(records)
    assert [r.id for r in kept] == ["1", "6"]
    assert {r.id: reason for r, reason in rejected} == {
        "2": RejectionReason.MALFORMED_DOT,
        "3": RejectionReason.DUPLICATE,
        "4": RejectionReason.DISCONNECTED,
        "5": RejectionReason.OVER_TOKEN_LIMIT,
        "7": RejectionReason.DISCONNECTED,
    }


def test_filter_flags_and_isolation():
    records = [rec(1), rec(2), rec(3, dot="digraph { a -> b; c }")]
    kept, _ = filter_corpus(records, FilterConfig(drop_duplicates=False, drop_disconnected=False))
    assert len(kept) == 3
    kept, rejected = filter_corpus(records)
    assert filter_corpus(kept) == (kept, [])
    for record, reason in rejected:
        if reason is RejectionReason.DISCONNECTED:
            assert not parse_dot(record.reference_dot).is_weakly_connected()
        if reason is RejectionReason.DUPLICATE:
            alone, _ = filter_corpus([record])
            assert alone == [record]


def test_token_limit_boundary():
    prefix = instruction_tokens("")
    limit = prefix + 4  # room for exactly three words (ceil(3 * 1.33) = 4)
    ok, too_long = rec(1, desc="one two three"), rec(2, dot="digraph { x -> y }", desc="one two three four")
    kept, rejected = filter_corpus([ok, too_long], FilterConfig(token_limit=limit))
    assert kept == [ok]
    assert rejected == [(too_long, RejectionReason.OVER_TOKEN_LIMIT)]
    with pytest.raises(ValueError):
        FilterConfig(token_limit=0)


def test_nearest_rank():
    values = list(range(1, 31))
    assert nearest_rank(values, 33) == 10
    assert nearest_rank(values, 67) == 21
    assert nearest_rank([4], 33) == 4


def test_stratified_sample_synthetic_corpus():
    corpus = synthetic_corpus()
    chosen = stratified_sample(corpus, per_bucket=4, seed=7)
    assert len(chosen) == 180 == len({r.id for r in chosen})
    assert set(Counter(r.domain for r in chosen).values()) == {12}
    buckets = difficulty_buckets(corpus)
    index = {r.id: i for i, r in enumerate(corpus)}
    for groups in buckets.values():
        for members in groups.values():
            picked = [r for r in chosen if index[r.id] in members]
            assert len(picked) == 4
    assert stratified_sample(corpus, 4, seed=7) == chosen
    assert stratified_sample(corpus, 4, seed=8) != chosen


def test_buckets_respect_percentiles():
    corpus = synthetic_corpus(domains=1)
    counts = [len(parse_dot(r.reference_dot).nodes) for r in corpus]
    buckets = difficulty_buckets(corpus)["domain 0"]
    assert sorted(counts[i] for i in buckets["easy"]) == list(range(1, 11))
    assert sorted(counts[i] for i in buckets["medium"]) == list(range(11, 22))
    assert sorted(counts[i] for i in buckets["hard"]) == list(range(22, 31))


def test_short_bucket_warns_and_takes_all():
    corpus = [EvalRecord(str(k), "tiny", "x.", chain_dot(k)) for k in (2, 3, 4, 5, 6, 7)]
    with pytest.warns(InsufficientBucket):
        chosen = stratified_sample(corpus, per_bucket=4, seed=0)
    assert len(chosen) == 6


def test_sample_size_formula():
    corpus = synthetic_corpus(domains=3, per_domain=9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InsufficientBucket)
        chosen = stratified_sample(corpus, per_bucket=4, seed=1)
    buckets = difficulty_buckets(corpus)
    assert len(chosen) == sum(min(4, len(m)) for groups in buckets.values() for m in groups.values())


def test_split_corpus():
    corpus = synthetic_corpus(domains=2, per_domain=10)
    train, val, test = split_corpus(corpus, seed=3)
    assert (len(train), len(val), len(test)) == (16, 2, 2)
    assert sorted(r.id for r in train + val + test) == sorted(r.id for r in corpus)
    assert split_corpus(corpus, seed=3) == (train, val, test)


def test_sentences_and_stats():
    assert count_sentences("One. Two? Three! ...") == 3
    assert count_sentences("no terminator") == 0
    sample = open(__file__.replace("test_dataset.py", "data/sample_graph.dot"), encoding="utf-8").read()
    stats = corpus_stats([EvalRecord("1", "it", "First step. Second step.", sample)])
    assert (stats.mean_nodes, stats.mean_edges, stats.mean_gateways) == (7, 7, 2)
    assert (stats.mean_words, stats.mean_sentences) == (4, 2)
    two = corpus_stats([EvalRecord("a", "x", "s.", chain_dot(10)), EvalRecord("b", "x", "s.", chain_dot(14))])
    assert two.mean_nodes == 12.0
    with pytest.raises(EmptyInput):
        corpus_stats([])
