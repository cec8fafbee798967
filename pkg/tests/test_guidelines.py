import random
from pathlib import Path

import pytest
from hypothesis import given

from bpmneval.graph_core import Category, GatewayType, build_graph, parse_dot
from bpmneval.guidelines import (
    RULE_IDS,
    RuleStatus,
    aggregate_reports,
    pass_percent,
    verify_model,
)
from bpmneval.stats import EmptyInput
from graphgen import dot_documents, parse_quietly

SAMPLE = parse_dot((Path(__file__).parent / "data" / "sample_graph.dot").read_text(encoding="utf-8"))
OK, KO, MISSING = RuleStatus.WELL_DONE, RuleStatus.VIOLATED, RuleStatus.MISSING


def xor_diagram(with_split: bool, n_extra: int = 0, degenerate: bool = False):
    """start -> t1 -> [XOR split -> t2|t3 -> XOR join] -> end, optionally padded."""
    nodes = [("START_NODE", Category.START_EVENT, None, ""), ("t1", Category.ACTIVITY, None, "Receive")]
    edges = [("START_NODE", "t1", None)]
    last = "t1"
    if with_split:
        nodes += [
            ("XOR_S", Category.GATEWAY, GatewayType.XOR, "x"),
            ("t2", Category.ACTIVITY, None, "Accept"),
            ("t3", Category.ACTIVITY, None, "Reject"),
            ("XOR_J", Category.GATEWAY, GatewayType.XOR, "x"),
        ]
        edges += [("t1", "XOR_S", None), ("XOR_S", "t2", None), ("XOR_S", "t3", None), ("t2", "XOR_J", None), ("t3", "XOR_J", None)]
        last = "XOR_J"
    for i in range(n_extra):
        nodes.append((f"p{i}", Category.ACTIVITY, None, f"Pad {i}"))
        edges.append((last, f"p{i}", None))
        last = f"p{i}"
    if degenerate:
        nodes.append(("AND_D", Category.GATEWAY, GatewayType.AND, "+"))
        edges.append((last, "AND_D", None))
        last = "AND_D"
    nodes.append(("END_NODE", Category.END_EVENT, None, ""))
    edges.append((last, "END_NODE", None))
    return build_graph(nodes, edges, "LR")


def test_sample_graph_verdicts():
    report = verify_model(SAMPLE, "sample")
    assert set(report.verdicts) == set(RULE_IDS)
    assert report.verdicts[8] is KO
    others = {r: v for r, v in report.verdicts.items() if r != 8}
    assert all(v is OK for v in others.values())
    assert not report.missing
    assert set(report.notes) == set(RULE_IDS)


def test_degenerate_gateway_violates_rule_20():
    assert verify_model(xor_diagram(False)).verdicts[20] is OK
    assert verify_model(xor_diagram(False, degenerate=True)).verdicts[20] is KO


def test_xor_split_drives_rules_22_and_34():
    without = verify_model(xor_diagram(False)).verdicts
    with_split = verify_model(xor_diagram(True)).verdicts
    assert without[22] is OK and without[34] is OK
    assert with_split[22] is KO and with_split[34] is KO
    assert with_split[18] is OK and with_split[16] is OK


def test_implicit_split_and_unbalanced_gateways():
    g = parse_dot('digraph { rankdir=LR; a -> b; a -> c; XOR_1 [shape=diamond label="x"]; b -> XOR_1; XOR_1 -> d; XOR_1 -> e }')
    v = verify_model(g).verdicts
    assert v[16] is KO  # activity a splits without a gateway
    assert v[18] is KO  # one XOR split, no XOR join


def test_size_threshold():
    small = xor_diagram(False, n_extra=28)  # 31 nodes
    big = xor_diagram(False, n_extra=29)
    assert verify_model(small).verdicts[2] is OK and verify_model(small).verdicts[3] is OK
    assert verify_model(big).verdicts[2] is KO and verify_model(big).verdicts[3] is KO
    assert verify_model(big, size_threshold=40).verdicts[2] is OK


def test_orientation_rule():
    g = parse_dot("digraph { a -> b }")
    assert verify_model(g).verdicts[47] is KO
    assert verify_model(parse_dot("digraph { rankdir=TB; a -> b }")).verdicts[47] is OK
    mixed = parse_dot("digraph { rankdir=TB; rankdir=LR; a -> b }")
    assert verify_model(mixed).verdicts[47] is KO


def test_unlabelled_activity():
    g = build_graph([("a", Category.ACTIVITY, None, "  ")], [], "LR")
    assert verify_model(g).verdicts[30] is KO


def test_conversion_failure_is_all_missing():
    for g in (None, build_graph([("a", Category.ACTIVITY, None, "bad\x01")], [], "LR")):
        report = verify_model(g, "x")
        assert all(v is MISSING for v in report.verdicts.values())
        assert report.missing


@given(dot_documents())
def test_tie_law_and_missing_propagation(text):
    report = verify_model(parse_quietly(text))
    assert report.verdicts[22] is report.verdicts[34]
    assert report.verdicts[24] is OK
    statuses = set(report.verdicts.values())
    assert MISSING not in statuses or statuses == {MISSING}


def test_pass_percent_table_values():
    cases = {(179, 0): 100.0, (0, 179): 0.0, (173, 6): 96.65, (175, 4): 97.77, (178, 1): 99.44, (79, 100): 44.13}
    for (ok, ko), expected in cases.items():
        assert round(pass_percent(ok, ko), 2) == expected
    assert pass_percent(0, 0) is None


def test_aggregate_counts_and_wilson():
    reports = [verify_model(xor_diagram(i < 79), str(i)) for i in range(179)]
    aggs = {a.rule_id: a for a in aggregate_reports(reports)}
    assert (aggs[22].ok, aggs[22].ko) == (100, 79)
    assert round(aggs[22].pass_percent, 2) == 55.87
    assert aggs[22].pass_percent == aggs[34].pass_percent
    assert aggs[8].pass_percent == 0.0
    assert aggs[2].pass_percent == 100.0 and aggs[2].wilson_high == 100.0
    assert aggs[22].wilson_low < aggs[22].pass_percent < aggs[22].wilson_high
    assert aggs[24].name == "Use message flows"


def test_all_missing_aggregate():
    aggs = aggregate_reports([verify_model(None, "a"), verify_model(None, "b")])
    for a in aggs:
        assert (a.ok, a.ko, a.missing) == (0, 0, 2)
        assert a.pass_percent is None and a.wilson_low is None and a.wilson_high is None


def test_aggregate_requires_reports():
    with pytest.raises(EmptyInput):
        aggregate_reports([])


def test_corpus_tie_law():
    rng = random.Random(5)
    reports = [verify_model(xor_diagram(rng.random() < 0.45, n_extra=rng.randint(0, 5))) for _ in range(150)]
    aggs = {a.rule_id: a for a in aggregate_reports(reports)}
    assert aggs[22].pass_percent == aggs[34].pass_percent
    assert aggs[24].pass_percent == aggs[30].pass_percent == aggs[47].pass_percent == 100.0
