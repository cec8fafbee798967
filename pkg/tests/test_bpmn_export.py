import xml.etree.ElementTree as ET
from pathlib import Path

import pytest
from hypothesis import given, settings

from bpmneval.bpmn_export import (
    BPMN_NS,
    BpmnDocument,
    ConversionError,
    from_bpmn_xml,
    round_trip_check,
    to_bpmn_xml,
    xml_id,
)
from bpmneval.graph_core import Category, GatewayType, ParseError, build_graph, parse_dot
from graphgen import dot_documents, parse_quietly

SAMPLE = (Path(__file__).parent / "data" / "sample_graph.dot").read_text(encoding="utf-8")
NS = {"bpmn": BPMN_NS}


def elements(doc: BpmnDocument, tag: str) -> list[ET.Element]:
    return ET.fromstring(doc.xml_text.encode()).findall(f"bpmn:process/bpmn:{tag}", NS)


def test_chain_document():
    g = parse_dot("digraph { START_NODE [shape=circle]; t [label=Work shape=box]; END_NODE [shape=circle]; START_NODE -> t -> END_NODE }")
    doc = to_bpmn_xml(g)
    counts = {tag: len(elements(doc, tag)) for tag in ("startEvent", "task", "endEvent", "sequenceFlow")}
    assert counts == {"startEvent": 1, "task": 1, "endEvent": 1, "sequenceFlow": 2}
    assert elements(doc, "task")[0].get("name") == "Work"


def test_sample_graph_counts():
    doc = to_bpmn_xml(parse_dot(SAMPLE))
    assert len(elements(doc, "parallelGateway")) == 2
    assert len(elements(doc, "task")) == 3
    assert len(elements(doc, "exclusiveGateway")) == 0
    assert len(elements(doc, "sequenceFlow")) == 7
    directions = sorted(e.get("gatewayDirection") for e in elements(doc, "parallelGateway"))
    assert directions == ["Converging", "Diverging"]


def test_empty_graph_document():
    doc = to_bpmn_xml(build_graph([], []))
    root = ET.fromstring(doc.xml_text.encode())
    (process,) = root.findall("bpmn:process", NS)
    assert len(process) == 0
    assert round_trip_check(build_graph([], [])) == (True, "")


def test_index_and_references():
    doc = to_bpmn_xml(parse_dot(SAMPLE))
    root = ET.fromstring(doc.xml_text.encode())
    ids = {el.get("id") for el in root.iter() if el.get("id")}
    assert set(doc.element_index) <= ids
    for flow in elements(doc, "sequenceFlow"):
        assert doc.element_index[flow.get("sourceRef")] != "sequenceFlow"
        assert doc.element_index[flow.get("targetRef")] != "sequenceFlow"


def test_deterministic():
    g = parse_dot(SAMPLE)
    assert to_bpmn_xml(g).xml_text == to_bpmn_xml(g).xml_text


def test_adversarial_labels_round_trip():
    nasty = ['a < b & c > "d"', "it's ]]> done", "tab\tand\nnewline", "ünï €"]
    specs = [(f"n {i}&", Category.ACTIVITY, None, lab) for i, lab in enumerate(nasty)]
    specs.append(("g<1>", Category.GATEWAY, GatewayType.XOR, "<?>"))
    edges = [("n 0&", "g<1>", 'yes & "no"'), ("g<1>", "n 1&", None), ("g<1>", "n 2&", None)]
    g = build_graph(specs, edges, "LR")
    assert round_trip_check(g) == (True, "")
    assert from_bpmn_xml(to_bpmn_xml(g)) == g


def test_colliding_ids_are_suffixed():
    used: set[str] = set()
    assert xml_id("a b", used) == "a_b"
    assert xml_id("a-b", used) == "a_b_2"
    assert xml_id("1st", used) == "_1st"
    g = build_graph([("a b", Category.ACTIVITY, None, "x"), ("a-b", Category.ACTIVITY, None, "y")], [("a b", "a-b", None)])
    assert round_trip_check(g) == (True, "")


def test_unrepresentable_characters():
    g = build_graph([("bell", Category.ACTIVITY, None, "ring\x07")], [])
    with pytest.raises(ConversionError):
        to_bpmn_xml(g)
    ok, reason = round_trip_check(g)
    assert not ok and "XML" in reason


def test_unknown_element_rejected():
    doc = to_bpmn_xml(parse_dot(SAMPLE)).xml_text
    bad = doc.replace("<bpmn:task ", "<bpmn:userTask ", 1)
    with pytest.raises(ParseError):
        from_bpmn_xml(bad)
    foreign = doc.replace("</bpmn:process>", '<x:thing xmlns:x="urn:x" id="t"/></bpmn:process>')
    with pytest.raises(ParseError):
        from_bpmn_xml(foreign)
    with pytest.raises(ParseError):
        from_bpmn_xml("<not-closed")


def test_hand_written_minimal_document():
    text = f"""<?xml version="1.0"?>
<definitions xmlns="{BPMN_NS}" id="d">
  <process id="p">
    <startEvent id="s"><outgoing>f</outgoing></startEvent>
    <endEvent id="e"/>
    <sequenceFlow id="f" sourceRef="s" targetRef="e"/>
  </process>
</definitions>"""
    g = from_bpmn_xml(text)
    assert [(n.id, n.kind.category) for n in g.nodes] == [("s", Category.START_EVENT), ("e", Category.END_EVENT)]
    assert [(e.source, e.target) for e in g.edges] == [("s", "e")]
    assert g.orientation is None


def test_dangling_flow_rejected():
    text = f'<definitions xmlns="{BPMN_NS}"><process id="p"><task id="a"/><sequenceFlow id="f" sourceRef="a" targetRef="zz"/></process></definitions>'
    with pytest.raises(ParseError):
        from_bpmn_xml(text)


@settings(max_examples=150)
@given(dot_documents())
def test_round_trip_and_counts_on_generated_graphs(text):
    g = parse_quietly(text)
    assert round_trip_check(g) == (True, "")
    doc = to_bpmn_xml(g)
    assert len(elements(doc, "task")) == len(g.activities())
    assert len(elements(doc, "sequenceFlow")) == len(g.edges)
    ands = sum(1 for n in g.gateways() if n.kind.gateway_type is GatewayType.AND)
    assert len(elements(doc, "parallelGateway")) == ands
    assert len(elements(doc, "exclusiveGateway")) == len(g.gateways()) - ands
