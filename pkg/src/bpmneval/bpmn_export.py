"""Conversion between process graphs and BPMN 2.0 XML.

Only the flow-node vocabulary the DOT dialect can express is emitted: one
process with start/end events, tasks, parallel and exclusive gateways and
sequence flows. DOT node names and the layout orientation are kept in
attributes of a private extension namespace so the conversion round-trips.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .graph_core import Category, GatewayType, ParseError, ProcessGraph, build_graph

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
DOT_NS = "urn:bpmneval:dot"

ET.register_namespace("bpmn", BPMN_NS)
ET.register_namespace("dot", DOT_NS)

_TAGS = {
    Category.START_EVENT: "startEvent",
    Category.END_EVENT: "endEvent",
    Category.ACTIVITY: "task",
}
_GATEWAY_TAGS = {GatewayType.AND: "parallelGateway", GatewayType.XOR: "exclusiveGateway"}
_DIRECTIONS = {"Split": "Diverging", "Join": "Converging", "Degenerate": "Unspecified"}
# children of flow nodes that carry no structure of their own
_IGNORED = {"incoming", "outgoing", "documentation", "extensionElements"}

_INVALID_XML_CHARS = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ud800-\udfff￾￿]")
_NON_NCNAME = re.compile(r"[^A-Za-z0-9_]")


class ConversionError(ValueError):
    """A graph that cannot be expressed as a BPMN document."""


@dataclass(frozen=True)
class BpmnDocument:
    xml_text: str
    element_index: dict[str, str] = field(default_factory=dict)


def _q(tag: str) -> str:
    return f"{{{BPMN_NS}}}{tag}"


def _dq(attr: str) -> str:
    return f"{{{DOT_NS}}}{attr}"


def xml_id(name: str, used: set[str]) -> str:
    """NCName-safe id derived from ``name``, suffixed until unused."""
    base = _NON_NCNAME.sub("_", name) or "_"
    if not (base[0].isalpha() or base[0] == "_"):
        base = "_" + base
    candidate = base
    suffix = 2
    while candidate in used:
        candidate = f"{base}_{suffix}"
        suffix += 1
    used.add(candidate)
    return candidate


def _check_text(value: str, what: str) -> None:
    if _INVALID_XML_CHARS.search(value):
        raise ConversionError(f"{what} {value!r} contains characters XML 1.0 cannot represent")


def to_bpmn_xml(g: ProcessGraph) -> BpmnDocument:
    used: set[str] = {"definitions", "process"}
    root = ET.Element(_q("definitions"), {"id": "definitions", "targetNamespace": "urn:bpmneval:generated"})
    proc_attrs = {"id": "process", "isExecutable": "false"}
    if g.orientation is not None:
        _check_text(g.orientation, "orientation")
        proc_attrs[_dq("rankdir")] = g.orientation
    process = ET.SubElement(root, _q("process"), proc_attrs)

    index: dict[str, str] = {}
    ids: dict[str, str] = {}
    for node in g.nodes:
        _check_text(node.id, "node id")
        _check_text(node.label, "label")
        ids[node.id] = xml_id(node.id, used)
    for node in g.nodes:
        kind = node.kind
        tag = _GATEWAY_TAGS[kind.gateway_type] if kind.is_gateway else _TAGS[kind.category]
        attrs = {"id": ids[node.id], _dq("node"): node.id}
        if kind.category is Category.ACTIVITY or kind.is_gateway:
            attrs["name"] = node.label
        if kind.is_gateway:
            attrs["gatewayDirection"] = _DIRECTIONS[kind.role.value]
        ET.SubElement(process, _q(tag), attrs)
        index[ids[node.id]] = tag
    for k, edge in enumerate(g.edges, start=1):
        flow_id = xml_id(f"flow_{k}", used)
        attrs = {"id": flow_id, "sourceRef": ids[edge.source], "targetRef": ids[edge.target]}
        if edge.label is not None:
            _check_text(edge.label, "edge label")
            attrs["name"] = edge.label
        ET.SubElement(process, _q("sequenceFlow"), attrs)
        index[flow_id] = "sequenceFlow"

    ET.indent(root)
    text = ET.tostring(root, encoding="unicode", xml_declaration=False)
    return BpmnDocument('<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n", index)


_CATEGORY_BY_TAG = {
    "startEvent": (Category.START_EVENT, None),
    "endEvent": (Category.END_EVENT, None),
    "task": (Category.ACTIVITY, None),
    "parallelGateway": (Category.GATEWAY, GatewayType.AND),
    "exclusiveGateway": (Category.GATEWAY, GatewayType.XOR),
}


def _local(tag: str) -> tuple[str | None, str]:
    if tag.startswith("{"):
        ns, _, local = tag[1:].partition("}")
        return ns, local
    return None, tag


def from_bpmn_xml(doc: BpmnDocument | str) -> ProcessGraph:
    """Rebuild the graph encoded by :func:`to_bpmn_xml`."""
    text = doc.xml_text if isinstance(doc, BpmnDocument) else doc
    try:
        root = ET.fromstring(text.encode("utf-8"))
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    if root.tag != _q("definitions"):
        raise ParseError(f"root element is {root.tag!r}, expected bpmn:definitions")
    processes = root.findall(_q("process"))
    if len(processes) != 1:
        raise ParseError(f"expected exactly one process element, found {len(processes)}")
    process = processes[0]
    orientation = process.get(_dq("rankdir"))

    specs = []
    names: dict[str, str] = {}
    flows = []
    for el in process:
        ns, tag = _local(el.tag)
        if ns != BPMN_NS:
            raise ParseError(f"foreign element {el.tag!r}")
        if tag in _IGNORED:
            continue
        el_id = el.get("id")
        if el_id is None:
            raise ParseError(f"{tag} element without id")
        if tag == "sequenceFlow":
            flows.append(el)
            continue
        if tag not in _CATEGORY_BY_TAG:
            raise ParseError(f"unsupported BPMN element {tag!r}")
        category, gtype = _CATEGORY_BY_TAG[tag]
        name = el.get(_dq("node"), el_id)
        names[el_id] = name
        label = el.get("name", name if category is Category.ACTIVITY else "")
        specs.append((name, category, gtype, label))

    edges = []
    for el in flows:
        src, dst = el.get("sourceRef"), el.get("targetRef")
        if src not in names or dst not in names:
            raise ParseError(f"sequenceFlow {el.get('id')!r} references an unknown element")
        edges.append((names[src], names[dst], el.get("name")))
    try:
        return build_graph(specs, edges, orientation)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def round_trip_check(g: ProcessGraph) -> tuple[bool, str]:
    """Whether ``g`` survives conversion to XML and back, with a reason when not."""
    try:
        back = from_bpmn_xml(to_bpmn_xml(g))
    except (ConversionError, ParseError) as exc:
        return False, str(exc)
    if not back.same_structure(g):
        return False, "graph changed across the XML round trip"
    return True, ""
