"""Typed process graphs and the DOT dialect used to encode BPMN models.

The dialect is the subset of Graphviz DOT that model outputs and the
reference corpus actually use: a single ``digraph`` with node statements,
edge chains, bracketed attribute lists, quoted ids and a ``rankdir``
orientation. Subgraphs, ports and undirected edges are rejected.

Nodes are classified into BPMN elements from their shape, label and name::

    START_NODE [label="" shape=circle]        -> StartEvent
    "Review" [shape=box]                       -> Activity
    "AND_SPLIT" [label="+" shape=diamond]      -> Gateway(AND, Split)
"""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple


class ParseError(ValueError):
    """Raised when DOT text cannot be parsed in the supported dialect."""


class ClassificationWarning(UserWarning):
    """A diamond node whose gateway type could not be recognized."""


class Category(str, Enum):
    START_EVENT = "StartEvent"
    END_EVENT = "EndEvent"
    ACTIVITY = "Activity"
    GATEWAY = "Gateway"


class GatewayType(str, Enum):
    AND = "AND"
    XOR = "XOR"


class GatewayRole(str, Enum):
    SPLIT = "Split"
    JOIN = "Join"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class NodeKind:
    category: Category
    gateway_type: GatewayType | None = None
    role: GatewayRole | None = None

    def __post_init__(self) -> None:
        is_gateway = self.category is Category.GATEWAY
        if is_gateway != (self.gateway_type is not None) or is_gateway != (self.role is not None):
            raise ValueError(f"inconsistent node kind: {self!r}")

    @property
    def is_gateway(self) -> bool:
        return self.category is Category.GATEWAY

    def __str__(self) -> str:
        if self.is_gateway:
            return f"Gateway({self.gateway_type.value}, {self.role.value})"
        return self.category.value


START = NodeKind(Category.START_EVENT)
END = NodeKind(Category.END_EVENT)
ACTIVITY = NodeKind(Category.ACTIVITY)


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: NodeKind
    label: str = ""


class Edge(NamedTuple):
    source: str
    target: str
    label: str | None = None


class GraphStats(NamedTuple):
    node_count: int
    edge_count: int
    gateway_count: int


@dataclass(frozen=True)
class ProcessGraph:
    """Immutable directed graph of BPMN flow nodes.

    Equality is element-wise and order sensitive; use :meth:`same_structure`
    for an order-free comparison.
    """

    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[Edge, ...] = ()
    orientation: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(Edge(*e) for e in self.edges))
        seen: set[str] = set()
        for node in self.nodes:
            if node.id in seen:
                raise ValueError(f"duplicate node id {node.id!r}")
            seen.add(node.id)
        for edge in self.edges:
            if edge.source not in seen or edge.target not in seen:
                raise ValueError(f"edge {edge.source!r} -> {edge.target!r} references an unknown node")

    @cached_property
    def _index(self) -> dict[str, GraphNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _in_degree(self) -> Counter:
        return Counter(e.target for e in self.edges)

    @cached_property
    def _out_degree(self) -> Counter:
        return Counter(e.source for e in self.edges)

    def node(self, node_id: str) -> GraphNode:
        return self._index[node_id]

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._index

    def in_degree(self, node_id: str) -> int:
        return self._in_degree[node_id]

    def out_degree(self, node_id: str) -> int:
        return self._out_degree[node_id]

    def successors(self, node_id: str) -> list[str]:
        return [e.target for e in self.edges if e.source == node_id]

    def gateways(self) -> list[GraphNode]:
        return [n for n in self.nodes if n.kind.is_gateway]

    def activities(self) -> list[GraphNode]:
        return [n for n in self.nodes if n.kind.category is Category.ACTIVITY]

    def same_structure(self, other: ProcessGraph) -> bool:
        """Compare node sets, edge multisets, kinds, labels and orientation."""
        return (
            set(self.nodes) == set(other.nodes)
            and Counter(self.edges) == Counter(other.edges)
            and self.orientation == other.orientation
        )

    def is_weakly_connected(self) -> bool:
        if not self.nodes:
            return False
        adjacency: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for e in self.edges:
            adjacency[e.source].add(e.target)
            adjacency[e.target].add(e.source)
        start = self.nodes[0].id
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.nodes)


def gateway_role(in_degree: int, out_degree: int) -> GatewayRole:
    """Role implied by a gateway's degrees; mixed gateways count as splits."""
    if out_degree > 1:
        return GatewayRole.SPLIT
    if in_degree > 1:
        return GatewayRole.JOIN
    return GatewayRole.DEGENERATE


def build_graph(
    nodes: Iterable[tuple[str, Category, GatewayType | None, str]],
    edges: Iterable[Edge | tuple],
    orientation: str | None = None,
) -> ProcessGraph:
    """Assemble a graph from (id, category, gateway type, label) tuples.

    Gateway roles are derived from the edge list.
    """
    edges = [Edge(*e) for e in edges]
    indeg = Counter(e.target for e in edges)
    outdeg = Counter(e.source for e in edges)
    built = []
    for node_id, category, gtype, label in nodes:
        if category is Category.GATEWAY:
            kind = NodeKind(category, gtype, gateway_role(indeg[node_id], outdeg[node_id]))
        else:
            kind = NodeKind(category)
        if category in (Category.START_EVENT, Category.END_EVENT):
            label = ""
        built.append(GraphNode(node_id, kind, label))
    return ProcessGraph(tuple(built), tuple(edges), orientation)


def graph_stats(g: ProcessGraph) -> GraphStats:
    return GraphStats(len(g.nodes), len(g.edges), len(g.gateways()))


# ---------------------------------------------------------------------------
# Sanitizer

_FENCE_LINE = re.compile(r"^[ \t]*```[\w+.-]*[ \t]*(?:\r?\n|$)", re.MULTILINE)
_OPEN_RUN = re.compile(r"\{(?:\s*\{)+")
_CLOSE_RUN = re.compile(r"\}(?:\s*\})+")
_EMPTY_LABEL = re.compile(r"\blabel\s*=(?:\s*''|(?=\s*(?:[\],;]|[A-Za-z_]\w*\s*=)))")
_MAX_REPAIR_PASSES = 64
_TRAILING_COMMA = re.compile(r",(?:\s*,)*(\s*)(?=\])")


def _segments(text: str) -> tuple[list[tuple[bool, str]], bool]:
    """Split text into (is_quoted, chunk) pieces; quoted chunks keep their quotes.

    The second return value is true when the last quoted string never closes.
    """
    out: list[tuple[bool, str]] = []
    i, start, n = 0, 0, len(text)
    unterminated = False
    while i < n:
        if text[i] == '"':
            if i > start:
                out.append((False, text[start:i]))
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                unterminated = True
            j = min(j + 1, n)
            out.append((True, text[i:j]))
            i = start = j
        else:
            i += 1
    if start < n:
        out.append((False, text[start:]))
    return out, unterminated


def _repair_once(text: str) -> str:
    segments, unterminated = _segments(text)
    pieces = [
        (q, c if q else _CLOSE_RUN.sub("}", _OPEN_RUN.sub("{", c)))
        for q, c in segments
    ]
    opens = sum(c.count("{") for q, c in pieces if not q)
    closes = sum(c.count("}") for q, c in pieces if not q)
    if closes > opens:
        excess = closes - opens
        for k in range(len(pieces) - 1, -1, -1):
            quoted, chunk = pieces[k]
            if quoted:
                continue
            while excess and "}" in chunk:
                cut = chunk.rindex("}")
                chunk = chunk[:cut] + chunk[cut + 1 :]
                excess -= 1
            pieces[k] = (quoted, chunk)
            if not excess:
                break
    pieces = [
        (q, c if q else _TRAILING_COMMA.sub(r"\1", _EMPTY_LABEL.sub('label=""', c)))
        for q, c in pieces
    ]
    text = "".join(c for _, c in pieces)
    # only a single missing close (a truncated graph) is repairable; more
    # would need nesting, which the dialect does not have
    if opens - closes == 1 and not unterminated:
        text = text.rstrip() + "\n}"
    return text


def sanitize_dot(raw: str) -> str:
    """Apply the whitelisted repairs to model-emitted DOT text.

    Removes Markdown code fences, collapses duplicated braces, normalizes
    empty labels, drops trailing commas in attribute lists and balances the
    top-level braces. Everything else passes through untouched, so text
    that is already clean comes back unchanged. Repairs are repeated until
    nothing changes, since one fix can expose another.
    """
    text = raw
    if "```" in text:
        text = _FENCE_LINE.sub("", text).replace("```", "").strip()
    for _ in range(_MAX_REPAIR_PASSES):
        repaired = _repair_once(text)
        if repaired == text:
            break
        text = repaired
    return text


# ---------------------------------------------------------------------------
# Lexer and parser

_KEYWORDS = {"strict", "graph", "digraph", "subgraph", "node", "edge"}


class _Tok(NamedTuple):
    kind: str  # "id", "punct" or "eof"
    value: str
    pos: int
    quoted: bool = False


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/|^\#[^\n]*)
  | (?P<arrow>->|--)
  | (?P<punct>[{}\[\]=;,:])
  | (?P<number>-?(?:\.\d+|\d+(?:\.\d*)?))
  | (?P<name>[A-Za-z_\x80-\U0010ffff][A-Za-z0-9_\x80-\U0010ffff]*)
  | (?P<quote>")
  | (?P<html><)
    """,
    re.VERBOSE | re.DOTALL | re.MULTILINE,
)


def _read_quoted(text: str, start: int) -> tuple[str, int]:
    out = []
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            return "".join(out), i + 1
        if ch == "\\" and i + 1 < n:
            nxt = text[i + 1]
            if nxt in '"\\':
                out.append(nxt)
                i += 2
                continue
            if nxt == "\n":
                i += 2
                continue
        out.append(ch)
        i += 1
    raise ParseError(f"unterminated quoted string at offset {start}")


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            pos = m.end()
        elif kind == "quote":
            value, pos = _read_quoted(text, pos)
            toks.append(_Tok("id", value, m.start(), quoted=True))
        elif kind == "html":
            raise ParseError(f"HTML-like labels are not supported (offset {pos})")
        elif kind in ("arrow", "punct"):
            toks.append(_Tok("punct", m.group(), m.start()))
            pos = m.end()
        else:
            toks.append(_Tok("id", m.group(), m.start()))
            pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


@dataclass
class _RawNode:
    attrs: dict[str, str] = field(default_factory=dict)


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.nodes: dict[str, _RawNode] = {}
        self.edges: list[Edge] = []
        self.node_defaults: dict[str, str] = {}
        self.edge_defaults: dict[str, str] = {}
        self.rankdirs: list[str] = []

    # token helpers
    def peek(self, offset: int = 0) -> _Tok:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.peek()
        self.i += 1
        return tok

    def is_punct(self, value: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind == "punct" and tok.value == value

    def expect_punct(self, value: str) -> None:
        tok = self.next()
        if tok.kind != "punct" or tok.value != value:
            raise ParseError(f"expected {value!r} at offset {tok.pos}, got {tok.value or 'end of input'!r}")

    def keyword(self, offset: int = 0) -> str | None:
        tok = self.peek(offset)
        if tok.kind == "id" and not tok.quoted and tok.value.lower() in _KEYWORDS:
            return tok.value.lower()
        return None

    def expect_id(self) -> str:
        tok = self.next()
        if tok.kind != "id":
            raise ParseError(f"expected an identifier at offset {tok.pos}, got {tok.value or 'end of input'!r}")
        if not tok.quoted and tok.value.lower() in _KEYWORDS:
            raise ParseError(f"keyword {tok.value!r} used as identifier at offset {tok.pos}")
        return tok.value

    # grammar
    def parse(self) -> None:
        if self.keyword() == "strict":
            self.next()
        kw = self.keyword()
        if kw != "digraph":
            tok = self.peek()
            raise ParseError(f"expected 'digraph' at offset {tok.pos}, got {tok.value or 'end of input'!r}")
        self.next()
        if self.peek().kind == "id" and self.keyword() is None:
            self.next()
        self.expect_punct("{")
        while not self.is_punct("}"):
            if self.peek().kind == "eof":
                raise ParseError("unexpected end of input: missing '}'")
            self.statement()
            if self.is_punct(";"):
                self.next()
        self.next()
        tail = self.peek()
        if tail.kind != "eof":
            raise ParseError(f"trailing content after graph body at offset {tail.pos}")

    def statement(self) -> None:
        kw = self.keyword()
        if kw == "subgraph" or self.is_punct("{"):
            raise ParseError(f"subgraphs are not supported (offset {self.peek().pos})")
        if kw in ("graph", "node", "edge"):
            self.next()
            attrs = self.attr_lists()
            if kw == "graph":
                self.graph_attrs(attrs)
            elif kw == "node":
                self.node_defaults.update(attrs)
            else:
                self.edge_defaults.update(attrs)
            return
        if self.peek().kind == "id" and self.is_punct("=", 1):
            key = self.expect_id()
            self.next()
            value = self.expect_id()
            self.graph_attrs({key: value})
            return
        first = self.node_id()
        if self.is_punct("->") or self.is_punct("--"):
            chain = [first]
            while self.is_punct("->") or self.is_punct("--"):
                op = self.next()
                if op.value == "--":
                    raise ParseError(f"undirected edge '--' at offset {op.pos}")
                if self.is_punct("{") or self.keyword() == "subgraph":
                    raise ParseError(f"subgraphs are not supported (offset {self.peek().pos})")
                chain.append(self.node_id())
            attrs = dict(self.edge_defaults)
            attrs.update(self.attr_lists())
            for name in chain:
                self.touch(name)
            label = attrs.get("label")
            for src, dst in zip(chain, chain[1:]):
                self.edges.append(Edge(src, dst, label))
        else:
            attrs = self.attr_lists()
            self.touch(first).attrs.update(attrs)

    def node_id(self) -> str:
        name = self.expect_id()
        if self.is_punct(":"):
            raise ParseError(f"ports are not supported (offset {self.peek().pos})")
        return name

    def attr_lists(self) -> dict[str, str]:
        attrs: dict[str, str] = {}
        while self.is_punct("["):
            self.next()
            while not self.is_punct("]"):
                key = self.expect_id()
                self.expect_punct("=")
                attrs[key.lower()] = self.expect_id()
                if self.is_punct(",") or self.is_punct(";"):
                    self.next()
            self.next()
        return attrs

    def graph_attrs(self, attrs: dict[str, str]) -> None:
        for key, value in attrs.items():
            if key.lower() == "rankdir":
                self.rankdirs.append(value.strip())

    def touch(self, name: str) -> _RawNode:
        node = self.nodes.get(name)
        if node is None:
            node = self.nodes[name] = _RawNode(dict(self.node_defaults))
        return node


_XOR_LABELS = {"x", "×"}
_EVENT_SHAPES = {"circle", "doublecircle"}
_EVENT_NAMES = {"START_NODE", "END_NODE"}


def _classify(name: str, attrs: dict[str, str], indeg: int, outdeg: int) -> tuple[Category, GatewayType | None]:
    shape = attrs.get("shape", "").strip().lower()
    upper = name.upper()
    if shape in _EVENT_SHAPES or upper in _EVENT_NAMES:
        if upper.startswith("START"):
            return Category.START_EVENT, None
        if upper.startswith("END"):
            return Category.END_EVENT, None
        return (Category.START_EVENT if indeg == 0 else Category.END_EVENT), None
    if shape == "diamond":
        label = attrs.get("label", "").strip()
        if label == "+":
            return Category.GATEWAY, GatewayType.AND
        if label.lower() in _XOR_LABELS:
            return Category.GATEWAY, GatewayType.XOR
        if upper.startswith("AND_"):
            return Category.GATEWAY, GatewayType.AND
        if upper.startswith("XOR_"):
            return Category.GATEWAY, GatewayType.XOR
        warnings.warn(
            f"diamond node {name!r} has unrecognized gateway label {label!r}; treating as XOR",
            ClassificationWarning,
            stacklevel=3,
        )
        return Category.GATEWAY, GatewayType.XOR
    return Category.ACTIVITY, None


def parse_dot(text: str) -> ProcessGraph:
    """Parse sanitized DOT text into a classified :class:`ProcessGraph`.

    Nodes keep their order of first appearance, whether that is a node
    statement or an edge statement. Raises :class:`ParseError` on anything
    outside the supported dialect.
    """
    parser = _Parser(text)
    parser.parse()
    indeg = Counter(e.target for e in parser.edges)
    outdeg = Counter(e.source for e in parser.edges)
    specs = []
    for name, raw in parser.nodes.items():
        category, gtype = _classify(name, raw.attrs, indeg[name], outdeg[name])
        if category is Category.ACTIVITY:
            label = raw.attrs.get("label", name)
        elif category is Category.GATEWAY:
            label = raw.attrs.get("label", "")
        else:
            label = ""
        specs.append((name, category, gtype, label))
    orientation = None
    if parser.rankdirs:
        distinct = list(dict.fromkeys(parser.rankdirs))
        orientation = " ".join(distinct)
    return build_graph(specs, parser.edges, orientation)


# ---------------------------------------------------------------------------
# Rendering


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


_SHAPES = {
    Category.START_EVENT: "circle",
    Category.END_EVENT: "circle",
    Category.ACTIVITY: "box",
    Category.GATEWAY: "diamond",
}


def render_canonical(g: ProcessGraph) -> str:
    """Deterministic DOT serialization that :func:`parse_dot` reads back to ``g``."""
    lines = ["digraph process {"]
    if g.orientation is not None:
        lines.append(f"graph [rankdir={_quote(g.orientation)}]")
    for node in g.nodes:
        shape = _SHAPES[node.kind.category]
        lines.append(f"{_quote(node.id)} [label={_quote(node.label)} shape={shape}]")
    for edge in g.edges:
        attrs = "" if edge.label is None else f" [label={_quote(edge.label)}]"
        lines.append(f"{_quote(edge.source)} -> {_quote(edge.target)}{attrs}")
    lines.append("}")
    return "\n".join(lines)
