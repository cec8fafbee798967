"""Understandability guideline checks on generated process models.

Eleven guidelines are verified per diagram, each yielding Well Done,
Violated or Missing. Missing is reserved for diagrams whose BPMN XML
conversion failed, in which case every rule is Missing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .bpmn_export import ConversionError, to_bpmn_xml
from .graph_core import GatewayRole, GatewayType, ProcessGraph
from .stats import EmptyInput, wilson_interval

RULE_IDS = (2, 3, 8, 16, 18, 20, 22, 24, 30, 34, 47)
DEFAULT_SIZE_THRESHOLD = 31
_ORIENTATIONS = {"LR", "RL", "TB", "BT"}

RULE_NAMES = {
    2: "Minimize model size",
    3: "Apply hierarchical structure with sub-processes",
    8: "Provide activity descriptions",
    16: "Use explicit gateways",
    18: "Split and join flows consistently",
    20: "Use meaningful gateways",
    22: "Use default flows",
    24: "Use message flows",
    30: "Labeling activities",
    34: "Labeling XOR gateways",
    47: "Use a consistent process orientation",
}


class RuleStatus(str, Enum):
    WELL_DONE = "Well Done"
    VIOLATED = "Violated"
    MISSING = "Missing"


@dataclass(frozen=True)
class GuidelineReport:
    diagram_id: str
    verdicts: dict[int, RuleStatus]
    notes: dict[int, str] = field(default_factory=dict)

    @property
    def missing(self) -> bool:
        return any(v is RuleStatus.MISSING for v in self.verdicts.values())


@dataclass(frozen=True)
class RuleAggregate:
    rule_id: int
    ok: int
    ko: int
    missing: int
    pass_percent: float | None
    wilson_low: float | None
    wilson_high: float | None

    @property
    def name(self) -> str:
        return RULE_NAMES[self.rule_id]


def _missing(diagram_id: str, reason: str) -> GuidelineReport:
    return GuidelineReport(
        diagram_id,
        {r: RuleStatus.MISSING for r in RULE_IDS},
        {r: reason for r in RULE_IDS},
    )


def verify_model(
    g: ProcessGraph | None,
    diagram_id: str = "",
    size_threshold: int = DEFAULT_SIZE_THRESHOLD,
) -> GuidelineReport:
    """Verify the selected guidelines on one diagram.

    ``None`` stands for a diagram that never produced a graph. XML
    conversion is attempted first so that conversion failures surface as
    Missing, but the checks themselves run on the graph.
    """
    if g is None:
        return _missing(diagram_id, "no diagram to convert")
    try:
        to_bpmn_xml(g)
    except ConversionError as exc:
        return _missing(diagram_id, f"failed XML conversion: {exc}")

    ok, bad = RuleStatus.WELL_DONE, RuleStatus.VIOLATED
    verdicts: dict[int, RuleStatus] = {}
    notes: dict[int, str] = {}

    size = len(g.nodes)
    small = size <= size_threshold
    verdicts[2] = ok if small else bad
    notes[2] = f"{size} flow nodes, threshold {size_threshold}"
    # the dialect has no sub-processes, so large models are never decomposed
    verdicts[3] = ok if small else bad
    notes[3] = "no sub-processes" + ("" if small else f"; {size} flow nodes exceed {size_threshold}")

    activities = g.activities()
    verdicts[8] = bad if activities else ok
    notes[8] = f"{len(activities)} activities without documentation"

    implicit = [
        n.id for n in g.nodes
        if not n.kind.is_gateway and (g.in_degree(n.id) > 1 or g.out_degree(n.id) > 1)
    ]
    verdicts[16] = bad if implicit else ok
    notes[16] = "implicit split/join at: " + ", ".join(implicit) if implicit else "all splits and joins use gateways"

    roles = Counter((n.kind.gateway_type, n.kind.role) for n in g.gateways())
    unbalanced = [
        t.value for t in GatewayType
        if roles[(t, GatewayRole.SPLIT)] != roles[(t, GatewayRole.JOIN)]
    ]
    verdicts[18] = bad if unbalanced else ok
    notes[18] = (
        "split/join count mismatch for " + ", ".join(unbalanced) if unbalanced else "split and join counts balance"
    )

    degenerate = [n.id for n in g.gateways() if n.kind.role is GatewayRole.DEGENERATE]
    verdicts[20] = bad if degenerate else ok
    notes[20] = "pass-through gateways: " + ", ".join(degenerate) if degenerate else "no pass-through gateways"

    xor_splits = [
        n.id for n in g.gateways()
        if n.kind.gateway_type is GatewayType.XOR and n.kind.role is GatewayRole.SPLIT
    ]
    verdicts[22] = bad if xor_splits else ok
    notes[22] = f"{len(xor_splits)} XOR splits without a default flow"

    verdicts[24] = ok
    notes[24] = "single participant, no message exchange to model"

    unlabeled = [n.id for n in activities if not n.label.strip()]
    verdicts[30] = bad if unlabeled else ok
    notes[30] = "unlabeled activities: " + ", ".join(unlabeled) if unlabeled else "all activities labeled"

    verdicts[34] = bad if xor_splits else ok
    notes[34] = f"{len(xor_splits)} XOR splits without question or outcome labels"

    orient = (g.orientation or "").strip().upper()
    verdicts[47] = ok if orient in _ORIENTATIONS else bad
    notes[47] = f"orientation {g.orientation!r}"

    return GuidelineReport(diagram_id, verdicts, notes)


def pass_percent(ok: int, ko: int) -> float | None:
    total = ok + ko
    return None if total == 0 else 100.0 * ok / total


def aggregate_reports(reports: Iterable[GuidelineReport], confidence: float = 0.95) -> list[RuleAggregate]:
    """Per-rule OK/KO/Missing counts with pass rate and Wilson interval over verifiable diagrams."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("no guideline reports to aggregate")
    out = []
    for rule in RULE_IDS:
        counts = Counter(r.verdicts[rule] for r in reports)
        ok, ko = counts[RuleStatus.WELL_DONE], counts[RuleStatus.VIOLATED]
        low = high = None
        if ok + ko:
            interval = wilson_interval(ok, ok + ko, confidence)
            low, high = 100.0 * interval.low, 100.0 * interval.high
        out.append(RuleAggregate(rule, ok, ko, counts[RuleStatus.MISSING], pass_percent(ok, ko), low, high))
    return out

