"""Evaluation toolkit for BPMN process models written as DOT digraphs."""

from .bpmn_export import ConversionError, from_bpmn_xml, round_trip_check, to_bpmn_xml
from .dataset import EvalRecord, filter_corpus, stratified_sample
from .graph_core import (
    Category,
    GatewayRole,
    GatewayType,
    ParseError,
    ProcessGraph,
    graph_stats,
    parse_dot,
    render_canonical,
    sanitize_dot,
)
from .graph_metrics import SearchBudget, ged, r_ged
from .guidelines import RuleStatus, aggregate_reports, verify_model
from .harness import ModelRun, evaluate_pair, extract_dot, run_evaluation
from .prompts import PromptMode, build_prompt
from .reports import ReportFormat, emit_reports
from .stats import bootstrap_ci, chi_square_sf, friedman_test, kendalls_w, wilson_interval
from .text_metrics import bleu, meteor, rouge_l, tokenize

__version__ = "0.1.0"

__all__ = [
    "Category",
    "ConversionError",
    "EvalRecord",
    "GatewayRole",
    "GatewayType",
    "ModelRun",
    "ParseError",
    "ProcessGraph",
    "PromptMode",
    "ReportFormat",
    "RuleStatus",
    "SearchBudget",
    "aggregate_reports",
    "bleu",
    "bootstrap_ci",
    "build_prompt",
    "chi_square_sf",
    "emit_reports",
    "evaluate_pair",
    "extract_dot",
    "filter_corpus",
    "friedman_test",
    "from_bpmn_xml",
    "ged",
    "graph_stats",
    "kendalls_w",
    "meteor",
    "parse_dot",
    "r_ged",
    "render_canonical",
    "rouge_l",
    "round_trip_check",
    "run_evaluation",
    "sanitize_dot",
    "stratified_sample",
    "to_bpmn_xml",
    "tokenize",
    "verify_model",
    "wilson_interval",
]
