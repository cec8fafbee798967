"""Prompt templates for the four prompting regimes."""

from __future__ import annotations

from enum import Enum

PLACEHOLDER = "<BUSINESS PROCESS DESCRIPTION>"

INSTRUCTION_TEMPLATE = (
    "You are an expert in BPMN modeling and DOT language. Your task is to convert detailed "
    "textual descriptions of business processes into accurate BPMN model codes written in DOT "
    "language. Label all nodes with their activity names. Represent all connections between "
    "nodes without labeling the connections. Represent each node and its connections accurately, "
    "ensuring all decision points and flows are included and connected. Now, generate BPMN "
    "business process model code in DOT language for the following textual description of a "
    "business process: " + PLACEHOLDER
)

SAMPLE_GRAPH = """digraph process {
graph [rankdir=LR]
START_NODE [label="" shape=circle width=0.3]
"Gather Requirements" [shape=box width=0.6]
"Design System" [shape=box width=0.6]
"Review Requirements" [shape=box width=0.6]
END_NODE [label="" shape=circle width=0.3]
START_NODE -> "Gather Requirements"
"Gather Requirements" -> "AND_SPLIT"
"AND_SPLIT" [label="+" fixedsize=true shape=diamond width=0.5]
"AND_SPLIT" -> "Design System"
"AND_SPLIT" -> "Review Requirements"
"Design System" -> "AND_JOIN"
"Review Requirements" -> "AND_JOIN"
"AND_JOIN" [label="+" fixedsize=true shape=diamond width=0.5]
"AND_JOIN" -> END_NODE
}"""

ASSISTED_TEMPLATE = (
    "Label all nodes with their activity names. Represent all connections between nodes without "
    "labeling the connections. Represent each step and its connections accurately, ensuring all "
    "decision points and flows are included and connected. Use the following sample BPMN business "
    "process model for syntax reference:\n"
    + SAMPLE_GRAPH
    + "\nNow, generate BPMN business process model code in DOT language for the following textual "
    "description of a business process: " + PLACEHOLDER
)

# Wording for the reasoning regimes is configuration, not a fixed protocol.
COT_PREAMBLE = (
    "Reason step by step about the activities, gateways, and flows in the description before "
    "emitting the final DOT. Finish with the complete diagram in a single ```dot code block.\n\n"
)
TOT_PREAMBLE = (
    "Draft three candidate BPMN models for the description, briefly compare them for missing "
    "activities, gateway errors, and disconnected flows, then select the best one. Finish with "
    "the selected diagram in a single ```dot code block.\n\n"
)


class PromptMode(str, Enum):
    TUNED_ZERO_SHOT = "zero-shot"
    ASSISTED_ZERO_SHOT = "assisted"
    CHAIN_OF_THOUGHT = "cot"
    TREE_OF_THOUGHT = "tot"

    @property
    def is_reasoning(self) -> bool:
        return self in (PromptMode.CHAIN_OF_THOUGHT, PromptMode.TREE_OF_THOUGHT)


class EmptyDescription(ValueError):
    pass


def build_prompt(mode: PromptMode | str, description: str) -> str:
    mode = PromptMode(mode)
    if not description.strip():
        raise EmptyDescription("process description is empty")
    if mode is PromptMode.ASSISTED_ZERO_SHOT:
        template = ASSISTED_TEMPLATE
    elif mode is PromptMode.CHAIN_OF_THOUGHT:
        template = COT_PREAMBLE + INSTRUCTION_TEMPLATE
    elif mode is PromptMode.TREE_OF_THOUGHT:
        template = TOT_PREAMBLE + INSTRUCTION_TEMPLATE
    else:
        template = INSTRUCTION_TEMPLATE
    return template.replace(PLACEHOLDER, description)


def instruction_prefix() -> str:
    """The fixed instruction text that precedes every description during tuning."""
    return INSTRUCTION_TEMPLATE.replace(PLACEHOLDER, "")
