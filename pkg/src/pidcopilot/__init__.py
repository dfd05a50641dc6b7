"""Prompt-driven P&ID copilot toolkit.

Pipeline: natural-language prompts -> plan/execute agent -> build-step DSL
-> deterministic plant-model XML -> auto-layout + SVG preview ->
natural-language description, with soundness/completeness evaluation and a
session service for the web UI.
"""

from .agent import (
    ExecutionRecord,
    PlanParseError,
    PlanStep,
    SessionState,
    TurnResult,
    execute_plan,
    load_session_from_xml,
    make_plan,
    new_session,
    run_turn,
)
from .backends import BackendError, HttpBackend, ScriptedBackend, make_backend
from .describe import MentionSet, describe, extract_mentions, mention_set_of_graph
from .dexpi import (
    DexpiDocument,
    XmlNode,
    emit_conceptual,
    graph_from_document,
    merge_layout,
    parse_xml,
    serialize_xml,
)
from .dsl import (
    DslDocument,
    DslError,
    DslSchemaError,
    DslStep,
    DslSyntaxError,
    dsl_to_graph,
    graph_to_dsl,
    parse_dsl,
    serialize_dsl,
    validate_and_prune,
)
from .evaluate import (
    CompletenessReport,
    EvalCase,
    SoundnessReport,
    check_completeness,
    check_soundness,
    run_benchmark,
)
from .layout import LayoutConfig, LayoutResult, auto_layout
from .model import (
    ActuationLoop,
    Attribute,
    ComponentClass,
    ConnectionEnd,
    DEFAULT_TAXONOMY,
    Diagnostic,
    Node,
    Nozzle,
    PidConnection,
    PidElement,
    PidGraph,
    Severity,
    Taxonomy,
    validate_graph,
)
from .render import render_svg
from .shapes import build_shape_catalogue

__version__ = "0.1.0"

__all__ = [
    "ActuationLoop", "Attribute", "BackendError", "CompletenessReport",
    "ComponentClass", "ConnectionEnd", "DEFAULT_TAXONOMY", "DexpiDocument",
    "Diagnostic", "DslDocument", "DslError", "DslSchemaError", "DslStep",
    "DslSyntaxError", "EvalCase", "ExecutionRecord", "HttpBackend",
    "LayoutConfig", "LayoutResult", "MentionSet", "Node", "Nozzle",
    "PidConnection", "PidElement", "PidGraph", "PlanParseError", "PlanStep",
    "ScriptedBackend", "SessionState", "Severity", "SoundnessReport",
    "Taxonomy", "TurnResult", "XmlNode", "auto_layout",
    "build_shape_catalogue", "check_completeness", "check_soundness",
    "describe", "dsl_to_graph", "emit_conceptual", "execute_plan",
    "extract_mentions", "graph_from_document", "graph_to_dsl",
    "load_session_from_xml", "make_backend", "make_plan",
    "mention_set_of_graph", "merge_layout", "new_session", "parse_dsl",
    "parse_xml", "render_svg", "run_benchmark", "run_turn", "serialize_dsl",
    "serialize_xml", "validate_and_prune", "validate_graph",
]
