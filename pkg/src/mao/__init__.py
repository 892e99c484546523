"""Multi-agent toolkit for block-structured process models.

The package covers the full loop: a text DSL for process trees, a format
validator, a semantic reviewer grammar, graph edit distance with an exact
oracle and four approximate solvers, an instructor/assistant pipeline over
pluggable chat backends, BPMN 2.0 XML interop, and a dataset harness.
"""

from .backends import (
    BackendError,
    ChatBackend,
    HttpChatBackend,
    ReplayBackend,
    ReplayExhausted,
)
from .diff import (
    ALGORITHMS,
    CostModel,
    DiffResult,
    DistanceSuite,
    EditMapping,
    SizeExceeded,
    SolverParams,
    distance_suite,
    exact_ged,
    label_similarity,
    levenshtein,
    mapping_cost,
    solve,
)
from .dsl import (
    BpmnParseFailure,
    ParseError,
    ParseErrorKind,
    ParseOutcome,
    SourceSpan,
    extract_model_block,
    parse,
    parse_outcome,
    serialize,
)
from .evalharness import (
    CaseLayoutError,
    DistanceStats,
    EvalCase,
    EvalReport,
    evaluate_case,
    load_case,
    load_graph,
    stats,
    surpass_proportion,
)
from .graph import (
    FlatGraph,
    FlatNode,
    NonBlockStructured,
    flatten,
    flatten_with_conditions,
    graph_to_model,
)
from .interop import BpmnImportError, ImportResult, export_xml, import_xml
from .model import (
    Activity,
    Branch,
    Gateway,
    GatewayKind,
    ProcessModel,
    StructuralDefect,
    collect_ids,
    structural_check,
    walk,
)
from .orchestrator import (
    ChatMessage,
    PipelineConfig,
    PipelineError,
    PipelineResult,
    load_transcript,
    run_pipeline,
    save_transcript,
)
from .semlint import (
    CATEGORIES,
    NO_ISSUES,
    ReviewReply,
    ReviewReplyError,
    ReviewSuggestion,
    build_review_prompt,
    deterministic_lint,
    normalize_action,
    parse_review_reply,
)
from .validator import (
    ConstraintRule,
    Severity,
    ValidationReport,
    Violation,
    default_registry,
    render_report,
    validate,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Activity",
    "BackendError",
    "BpmnImportError",
    "BpmnParseFailure",
    "Branch",
    "CATEGORIES",
    "CaseLayoutError",
    "ChatBackend",
    "ChatMessage",
    "ConstraintRule",
    "CostModel",
    "DiffResult",
    "DistanceStats",
    "DistanceSuite",
    "EditMapping",
    "EvalCase",
    "EvalReport",
    "FlatGraph",
    "FlatNode",
    "Gateway",
    "GatewayKind",
    "HttpChatBackend",
    "ImportResult",
    "NO_ISSUES",
    "NonBlockStructured",
    "ParseError",
    "ParseErrorKind",
    "ParseOutcome",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "ProcessModel",
    "ReplayBackend",
    "ReplayExhausted",
    "ReviewReply",
    "ReviewReplyError",
    "ReviewSuggestion",
    "Severity",
    "SizeExceeded",
    "SolverParams",
    "SourceSpan",
    "StructuralDefect",
    "ValidationReport",
    "Violation",
    "build_review_prompt",
    "collect_ids",
    "default_registry",
    "deterministic_lint",
    "distance_suite",
    "evaluate_case",
    "exact_ged",
    "export_xml",
    "extract_model_block",
    "flatten",
    "flatten_with_conditions",
    "graph_to_model",
    "import_xml",
    "label_similarity",
    "levenshtein",
    "load_case",
    "load_graph",
    "load_transcript",
    "mapping_cost",
    "normalize_action",
    "parse",
    "parse_outcome",
    "parse_review_reply",
    "render_report",
    "run_pipeline",
    "save_transcript",
    "serialize",
    "solve",
    "stats",
    "structural_check",
    "surpass_proportion",
    "validate",
    "validate_model",
    "walk",
]
