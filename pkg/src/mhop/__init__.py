"""Multi-hop QA harness: dataset conversion, oracle checks, inference, scoring."""

from .backend import (
    BackendError,
    ChatMessage,
    HttpChatBackend,
    MockChatBackend,
    MockKnowledge,
    RetriesExhaustedError,
    build_mock_from_records,
    knowledge_from_pairs,
    make_backend,
)
from .datasetgen import (
    PromptTemplate,
    SplitAssignment,
    emit_dataset,
    emit_train_config,
    parse_dataset,
    split,
    to_multi_hop,
    to_single_hop,
)
from .ingest import DatasetFormatError, DedupeReport, clean, dedupe, parse_source, write_source
from .kgstore import (
    ConsistencyCheck,
    TripleStore,
    UnresolvableStep,
    apply_edits,
    build_store,
    check_consistency,
    walk_chain,
)
from .model import (
    AlpacaRecord,
    EditSpec,
    EvalOutcome,
    FactTriple,
    HopStep,
    RunConfig,
    SourceRecord,
    TrainConfigSpec,
    Violation,
    validate,
)
from .report import ReportRow, compare_report, emit_plot_data, render_markdown_table, render_text_table
from .runner import (
    DecompositionProtocol,
    extract_answer,
    run_decomposed_model,
    run_decomposed_scripted,
    run_direct,
    run_many,
)
from .scoring import ScoreSummary, accuracy, is_correct, normalize

__version__ = "0.1.0"

__all__ = [
    "AlpacaRecord",
    "BackendError",
    "ChatMessage",
    "ConsistencyCheck",
    "DatasetFormatError",
    "DecompositionProtocol",
    "DedupeReport",
    "EditSpec",
    "EvalOutcome",
    "FactTriple",
    "HopStep",
    "HttpChatBackend",
    "MockChatBackend",
    "MockKnowledge",
    "PromptTemplate",
    "ReportRow",
    "RetriesExhaustedError",
    "RunConfig",
    "ScoreSummary",
    "SourceRecord",
    "SplitAssignment",
    "TrainConfigSpec",
    "TripleStore",
    "UnresolvableStep",
    "Violation",
    "accuracy",
    "apply_edits",
    "build_mock_from_records",
    "build_store",
    "check_consistency",
    "clean",
    "compare_report",
    "dedupe",
    "emit_dataset",
    "emit_plot_data",
    "emit_train_config",
    "extract_answer",
    "is_correct",
    "knowledge_from_pairs",
    "make_backend",
    "normalize",
    "parse_dataset",
    "parse_source",
    "render_markdown_table",
    "render_text_table",
    "run_decomposed_model",
    "run_decomposed_scripted",
    "run_direct",
    "run_many",
    "split",
    "to_multi_hop",
    "to_single_hop",
    "validate",
    "walk_chain",
    "write_source",
]
