"""Governance gate for proposed AI actions.

Four rubric-driven judges (sovereignty, carbon, compliance, ethics) score a
request, optionally grounded in retrieved reference documents; a weighted
synthesis applies thresholds and flags conflicts; reports and charts explain
the decision. An A/B harness quantifies the effect of retrieval grounding.
"""

from .scoring import (
    NOT_APPLICABLE,
    PILLAR_ORDER,
    NotApplicableType,
    Pillar,
    Score,
    format_score,
    is_numeric,
)
from .provider import (
    ChatMessage,
    GenerationParams,
    HttpProvider,
    Provider,
    ProviderConfig,
    ProviderError,
    Role,
    ScriptedProvider,
    TokenEmbeddingSequence,
    TransportError,
    chat_fingerprint,
)
from .rag import Chunk, Document, KnowledgeBase, RagContext, chunk_words, load_manifest
from .judge import (
    EvaluationRequest,
    Judge,
    Judgment,
    JudgeFailure,
    ParseError,
    PromptTemplate,
    load_templates,
    parse_judgment,
    render_prompt,
)
from .orchestrator import (
    Clearance,
    NaPolicy,
    OrchestrationFailure,
    Orchestrator,
    SynthesisPolicy,
    SynthesisResult,
    aggregate_constraints,
    synthesize,
)
from .explain import (
    Report,
    build_report,
    emit_report,
    parse_report,
    render_bar_chart,
    render_radar_chart,
)
from .evaluation import (
    BaselineStats,
    BertScoreResult,
    EvalRecord,
    IdfTable,
    bertscore,
    build_idf,
    delta_score,
    emit_table,
    rescale,
    run_ab_evaluation,
)
from .config import AppConfig, ConfigError, build_provider, load_config

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # scoring
    "Pillar",
    "PILLAR_ORDER",
    "Score",
    "NotApplicableType",
    "NOT_APPLICABLE",
    "is_numeric",
    "format_score",
    # provider
    "Role",
    "ChatMessage",
    "GenerationParams",
    "ProviderConfig",
    "Provider",
    "HttpProvider",
    "ScriptedProvider",
    "TokenEmbeddingSequence",
    "ProviderError",
    "TransportError",
    "chat_fingerprint",
    # rag
    "Document",
    "Chunk",
    "RagContext",
    "KnowledgeBase",
    "chunk_words",
    "load_manifest",
    # judge
    "EvaluationRequest",
    "Judgment",
    "Judge",
    "JudgeFailure",
    "ParseError",
    "PromptTemplate",
    "load_templates",
    "render_prompt",
    "parse_judgment",
    # orchestrator
    "NaPolicy",
    "Clearance",
    "SynthesisPolicy",
    "SynthesisResult",
    "Orchestrator",
    "OrchestrationFailure",
    "synthesize",
    "aggregate_constraints",
    # explain
    "Report",
    "build_report",
    "emit_report",
    "parse_report",
    "render_bar_chart",
    "render_radar_chart",
    # evaluation
    "BertScoreResult",
    "IdfTable",
    "BaselineStats",
    "EvalRecord",
    "bertscore",
    "rescale",
    "build_idf",
    "delta_score",
    "run_ab_evaluation",
    "emit_table",
    # config
    "AppConfig",
    "ConfigError",
    "load_config",
    "build_provider",
]
