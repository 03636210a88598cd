"""conflictkit: detect human-induced conflicts during robot task execution and
predict the user's preferred resolution.

Detection runs two retrieval stages over embedding buffers (speech, then fused
task attributes) with confidence gates, escalating low-confidence ticks to a
pluggable model backend. Preference prediction summarizes a user's stored
same-type cases and picks one catalog option. The package ships as a library,
a CLI (`conflictkit`), and an HTTP service with a companion annotation UI.
"""

from .buffers import (
    MultiModalBuffer,
    RetrievalHit,
    SpeechBuffer,
    build_multimodal_buffer,
    build_speech_buffer,
    cosine,
    load_buffer,
    render_prompt,
    render_unified_prompt,
    save_buffer,
    speech_score,
    task_attribute_score,
)
from .detection import (
    ConflictDetector,
    DetectionConfig,
    DetectionError,
    DetectionResult,
    MockModelBackend,
    RemoteModelBackend,
    StreamFailure,
    escalate,
    parse_label,
)
from .embeddings import (
    EmbeddingProviderConfig,
    EmbeddingVector,
    MockEmbeddingProvider,
    RemoteEmbeddingProvider,
    provider_from_config,
)
from .evaluation import (
    DatasetSplit,
    Metrics,
    SweepResult,
    consistent_totals,
    evaluate,
    evaluate_detailed,
    export_finetune,
    select_best,
    split_dataset,
    sweep,
    unified_retrieval_baseline,
)
from .preferences import (
    MockSummarizer,
    PreferencePrediction,
    PreferenceStore,
    RemoteSummarizer,
    Scenario,
    UserCase,
    predict_solution,
)
from .types import (
    ConflictLabel,
    DatasetRecord,
    DetectionInput,
    SolutionOption,
    catalog_options,
    dump_records,
    load_records,
)

__version__ = "0.1.0"

__all__ = [
    "ConflictDetector",
    "ConflictLabel",
    "DatasetRecord",
    "DatasetSplit",
    "DetectionConfig",
    "DetectionError",
    "DetectionInput",
    "DetectionResult",
    "EmbeddingProviderConfig",
    "EmbeddingVector",
    "Metrics",
    "MockEmbeddingProvider",
    "MockModelBackend",
    "MockSummarizer",
    "MultiModalBuffer",
    "PreferencePrediction",
    "PreferenceStore",
    "RemoteEmbeddingProvider",
    "RemoteModelBackend",
    "RemoteSummarizer",
    "RetrievalHit",
    "Scenario",
    "SolutionOption",
    "SpeechBuffer",
    "StreamFailure",
    "SweepResult",
    "UserCase",
    "build_multimodal_buffer",
    "build_speech_buffer",
    "catalog_options",
    "consistent_totals",
    "cosine",
    "dump_records",
    "escalate",
    "evaluate",
    "evaluate_detailed",
    "export_finetune",
    "load_buffer",
    "load_records",
    "parse_label",
    "predict_solution",
    "provider_from_config",
    "render_prompt",
    "render_unified_prompt",
    "save_buffer",
    "select_best",
    "speech_score",
    "split_dataset",
    "sweep",
    "task_attribute_score",
    "unified_retrieval_baseline",
]
