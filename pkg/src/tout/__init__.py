"""Uncertainty-aware tree search over language-model reasoning steps.

States grow one thought at a time; each candidate is valued by repeated
sampling under a temperature schedule, the sample variance is its local
uncertainty, and search (beam or depth-first) selects by the confidence
ratio value / (uncertainty + epsilon).
"""

from .backends import (
    Backend,
    BackendRequest,
    BackendResponse,
    HttpBackend,
    ResponseCache,
    ScriptedBackend,
    SyntheticOracleBackend,
    cached_generate,
    generate,
)
from .model import (
    BackendUnavailableError,
    InvalidArgumentError,
    MissingStateError,
    RunRecord,
    ScoredState,
    SearchConfig,
    SearchExhaustedError,
    State,
    StateStore,
    TaskSpec,
    Transcript,
    extend_state,
    path_to_root,
)
from .search import (
    METHODS,
    SearchResult,
    run_method,
    tout_bfs,
    tout_dfs,
)
from .uncertainty import (
    UncertaintyEstimate,
    aggregate_value,
    confidence_score,
    estimate_uncertainty,
    evaluate_state,
    temperature_schedule,
    variance,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BackendRequest",
    "BackendResponse",
    "BackendUnavailableError",
    "HttpBackend",
    "InvalidArgumentError",
    "METHODS",
    "MissingStateError",
    "ResponseCache",
    "RunRecord",
    "ScoredState",
    "ScriptedBackend",
    "SearchConfig",
    "SearchExhaustedError",
    "SearchResult",
    "State",
    "StateStore",
    "SyntheticOracleBackend",
    "TaskSpec",
    "Transcript",
    "UncertaintyEstimate",
    "aggregate_value",
    "cached_generate",
    "confidence_score",
    "estimate_uncertainty",
    "evaluate_state",
    "extend_state",
    "generate",
    "path_to_root",
    "run_method",
    "temperature_schedule",
    "tout_bfs",
    "tout_dfs",
    "variance",
    "__version__",
]
