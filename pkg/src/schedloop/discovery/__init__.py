from .context import BudgetImpossible, ContextEntry, build_initial_context, compress_context, context_tokens
from .evaluate import Evaluation, evaluate_baseline, evaluate_policy, median_score
from .feedback import synthesize_feedback
from .loop import (
    BestPolicy,
    DiscoveryConfig,
    DiscoveryResult,
    IterationRecord,
    RunLedger,
    improvement_pct,
    improvement_ratio,
    run_discovery,
    select_best,
)
from ..llm import estimate_tokens
