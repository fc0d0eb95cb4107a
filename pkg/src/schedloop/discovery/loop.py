"""The generate-and-verify loop and its run directory.

Run directory layout::

    <run_dir>/manifest.json        config snapshot, baseline, ledger, best summary
    <run_dir>/policy_<i>.pol       what iteration i produced (valid or not)
    <run_dir>/records.jsonl        one IterationRecord per line
    <run_dir>/best.pol             best valid policy, when there is one
    <run_dir>/context_final.jsonl  the context after the last iteration
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import InvalidConfig, PolicyRuntimeError
from ..lang import InterpError
from ..lang.interp import DEFAULT_MAX_STEPS
from ..llm import CompletionResult, ExtractionError, GenerationParams, ProviderConfig, ProviderError, extract_code_block
from ..metrics import SimMetrics
from ..model import SimConfig
from .context import ContextEntry, build_initial_context, compress_context, context_tokens, to_messages
from .evaluate import TARGET_METRICS, better, evaluate_baseline, evaluate_policy
from .feedback import synthesize_feedback

log = logging.getLogger(__name__)


@dataclass
class DiscoveryConfig:
    iterations: int
    target_metric: str
    token_budget: int
    traces: list
    sim_config: SimConfig
    provider: ProviderConfig | None = None
    generation: GenerationParams = field(default_factory=GenerationParams)
    max_steps: int = DEFAULT_MAX_STEPS
    jobs: int = 1
    trace_source: str = "canonical"

    def validate(self) -> None:
        if self.iterations < 1:
            raise InvalidConfig("iterations must be >= 1")
        if self.target_metric not in TARGET_METRICS:
            raise InvalidConfig(f"target_metric must be one of {', '.join(TARGET_METRICS)}")
        if not self.traces:
            raise InvalidConfig("at least one trace is required")
        if self.token_budget < 1:
            raise InvalidConfig("token_budget must be >= 1")

    def snapshot(self) -> dict:
        return {
            "iterations": self.iterations,
            "target_metric": self.target_metric,
            "token_budget": self.token_budget,
            "traces": self.trace_source,
            "trace_labels": [t.label for t in self.traces],
            "sim_config": self.sim_config.to_dict(),
            "provider": self.provider.to_dict() if self.provider else None,
            "generation": {"temperature": self.generation.temperature,
                           "reasoning_effort": self.generation.reasoning_effort},
            "max_steps": self.max_steps,
        }


@dataclass
class IterationRecord:
    iteration: int
    policy_source: str
    valid: bool
    per_trace_metrics: list[SimMetrics] | None = None
    score: float | None = None
    error: dict | None = None
    feedback_text: str = ""
    violation_counts: dict = field(default_factory=dict)
    usage: dict = field(default_factory=dict)

    def summary_line(self) -> str:
        if self.valid:
            return f"(iteration {self.iteration}: valid, score {self.score:.3f})"
        return f"(iteration {self.iteration}: invalid, {self.error['kind']} error)"

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "valid": self.valid,
            "score": self.score,
            "per_trace_metrics": [m.to_dict() for m in self.per_trace_metrics] if self.per_trace_metrics else None,
            "violation_counts": self.violation_counts,
            "error": self.error,
            "feedback": self.feedback_text,
            "usage": self.usage,
            "policy_source": self.policy_source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        metrics = d.get("per_trace_metrics")
        return cls(
            iteration=d["iteration"],
            policy_source=d["policy_source"],
            valid=d["valid"],
            per_trace_metrics=[SimMetrics.from_dict(m) for m in metrics] if metrics else None,
            score=d.get("score"),
            error=d.get("error"),
            feedback_text=d.get("feedback", ""),
            violation_counts=d.get("violation_counts") or {},
            usage=d.get("usage") or {},
        )


@dataclass
class BestPolicy:
    policy_source: str
    score: float
    iteration: int
    improvement_vs_baseline: float | None = None

    def to_dict(self) -> dict:
        return {"score": self.score, "iteration": self.iteration,
                "improvement_vs_baseline": self.improvement_vs_baseline,
                "improvement_pct": improvement_pct(self.improvement_vs_baseline)}


@dataclass
class RunLedger:
    calls: list[dict] = field(default_factory=list)

    def add(self, iteration: int, result: CompletionResult) -> None:
        self.calls.append({"iteration": iteration, "tokens_in": result.tokens_in, "tokens_out": result.tokens_out,
                           "cost_usd": result.cost_usd, "latency_seconds": result.latency_seconds,
                           "estimated": result.estimated})

    @property
    def total_cost_usd(self) -> float:
        return sum(c["cost_usd"] for c in self.calls)

    @property
    def total_time_seconds(self) -> float:
        return sum(c["latency_seconds"] for c in self.calls)

    def to_dict(self) -> dict:
        return {"total_cost_usd": self.total_cost_usd, "total_time_seconds": self.total_time_seconds,
                "total_tokens_in": sum(c["tokens_in"] for c in self.calls),
                "total_tokens_out": sum(c["tokens_out"] for c in self.calls),
                "per_iteration": self.calls}


def improvement_ratio(score: float, baseline: float, target_metric: str) -> float | None:
    """> 1 means better than the baseline for either metric."""
    if target_metric == "throughput":
        return score / baseline if baseline else None
    return baseline / score if score else None


def improvement_pct(ratio: float | None) -> float | None:
    return None if ratio is None else (ratio - 1.0) * 100.0


def select_best(records, target_metric: str) -> IterationRecord | None:
    best = None
    for r in records:
        if r.valid and (best is None or better(r.score, best.score, target_metric)):
            best = r
    return best


def error_dict(exc) -> dict:
    if isinstance(exc, PolicyRuntimeError):
        d = error_dict(exc.cause)
        d.update(trace_index=exc.trace_index, tick=exc.tick)
        return d
    if isinstance(exc, InterpError):
        d = exc.to_dict()
    elif isinstance(exc, ExtractionError):
        d = {"kind": "extraction", "message": str(exc), "line": None, "column": None, "hint": exc.hint}
    else:
        d = {"kind": "internal", "message": str(exc), "line": None, "column": None, "hint": ""}
    d.update(trace_index=None, tick=None)
    return d


@dataclass
class DiscoveryResult:
    best: BestPolicy | None
    records: list[IterationRecord]
    ledger: RunLedger
    context: list[ContextEntry]
    baseline_score: float


class RunWriter:
    """Persists a run incrementally so an aborted run keeps its history."""

    def __init__(self, run_dir, run_id: str, config: DiscoveryConfig):
        self.dir = Path(run_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self.config = config
        (self.dir / "records.jsonl").write_text("", encoding="utf-8")

    def policy(self, iteration: int, source: str) -> None:
        (self.dir / f"policy_{iteration}.pol").write_text(source, encoding="utf-8")

    def record(self, rec: IterationRecord) -> None:
        with open(self.dir / "records.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    def finish(self, status: str, baseline: float, ledger: RunLedger, best: BestPolicy | None, context) -> None:
        if best is not None:
            (self.dir / "best.pol").write_text(best.policy_source, encoding="utf-8")
        with open(self.dir / "context_final.jsonl", "w", encoding="utf-8") as fh:
            for e in context:
                fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        manifest = {
            "run_id": self.run_id,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "status": status,
            "config": self.config.snapshot(),
            "baseline_score": baseline,
            "ledger": ledger.to_dict(),
            "best": best.to_dict() if best else None,
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")


def _attempt(config: DiscoveryConfig, iteration: int, text: str) -> IterationRecord:
    try:
        source = extract_code_block(text)
    except ExtractionError as exc:
        return IterationRecord(iteration, text, False, error=error_dict(exc))
    try:
        ev = evaluate_policy(source, config.traces, config.sim_config, config.target_metric, config.max_steps,
                             config.jobs)
    except (InterpError, PolicyRuntimeError) as exc:
        return IterationRecord(iteration, source, False, error=error_dict(exc))
    return IterationRecord(iteration, source, True, ev.per_trace_metrics, ev.score,
                           violation_counts=ev.violation_counts)


def run_discovery(config: DiscoveryConfig, provider, run_dir=None, run_id: str = "run",
                  baseline_score: float | None = None) -> DiscoveryResult:
    """K iterations of request -> validate -> simulate/feedback -> append -> compress."""
    config.validate()
    context = build_initial_context(config)
    if baseline_score is None:
        baseline_score = evaluate_baseline(config.traces, config.sim_config, config.target_metric, config.jobs).score
    labels = [t.label for t in config.traces]
    writer = RunWriter(run_dir, run_id, config) if run_dir is not None else None
    records: list[IterationRecord] = []
    ledger = RunLedger()

    def best_policy():
        rec = select_best(records, config.target_metric)
        if rec is None:
            return None
        ratio = improvement_ratio(rec.score, baseline_score, config.target_metric)
        return BestPolicy(rec.policy_source, rec.score, rec.iteration, ratio)

    for i in range(1, config.iterations + 1):
        try:
            result = provider.complete(to_messages(context), config.generation)
        except ProviderError:
            if writer:
                writer.finish("aborted", baseline_score, ledger, best_policy(), context)
            raise
        ledger.add(i, result)
        rec = _attempt(config, i, result.text)
        rec.usage = ledger.calls[-1]
        prior_best = select_best(records, config.target_metric)
        rec.feedback_text = synthesize_feedback(rec, prior_best, baseline_score, config.target_metric, labels)
        records.append(rec)
        if writer:
            writer.policy(i, rec.policy_source)
            writer.record(rec)
        log.info("iteration %d: %s", i, rec.summary_line())

        summary = rec.summary_line()
        context.append(ContextEntry("assistant", result.text, i, summary=summary))
        context.append(ContextEntry("feedback", rec.feedback_text, i, summary=summary))
        if context_tokens(context) > config.token_budget:
            best = select_best(records, config.target_metric)
            context = compress_context(context, config.token_budget, best.iteration if best else None)

    best = best_policy()
    if writer:
        writer.finish("completed", baseline_score, ledger, best, context)
    return DiscoveryResult(best, records, ledger, context, baseline_score)
