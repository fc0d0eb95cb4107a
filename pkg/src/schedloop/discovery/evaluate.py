"""Scoring a policy over a trace suite."""

import statistics
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..errors import PolicyRuntimeError
from ..lang import InterpretedPolicy, NativeFifo, load_program
from ..lang.interp import DEFAULT_MAX_STEPS
from ..metrics import SimMetrics
from ..model import SimConfig
from ..sim import run

TARGET_METRICS = ("throughput", "p99_latency")


@dataclass
class Evaluation:
    per_trace_metrics: list[SimMetrics]
    score: float
    violation_counts: dict = field(default_factory=dict)


def metric_value(m: SimMetrics, target_metric: str, sim_config: SimConfig) -> float:
    if target_metric == "throughput":
        return m.throughput
    # no completions: charge the whole horizon
    return float(m.p99_latency if m.p99_latency is not None else sim_config.max_ticks)


def median_score(values) -> float:
    """Median; an even count averages the two middle values."""
    return float(statistics.median(values))


def better(a: float, b: float, target_metric: str) -> bool:
    return a > b if target_metric == "throughput" else a < b


def _run_one(args):
    source, trace, sim_config, max_steps = args
    policy = NativeFifo() if source is None else InterpretedPolicy(load_program(source), max_steps)
    res = run(trace, policy, sim_config)
    return res.metrics, Counter(v.kind for v in res.violation_log)


def _evaluate(source, traces, sim_config, target_metric, max_steps, jobs) -> Evaluation:
    if target_metric not in TARGET_METRICS:
        raise ValueError(f"target_metric must be one of {TARGET_METRICS}")
    tasks = [(source, t, sim_config, max_steps) for t in traces]
    results = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, t) for t in tasks]
            # merge in trace order; the first failing trace wins, as in a sequential run
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except PolicyRuntimeError as exc:
                    exc.trace_index = i
                    for f in futures:
                        f.cancel()
                    raise
    else:
        for i, task in enumerate(tasks):
            try:
                results.append(_run_one(task))
            except PolicyRuntimeError as exc:
                exc.trace_index = i
                raise
    metrics = [m for m, _ in results]
    counts: Counter = Counter()
    for _, c in results:
        counts.update(c)
    score = median_score([metric_value(m, target_metric, sim_config) for m in metrics])
    return Evaluation(metrics, score, dict(sorted(counts.items())))


def evaluate_policy(policy_source: str, traces, sim_config: SimConfig, target_metric: str = "throughput",
                    max_steps: int = DEFAULT_MAX_STEPS, jobs: int = 1) -> Evaluation:
    """Parse/validate once, then run every trace with fresh policy state.

    Raises InterpError for parse/static problems and PolicyRuntimeError
    (annotated with trace_index and tick) when a run fails.
    """
    load_program(policy_source)
    return _evaluate(policy_source, traces, sim_config, target_metric, max_steps, jobs)


def evaluate_baseline(traces, sim_config: SimConfig, target_metric: str = "throughput", jobs: int = 1) -> Evaluation:
    """Native FIFO on the suite."""
    return _evaluate(None, traces, sim_config, target_metric, DEFAULT_MAX_STEPS, jobs)
