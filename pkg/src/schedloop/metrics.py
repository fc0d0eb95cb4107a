"""End-of-run scorecard."""

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CompletionRecord:
    pipeline_id: str
    arrival_tick: int
    terminal_tick: int
    outcome: str  # completed | failed | unfinished

    @property
    def latency(self) -> int | None:
        if self.outcome != "completed":
            return None
        return self.terminal_tick - self.arrival_tick


@dataclass(frozen=True)
class SimMetrics:
    throughput: float
    p99_latency: int | None
    median_latency: int | None
    completed: int
    failed: int
    unfinished: int
    violations: int
    elapsed_ticks: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimMetrics":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def nearest_rank(sorted_values, q: int):
    """q-th percentile by nearest rank: the ceil(q/100 * n)-th smallest value."""
    n = len(sorted_values)
    if n == 0:
        return None
    rank = max(1, -(-q * n // 100))
    return sorted_values[rank - 1]


def compute_metrics(completion_log, violation_log, elapsed_ticks: int) -> SimMetrics:
    latencies = sorted(r.latency for r in completion_log if r.outcome == "completed")
    failed = sum(1 for r in completion_log if r.outcome == "failed")
    unfinished = sum(1 for r in completion_log if r.outcome == "unfinished")
    completed = len(latencies)
    throughput = completed / elapsed_ticks * 1000 if elapsed_ticks > 0 else 0.0
    return SimMetrics(
        throughput=float(throughput),
        p99_latency=nearest_rank(latencies, 99),
        median_latency=nearest_rank(latencies, 50),
        completed=completed,
        failed=failed,
        unfinished=unfinished,
        violations=len(violation_log),
        elapsed_ticks=elapsed_ticks,
    )
