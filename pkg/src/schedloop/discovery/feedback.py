"""Turning an iteration's outcome into text for the next model call."""

from collections import Counter


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.3f}"
    return str(x)


def _delta(score: float, ref: float, target_metric: str) -> str:
    d = score - ref
    pct = f" ({d / ref * 100:+.1f}%)" if ref else ""
    improved = d > 0 if target_metric == "throughput" else d < 0
    marker = "IMPROVED" if improved else ("UNCHANGED" if d == 0 else "WORSE")
    return f"{d:+.3f}{pct} [{marker}]"


def snippet(source: str, line: int, radius: int = 2) -> str:
    lines = source.splitlines()
    lo, hi = max(1, line - radius), min(len(lines), line + radius)
    width = len(str(hi))
    out = []
    for n in range(lo, hi + 1):
        mark = ">" if n == line else " "
        out.append(f"{mark} {n:>{width}} | {lines[n - 1]}")
    return "\n".join(out)


def synthesize_feedback(record, best_so_far=None, baseline_score: float | None = None,
                        target_metric: str = "throughput", trace_labels=None) -> str:
    """Structured feedback for one IterationRecord.

    ``best_so_far`` is the best earlier record (or None).
    """
    i = record.iteration
    if not record.valid:
        err = record.error or {}
        kind = err.get("kind", "unknown")
        where = []
        if err.get("line") is not None:
            where.append(f"line {err['line']}, column {err.get('column')}")
        if err.get("trace_index") is not None:
            where.append(f"trace {err['trace_index']}")
        if err.get("tick") is not None:
            where.append(f"tick {err['tick']}")
        head = f"Iteration {i}: the policy is INVALID ({kind} error"
        head += f" at {', '.join(where)})." if where else ")."
        parts = [head, f"Error: {err.get('message', '')}"]
        if err.get("line") is not None and record.policy_source:
            parts.append("Offending code:\n" + snippet(record.policy_source, err["line"]))
        if err.get("hint"):
            parts.append(f"Hint: {err['hint']}")
        parts.append("Fix the problem and reply with the complete corrected policy in one fenced code block.")
        return "\n".join(parts)

    rows = ["trace | throughput | p99_latency | median_latency | completed | failed | unfinished | violations"]
    for k, m in enumerate(record.per_trace_metrics):
        label = f"{k}" if not trace_labels else f"{k} ({trace_labels[k]})"
        rows.append(" | ".join([label, _fmt(m.throughput), _fmt(m.p99_latency), _fmt(m.median_latency),
                                str(m.completed), str(m.failed), str(m.unfinished), str(m.violations)]))
    parts = [f"Iteration {i}: the policy is valid.", "Per-trace results:", "\n".join(rows),
             f"Score (median {target_metric} across {len(record.per_trace_metrics)} traces): {record.score:.3f}"]
    if best_so_far is not None:
        parts.append(f"Delta vs best so far (iteration {best_so_far.iteration}, {best_so_far.score:.3f}): "
                     + _delta(record.score, best_so_far.score, target_metric))
    else:
        parts.append("This is the first valid policy.")
    if baseline_score is not None:
        parts.append(f"Delta vs FIFO baseline ({baseline_score:.3f}): "
                     + _delta(record.score, baseline_score, target_metric))
    counts = Counter(record.violation_counts or {})
    if counts:
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
        parts.append("Top violation kinds: " + ", ".join(f"{k} x{n}" for k, n in top))
    else:
        parts.append("No violations.")
    return "\n".join(parts)
