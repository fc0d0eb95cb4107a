"""Canonical prompt texts. Treated as configuration, not ground truth."""

from ..lang import BUILTINS, FIFO_SOURCE

SIMULATOR_SUMMARY = """\
You are designing a scheduling policy for a Function-as-a-Service data platform.
Jobs arrive as pipelines: DAGs of operations (ops). Each op needs a fixed number
of CPU cores and MB of memory for `duration` ticks, and may start only after all
of its dependencies are done. Pipelines are either "interactive" (short, latency
sensitive) or "batch" (long). A pipeline that is not complete `timeout` ticks
after its arrival fails and all of its ops are killed.

The cluster is a set of pools (worker VMs), each with a CPU and memory capacity.
Time advances in discrete ticks. On every tick the simulator:
  1. delivers newly arrived pipelines,
  2. fails timed-out pipelines and reports them in `failures`,
  3. calls your `schedule(failures, pipelines)` block,
  4. applies your suspensions, then your assignments, in the order you emitted
     them; an invalid entry (op not ready, pool full, unknown id, ...) is
     skipped and recorded as a violation, valid entries take effect,
  5. advances every running op by one tick; an op finishing at the end of a
     tick makes its successors ready on the next tick.
A suspended op loses all progress and becomes ready again (restart semantics).
"""

METRICS_SUMMARY = """\
Metrics, per trace:
  throughput   completed pipelines per 1000 ticks of simulated time (higher is better)
  p99_latency  99th percentile (nearest rank) of completion tick - arrival tick (lower is better)
  failed       pipelines that hit their timeout
  violations   rejected decisions plus ops left waiting longer than the waiting bound
A policy is scored by the median of the target metric over a fixed suite of traces.
"""

LANGUAGE_REFERENCE = """\
Policies are written in a small sandboxed language (not Python):

  program   := "init" block "schedule" "(" IDENT "," IDENT ")" block
  block     := "{" stmt* "}"
  stmt      := "let" IDENT "=" expr ";" | lvalue "=" expr ";" | expr ";"
             | "if" expr block ("else" block | "else" if_stmt)?
             | "for" IDENT "in" expr block
  lvalue    := IDENT ("." IDENT | "[" expr "]")*
  expr      := numbers, "strings", true/false, [list, literals], {key: value},
               variables, a.field, a[i], builtin calls f(x, y),
               + - * / % (numbers; + also concatenates lists),
               == != (same-type values), < <= > >= (numbers), and or not (booleans)
  comments start with # and run to the end of the line

Rules: variables must be declared with `let` before use and are block scoped.
There are no user functions, no while loops and no break; loop with
`for x in list`. `state` is a persistent record kept across ticks; create its
fields in `init`. Conditions must be booleans. Numbers are floats.

Views:
  pipeline  {pipeline_id, workload_class, arrival_tick, ops: [op]}
  op        {op_id, pipeline_id, cpu_req, mem_req, duration_hint, deps: [op_id], status}
  pool(i)   {pool_id, cpu_capacity, mem_capacity, cpu_free, mem_free}
  running(i) -> [{op_id, pipeline_id, workload_class, cpu_req, mem_req, duration_hint, elapsed}]
  failures  [{pipeline_id, reason, tick}]

Builtins:
  len(x) append(list, v) remove_at(list, i) sort_by(list, "field", ascending)
  range(n) min(a, b) max(a, b) floor(x) ceil(x)
  ready_ops(pipeline) -> ready ops of that pipeline not yet assigned in this call
  pipeline_status(pipeline) -> "in_flight" | "completed" | "failed"
  num_pools() pool(i) running(i) assign(op_id, pool_id) suspend(op_id)
assign/suspend and executor queries are only allowed inside schedule. pool()
values are a snapshot taken before your decisions, so track free capacity
yourself when placing several ops. sort_by is stable.
"""

assert set(BUILTINS) <= set(LANGUAGE_REFERENCE.replace("(", " ").split()), "reference must list every builtin"


def system_prompt() -> str:
    return (
        SIMULATOR_SUMMARY
        + "\n"
        + METRICS_SUMMARY
        + "\n"
        + LANGUAGE_REFERENCE
        + "\nExample policy (the FIFO baseline):\n```\n"
        + FIFO_SOURCE
        + "```\n"
        + "Respect the interfaces exactly: use only the listed builtins and view fields.\n"
    )


def user_prompt(target_metric: str) -> str:
    goal = "maximize median throughput" if target_metric == "throughput" else "minimize median p99_latency"
    return (
        f"Write a new scheduling policy that aims to {goal} across the trace suite. "
        "Start from the FIFO baseline above and improve it. After each attempt you will receive the "
        "simulation results or the error; analyze them and propose targeted improvements. "
        "Reply with the complete policy in a single fenced code block."
    )
