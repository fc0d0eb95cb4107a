"""Tick-based executor: applies policy decisions to pools and tracks outcomes.

One call to :func:`step` runs a single tick in this order:

1. deliver pipelines whose ``arrival_tick`` equals the clock;
2. fail in-flight pipelines that reached their timeout, killing their ops;
3. invoke the policy with pending failures, new arrivals and a read-only view;
4. apply suspensions, then assignments, each validated on its own;
5. advance running ops by one tick and retire finished ops/pipelines;
6. advance the clock.
"""

import json
from dataclasses import dataclass, field
from typing import Protocol

from .errors import InvalidTrace, PolicyRuntimeError
from .lang.errors import InterpError
from .events import Assignment, FailureNotice, ScheduleResult, Suspension, ViolationEvent
from .metrics import CompletionRecord, SimMetrics, compute_metrics
from .model import OpSpec, PipelineSpec, SimConfig, validate_config, validate_trace

WAITING, READY, RUNNING, DONE = "waiting", "ready", "running", "done"
IN_FLIGHT, COMPLETED, FAILED = "in_flight", "completed", "failed"

# decision-rejection kinds; waiting_bound_exceeded is monitor-only
DECISION_VIOLATIONS = (
    "oversubscription",
    "not_ready",
    "unknown_op",
    "unknown_pool",
    "duplicate_assignment",
    "suspend_not_running",
)
VIOLATION_KINDS = DECISION_VIOLATIONS + ("waiting_bound_exceeded",)


class Policy(Protocol):
    """What the simulator needs from a scheduling policy."""

    name: str

    def start(self) -> None:
        """Reset persistent policy state before a run."""

    def schedule(self, failures: list, pipelines: list, view: "ExecutorView") -> ScheduleResult: ...


@dataclass
class SimState:
    config: SimConfig
    trace: tuple[PipelineSpec, ...]
    pipelines: dict[str, PipelineSpec]
    ops: dict[str, OpSpec]
    successors: dict[str, list[str]]
    clock: int = 0
    cpu_used: list[int] = field(default_factory=list)
    mem_used: list[int] = field(default_factory=list)
    running: dict[str, list] = field(default_factory=dict)  # op_id -> [pool_id, elapsed]
    op_status: dict[str, str] = field(default_factory=dict)
    pipeline_status: dict[str, str] = field(default_factory=dict)
    pending_failures: list[FailureNotice] = field(default_factory=list)
    completion_log: list[CompletionRecord] = field(default_factory=list)
    violation_log: list[ViolationEvent] = field(default_factory=list)
    assignment_log: list[tuple[int, str, int]] = field(default_factory=list)
    ready_since: dict[str, int] = field(default_factory=dict)
    wait_flagged: set = field(default_factory=set)
    unmet: dict[str, int] = field(default_factory=dict)
    remaining: dict[str, int] = field(default_factory=dict)
    next_arrival: int = 0
    in_flight: dict[str, None] = field(default_factory=dict)  # ordered set

    @property
    def pool_usage(self) -> list[tuple[int, int]]:
        return list(zip(self.cpu_used, self.mem_used))

    def all_terminal(self) -> bool:
        return self.next_arrival >= len(self.trace) and not self.in_flight


class ExecutorView:
    """Read-only window on the executor handed to policies during step 3.

    The state does not change while a policy runs, so reads are consistent
    snapshots of the tick.
    """

    __slots__ = ("_s",)

    def __init__(self, state: SimState):
        self._s = state

    @property
    def clock(self) -> int:
        return self._s.clock

    @property
    def num_pools(self) -> int:
        return len(self._s.config.pools)

    def pool(self, pool_id: int) -> dict:
        s = self._s
        cfg = s.config.pools[pool_id]
        return {
            "pool_id": pool_id,
            "cpu_capacity": cfg.cpu_capacity,
            "mem_capacity": cfg.mem_capacity,
            "cpu_free": cfg.cpu_capacity - s.cpu_used[pool_id],
            "mem_free": cfg.mem_capacity - s.mem_used[pool_id],
        }

    def running(self, pool_id: int) -> list[dict]:
        s = self._s
        out = []
        for op_id, (pid, elapsed) in s.running.items():
            if pid != pool_id:
                continue
            op = s.ops[op_id]
            out.append({
                "op_id": op_id,
                "pipeline_id": op.pipeline_id,
                "workload_class": s.pipelines[op.pipeline_id].workload_class,
                "cpu_req": op.cpu_req,
                "mem_req": op.mem_req,
                "duration_hint": op.duration,
                "elapsed": elapsed,
            })
        return out

    def op_status(self, op_id: str) -> str:
        return self._s.op_status[op_id]

    def ready_ops(self, pipeline_id: str) -> list[OpSpec]:
        s = self._s
        if s.pipeline_status.get(pipeline_id) != IN_FLIGHT:
            return []
        return [op for op in s.pipelines[pipeline_id].ops if s.op_status[op.op_id] == READY]

    def pipeline_status(self, pipeline_id: str) -> str:
        return self._s.pipeline_status.get(pipeline_id, "unknown")


def init_sim(trace, config: SimConfig) -> SimState:
    validate_config(config)
    pipelines = tuple(getattr(trace, "pipelines", trace))
    validate_trace(pipelines, config)
    for prev, cur in zip(pipelines, pipelines[1:]):
        if cur.arrival_tick < prev.arrival_tick:
            raise InvalidTrace("pipelines must be sorted by arrival_tick")
    ops = {}
    successors: dict[str, list[str]] = {}
    for p in pipelines:
        for op in p.ops:
            ops[op.op_id] = op
            successors.setdefault(op.op_id, [])
        for op in p.ops:
            for d in op.deps:
                successors[d].append(op.op_id)
    n = len(config.pools)
    return SimState(
        config=config,
        trace=pipelines,
        pipelines={p.pipeline_id: p for p in pipelines},
        ops=ops,
        successors=successors,
        cpu_used=[0] * n,
        mem_used=[0] * n,
    )


def _deliver(state: SimState) -> list[PipelineSpec]:
    arrived = []
    trace = state.trace
    while state.next_arrival < len(trace) and trace[state.next_arrival].arrival_tick <= state.clock:
        p = trace[state.next_arrival]
        state.next_arrival += 1
        state.pipeline_status[p.pipeline_id] = IN_FLIGHT
        state.in_flight[p.pipeline_id] = None
        state.remaining[p.pipeline_id] = len(p.ops)
        for op in p.ops:
            state.unmet[op.op_id] = len(op.deps)
            if op.deps:
                state.op_status[op.op_id] = WAITING
            else:
                state.op_status[op.op_id] = READY
                state.ready_since[op.op_id] = state.clock
        arrived.append(p)
    return arrived


def _release(state: SimState, op_id: str) -> int:
    pool_id, _ = state.running.pop(op_id)
    op = state.ops[op_id]
    state.cpu_used[pool_id] -= op.cpu_req
    state.mem_used[pool_id] -= op.mem_req
    return pool_id


def _expire(state: SimState) -> None:
    t = state.clock
    expired = [
        pid for pid in state.in_flight
        if t - state.pipelines[pid].arrival_tick >= state.pipelines[pid].timeout
    ]
    for pid in expired:
        p = state.pipelines[pid]
        for op in p.ops:
            st = state.op_status[op.op_id]
            if st == RUNNING:
                _release(state, op.op_id)
            if st != DONE:
                state.op_status[op.op_id] = WAITING
                state.ready_since.pop(op.op_id, None)
        del state.in_flight[pid]
        state.pipeline_status[pid] = FAILED
        state.pending_failures.append(FailureNotice(pid, "timeout", t))
        state.completion_log.append(CompletionRecord(pid, p.arrival_tick, t, FAILED))


def _violate(state: SimState, kind: str, op_id=None, pool_id=None, message: str = "") -> None:
    state.violation_log.append(ViolationEvent(state.clock, kind, op_id, pool_id, message))


def validate_assignment(state: SimState, a: Assignment, assigned_this_tick=frozenset()) -> ViolationEvent | None:
    """Return None when the assignment may be applied, else the violation."""
    t = state.clock
    op = state.ops.get(a.op_id) if isinstance(a.op_id, str) else None
    if op is None:
        return ViolationEvent(t, "unknown_op", a.op_id, a.pool_id, f"no op with id {a.op_id!r}")
    pools = state.config.pools
    if not isinstance(a.pool_id, int) or isinstance(a.pool_id, bool) or not 0 <= a.pool_id < len(pools):
        return ViolationEvent(t, "unknown_pool", a.op_id, a.pool_id,
                              f"pool {a.pool_id!r} does not exist (valid: 0..{len(pools) - 1})")
    if a.op_id in assigned_this_tick:
        return ViolationEvent(t, "duplicate_assignment", a.op_id, a.pool_id,
                              f"op {a.op_id} was already assigned this tick")
    status = state.op_status.get(a.op_id)
    if status != READY:
        reason = "has not arrived" if status is None else f"is {status}"
        if status == WAITING and state.pipeline_status.get(op.pipeline_id) == FAILED:
            reason = "belongs to a failed pipeline"
        return ViolationEvent(t, "not_ready", a.op_id, a.pool_id, f"op {a.op_id} {reason}")
    cfg = pools[a.pool_id]
    cpu_free = cfg.cpu_capacity - state.cpu_used[a.pool_id]
    mem_free = cfg.mem_capacity - state.mem_used[a.pool_id]
    if op.cpu_req > cpu_free or op.mem_req > mem_free:
        return ViolationEvent(
            t, "oversubscription", a.op_id, a.pool_id,
            f"op {a.op_id} needs cpu={op.cpu_req} mem={op.mem_req}, "
            f"pool {a.pool_id} has cpu={cpu_free} mem={mem_free} free",
        )
    return None


def _apply(state: SimState, result: ScheduleResult) -> None:
    for sus in result.suspensions:
        op_id = getattr(sus, "op_id", sus)
        if not isinstance(op_id, str) or op_id not in state.ops:
            _violate(state, "unknown_op", op_id, None, f"no op with id {op_id!r}")
            continue
        if state.op_status.get(op_id) != RUNNING:
            _violate(state, "suspend_not_running", op_id, None,
                     f"op {op_id} is {state.op_status.get(op_id, 'not arrived')}, not running")
            continue
        _release(state, op_id)
        state.op_status[op_id] = READY
        state.ready_since[op_id] = state.clock
        state.wait_flagged.discard(op_id)

    assigned: set[str] = set()
    for a in result.assignments:
        v = validate_assignment(state, a, assigned)
        if v is not None:
            state.violation_log.append(v)
            continue
        op = state.ops[a.op_id]
        state.cpu_used[a.pool_id] += op.cpu_req
        state.mem_used[a.pool_id] += op.mem_req
        state.running[a.op_id] = [a.pool_id, 0]
        state.op_status[a.op_id] = RUNNING
        state.ready_since.pop(a.op_id, None)
        state.wait_flagged.discard(a.op_id)
        assigned.add(a.op_id)
        state.assignment_log.append((state.clock, a.op_id, a.pool_id))


def _monitor_waiting(state: SimState) -> None:
    bound = state.config.waiting_bound
    t = state.clock
    for op_id, since in state.ready_since.items():
        # an op still ready after the apply phase has waited through tick t
        if t - since + 1 > bound and op_id not in state.wait_flagged:
            state.wait_flagged.add(op_id)
            _violate(state, "waiting_bound_exceeded", op_id, None,
                     f"op {op_id} ready since tick {since}, waited more than {bound} ticks")


def _advance(state: SimState) -> None:
    finished = []
    for op_id, slot in state.running.items():
        slot[1] += 1
        if slot[1] == state.ops[op_id].duration:
            finished.append(op_id)
    end = state.clock + 1
    for op_id in finished:
        _release(state, op_id)
        state.op_status[op_id] = DONE
        op = state.ops[op_id]
        for succ in state.successors[op_id]:
            state.unmet[succ] -= 1
            if state.unmet[succ] == 0 and state.op_status[succ] == WAITING:
                state.op_status[succ] = READY
                state.ready_since[succ] = end
        pid = op.pipeline_id
        state.remaining[pid] -= 1
        if state.remaining[pid] == 0:
            del state.in_flight[pid]
            state.pipeline_status[pid] = COMPLETED
            p = state.pipelines[pid]
            state.completion_log.append(CompletionRecord(pid, p.arrival_tick, end, COMPLETED))


def step(state: SimState, policy: Policy) -> SimState:
    """Run one tick in place and return the state."""
    if state.clock >= state.config.max_ticks:
        raise RuntimeError("simulation already reached max_ticks")
    arrived = _deliver(state)
    _expire(state)
    failures, state.pending_failures = state.pending_failures, []
    try:
        result = policy.schedule(failures, arrived, ExecutorView(state))
    except PolicyRuntimeError as exc:
        if exc.tick is None:
            exc.tick = state.clock
        raise
    except InterpError as exc:
        raise PolicyRuntimeError(exc, tick=state.clock) from exc
    _apply(state, result)
    _monitor_waiting(state)
    _advance(state)
    state.clock += 1
    return state


def finalize(state: SimState) -> list[CompletionRecord]:
    """Close the completion log: everything not terminal is ``unfinished``."""
    log = list(state.completion_log)
    for p in state.trace:
        if state.pipeline_status.get(p.pipeline_id) in (COMPLETED, FAILED):
            continue
        log.append(CompletionRecord(p.pipeline_id, p.arrival_tick, max(state.clock, p.arrival_tick), "unfinished"))
    return log


@dataclass
class RunResult:
    metrics: SimMetrics
    completion_log: list[CompletionRecord]
    violation_log: list[ViolationEvent]
    assignment_log: list[tuple[int, str, int]]

    def assignment_log_jsonl(self) -> str:
        return "".join(
            json.dumps({"tick": t, "op_id": op, "pool_id": pool}) + "\n" for t, op, pool in self.assignment_log
        )


def run(trace, policy: Policy, config: SimConfig) -> RunResult:
    state = init_sim(trace, config)
    policy.start()
    while state.clock < config.max_ticks and not state.all_terminal():
        step(state, policy)
    log = finalize(state)
    metrics = compute_metrics(log, state.violation_log, state.clock)
    return RunResult(metrics, log, state.violation_log, state.assignment_log)
